use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqdesign::experiments::{
    self, plot, BackendKind, ExperimentConfig, ExperimentError, Overrides, Study,
};

/// Zero-shot sequential generation of parametric designs.
#[derive(Debug, Parser)]
#[command(name = "seqdesign", version, about)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Regressor backend: kernel, knn or remote.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    /// Remote regressor endpoint, e.g. http://127.0.0.1:8080.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate designs for the configured conditions.
    Gen,
    /// Complete designs from the parameters listed in `generation.known`.
    Inpaint,
    /// Generate against test conditions and score MAPE/MAE, PRD and MMD.
    Eval,
    /// Accuracy against reference-set size.
    SweepRefsize,
    /// Accuracy against the number of inpainted parameters.
    SweepInpaint,
    /// Accuracy under random generation orders.
    StudyOrder,
    /// Spread of designs generated from one repeated, noise-perturbed condition.
    StudyNoise,
    /// Designs generated against several reference subsets.
    StudyRefsets,
    /// Render result CSVs to SVG next to each file (or into --out).
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    config.apply(&Overrides {
        seed: cli.seed,
        output_dir: cli.out.clone(),
        backend: cli.backend,
        endpoint: cli.endpoint.clone(),
    });
    config.validate()?;
    Ok(config)
}

fn plot_files(files: &[PathBuf], out: Option<&Path>) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut written = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(file).map_err(|e| ExperimentError::Io {
            path: file.clone(),
            source: e,
        })?;
        let svg = plot::render_csv(&text)?;
        let target = match out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
                dir.join(file.file_name().unwrap_or_default()).with_extension("svg")
            }
            None => file.with_extension("svg"),
        };
        std::fs::write(&target, svg).map_err(|e| ExperimentError::Io {
            path: target.clone(),
            source: e,
        })?;
        written.push(target);
    }
    Ok(written)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, ExperimentError> {
    let study = match &cli.command {
        Command::Plot { csv } => return plot_files(csv, cli.out.as_deref()),
        Command::Gen => Study::Generate,
        Command::Inpaint => Study::Inpaint,
        Command::Eval => Study::Eval,
        Command::SweepRefsize => Study::ReferenceSizeSweep,
        Command::SweepInpaint => Study::InpaintingSweep,
        Command::StudyOrder => Study::OrderStudy,
        Command::StudyNoise => Study::NoiseStudy,
        Command::StudyRefsets => Study::ReferenceVariation,
    };
    let config = load_config(cli)?;
    let output = experiments::run(study, &config)?;
    output.write(&config.output_dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
