//! Result tables and their CSV form.
//!
//! Each file opens with one comment line identifying what produced it:
//!
//! ```text
//! # seqdesign 0.1.0 config=<sha256> seed=7 backend=kernel plot=lines
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use super::{ExperimentError, Result};
use crate::data::format_value;

/// How `plot` renders a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Precision against recall.
    Prd,
    /// Every numeric column against the first.
    Lines,
    /// One histogram per column.
    Histogram,
    None,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Prd => "prd",
            Self::Lines => "lines",
            Self::Histogram => "histogram",
            Self::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Prd, Self::Lines, Self::Histogram, Self::None]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub backend: String,
}

impl Provenance {
    pub fn line(&self, plot: PlotKind) -> String {
        format!(
            "seqdesign {} config={} seed={} backend={} plot={}",
            self.version,
            self.config_hash,
            self.seed,
            self.backend,
            plot.as_str()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name, including the `.csv` extension.
    pub name: String,
    pub plot: PlotKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, plot: PlotKind, header: Vec<String>) -> Self {
        Self {
            name: name.into(),
            plot,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: impl IntoIterator<Item = f64>) {
        self.push(row.into_iter().map(format_value).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c].as_str()).collect())
    }

    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = format!("# {}\n", provenance.line(self.plot));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells"));
        out
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.header.join("\t"))?;
        for row in &self.rows {
            writeln!(f, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

/// Everything a study produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
}

impl StudyOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Write every table as CSV and, where it has a plot kind, an SVG next to
    /// it rendered from the written CSV. Returns the written paths in order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let mut written = Vec::new();
        for table in &self.tables {
            let path = dir.join(&table.name);
            let csv = table.to_csv(&self.provenance);
            std::fs::write(&path, &csv).map_err(|e| io_error(&path, e))?;
            written.push(path.clone());
            if table.plot != PlotKind::None {
                let svg = super::plot::render_csv(&csv)?;
                let svg_path = path.with_extension("svg");
                std::fs::write(&svg_path, svg).map_err(|e| io_error(&svg_path, e))?;
                written.push(svg_path);
            }
        }
        Ok(written)
    }
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provenance() -> Provenance {
        Provenance {
            version: "0.1.0".into(),
            config_hash: "ab".into(),
            seed: 7,
            backend: "knn".into(),
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("t.csv", PlotKind::Lines, vec!["size".into(), "mape".into()]);
        t.push_numbers([100.0, 2.5]);
        t.push(vec!["mean".into(), "x, y".into()]);
        assert_eq!(
            t.to_csv(&provenance()),
            "# seqdesign 0.1.0 config=ab seed=7 backend=knn plot=lines\nsize,mape\n100,2.5\nmean,\"x, y\"\n"
        );
        assert_eq!(t.column("mape").unwrap(), vec!["2.5", "x, y"]);
    }

    #[test]
    fn plot_kind_names_round_trip() {
        for k in [PlotKind::Prd, PlotKind::Lines, PlotKind::Histogram, PlotKind::None] {
            assert_eq!(PlotKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(PlotKind::parse("pie"), None);
    }
}
