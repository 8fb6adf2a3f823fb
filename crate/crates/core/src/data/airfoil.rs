//! Selig-format airfoil coordinates and fixed-dimension resampling.
//!
//! A Selig trace runs trailing edge → upper surface → leading edge → lower
//! surface → trailing edge. Resampling splits it at the minimum-x point and
//! evaluates each surface at cosine-spaced chord stations, storing `(x, y)`
//! per station: upper surface leading edge to trailing edge, then lower.

use std::f64::consts::PI;
use std::path::Path;

use super::{DataError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AirfoilCoordinates {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl AirfoilCoordinates {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(DataError::Geometry(format!(
                "`{}` has {} points, need at least 4",
                self.name,
                self.points.len()
            )));
        }
        for &(x, y) in &self.points {
            if !x.is_finite() || !y.is_finite() {
                return Err(DataError::Geometry(format!(
                    "`{}` has a non-finite coordinate",
                    self.name
                )));
            }
            if !(-0.05..=1.05).contains(&x) {
                return Err(DataError::Geometry(format!(
                    "`{}` has x = {x} outside the chord range [-0.05, 1.05]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Parse a Selig `.dat` file body: a name line, then `x y` pairs.
pub fn parse_selig(text: &str) -> Result<AirfoilCoordinates> {
    let mut lines = text.lines();
    let name = lines
        .next()
        .map(|l| l.trim().to_string())
        .ok_or_else(|| DataError::Geometry("empty airfoil file".into()))?;
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some([x, y]) => points.push((*x, *y)),
            _ => {
                return Err(DataError::Parse {
                    row: i + 1,
                    column: "x y".into(),
                    message: format!("expected two numbers, got `{line}`"),
                })
            }
        }
    }
    Ok(AirfoilCoordinates { name, points })
}

pub fn read_selig(path: impl AsRef<Path>) -> Result<AirfoilCoordinates> {
    parse_selig(&std::fs::read_to_string(path)?)
}

/// Cosine-spaced stations on [0, 1], clustered at both ends.
fn cosine_stations(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (PI * k as f64 / (n - 1) as f64).cos()))
        .collect()
}

fn check_monotone(surface: &[(f64, f64)], label: &str, name: &str) -> Result<()> {
    if surface.len() < 2 {
        return Err(DataError::Geometry(format!(
            "`{name}` {label} surface has fewer than 2 points"
        )));
    }
    if surface.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(DataError::Geometry(format!(
            "`{name}` {label} surface is not monotone in x"
        )));
    }
    if surface.last().unwrap().0 <= surface[0].0 {
        return Err(DataError::Geometry(format!(
            "`{name}` {label} surface has zero chord extent"
        )));
    }
    Ok(())
}

/// Piecewise-linear y(x) on a surface ordered by non-decreasing x; held
/// constant beyond the ends.
fn interpolate(surface: &[(f64, f64)], x: f64) -> f64 {
    let (x0, y0) = surface[0];
    let (xn, yn) = surface[surface.len() - 1];
    if x <= x0 {
        return y0;
    }
    if x >= xn {
        return yn;
    }
    let i = surface.partition_point(|p| p.0 <= x);
    let (xa, ya) = surface[i - 1];
    let (xb, yb) = surface[i];
    if xb == xa {
        return yb;
    }
    ya + (yb - ya) * (x - xa) / (xb - xa)
}

/// Flatten an airfoil into a vector of length `4 * points_per_surface`.
pub fn resample_airfoil(airfoil: &AirfoilCoordinates, points_per_surface: usize) -> Result<Vec<f64>> {
    if points_per_surface < 2 {
        return Err(DataError::Argument(format!(
            "points_per_surface must be at least 2, got {points_per_surface}"
        )));
    }
    airfoil.validate()?;
    let pts = &airfoil.points;
    let le = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .expect("validated non-empty");
    let mut upper: Vec<(f64, f64)> = pts[..=le].to_vec();
    upper.reverse();
    let lower: Vec<(f64, f64)> = pts[le..].to_vec();
    check_monotone(&upper, "upper", &airfoil.name)?;
    check_monotone(&lower, "lower", &airfoil.name)?;

    let stations = cosine_stations(points_per_surface);
    let mut out = Vec::with_capacity(4 * points_per_surface);
    for surface in [&upper, &lower] {
        for &x in &stations {
            out.push(x);
            out.push(interpolate(surface, x));
        }
    }
    Ok(out)
}
