use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use renorm_core::{OrderType, Precision};
use serde::Deserialize;

use crate::Failure;

pub const PRECISION_ENV: &str = "RENORM_PRECISION";

/// Flat JSON config; keys mirror the long flag names (dashes become underscores).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "type")]
    pub order_type: Option<OrderType>,
    pub ell: Option<f64>,
    pub ells: Option<Vec<f64>>,
    pub degree: Option<usize>,
    pub tol: Option<f64>,
    pub precision: Option<String>,
    pub window: Option<usize>,
    pub out: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
    pub solutions_dir: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub re_min: Option<f64>,
    pub re_max: Option<f64>,
    pub im_min: Option<f64>,
    pub im_max: Option<f64>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub budget: Option<u32>,
    pub preimage_depth: Option<usize>,
    pub stats: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("bad config {}: {e}", path.display())))
    }
}

/// Flag, then environment, then config file, then `auto`.
pub fn resolve_precision(flag: Option<&str>, file: Option<&str>) -> Result<Precision, Failure> {
    if let Some(p) = flag {
        return p.parse().map_err(Failure::from);
    }
    if let Ok(v) = std::env::var(PRECISION_ENV) {
        return match v.trim() {
            "double" => Ok(Precision::Double),
            "dd" => Ok(Precision::DoubleDouble),
            other => Err(Failure::validation(format!("{PRECISION_ENV} must be double or dd, got {other:?}"))),
        };
    }
    match file {
        Some(p) => p.parse().map_err(Failure::from),
        None => Ok(Precision::Auto),
    }
}

pub fn check_tol(tol: f64) -> Result<f64, Failure> {
    if (1e-14..=1e-6).contains(&tol) {
        Ok(tol)
    } else {
        Err(Failure::validation(format!("tol must lie in [1e-14, 1e-6], got {tol:e}")))
    }
}

pub fn parse_ells(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::validation(format!("bad criticality {t:?} in {s:?}"))))
        .collect()
}

pub fn check_ells(ells: &[f64]) -> Result<(), Failure> {
    if ells.is_empty() {
        return Err(Failure::validation("empty criticality list"));
    }
    if let Some(bad) = ells.iter().find(|l| !(l.is_finite() && **l > 1.0)) {
        return Err(Failure::validation(format!("criticality must be > 1, got {bad}")));
    }
    if ells.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Failure::validation("criticalities must be strictly increasing"));
    }
    Ok(())
}

/// Fail early if `path` cannot be written. A file created by the probe is removed again.
pub fn check_writable(path: &Path) -> Result<(), Failure> {
    let existed = path.exists();
    if path.is_dir() {
        return Err(Failure::validation(format!("{} is a directory", path.display())));
    }
    OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())))?;
    if !existed {
        let _ = fs::remove_file(path);
    }
    Ok(())
}

pub fn check_dir_writable(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::validation(format!("cannot create {}: {e}", dir.display())))?;
    check_writable(&dir.join(".renorm-probe"))
}
