//! Run configuration: one JSON or TOML document whose keys mirror the
//! command-line flags. Flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use omnisense::calibration::BinModel;
use omnisense::Design;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub design: Option<Design>,
    pub free: Option<PathBuf>,
    pub post: Option<PathBuf>,
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Gaussian noise standard deviation as a fraction of the model's global peak.
    pub noise: Option<f64>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub fan: FanConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub d_min: Option<f64>,
    pub d_max: Option<f64>,
    pub d_step: Option<f64>,
    pub arc_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanConfig {
    pub profile: Option<String>,
    pub half_angle: Option<f64>,
    pub rays: Option<usize>,
    pub source_height_mm: Option<f64>,
    pub receiver_height_mm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub bins: Option<usize>,
    pub bin_model: Option<BinModel>,
}

impl RunConfig {
    /// Reads a config file. `.toml` files are parsed as TOML, everything else
    /// as JSON. Relative paths inside are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.free, &mut cfg.post, &mut cfg.model, &mut cfg.out_dir].into_iter().flatten() {
            fix(p);
        }
        cfg.models.iter_mut().for_each(fix);
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// First of flag and config value, or an error naming the missing setting.
pub fn require<T>(flag: Option<T>, cfg: Option<T>, name: &str) -> Result<T> {
    match flag.or(cfg) {
        Some(v) => Ok(v),
        None => bail!("missing required setting `{name}` (flag or config)"),
    }
}

pub fn existing(path: PathBuf) -> Result<PathBuf> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(path)
}
