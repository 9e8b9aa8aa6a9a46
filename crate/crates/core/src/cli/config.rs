//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the
//! [`TrainConfig`] field names plus a few run-level settings; unknown keys are
//! rejected so typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::{FuseMode, TrainConfig};

/// Everything a command may take from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// `None` means no noise.
    pub snr_db: Option<f64>,
    pub mode: FuseMode,
    /// Spatial tile edge for fusion; `None` runs the whole image at once.
    pub tile: Option<usize>,
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            snr_db: None,
            mode: FuseMode::Full,
            tile: None,
            trials: 1,
        }
    }
}

pub const KEYS: &[&str] = &[
    "r",
    "patch_size",
    "n_patches",
    "epochs",
    "batch_size",
    "noise_variance",
    "hidden_filters",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "seed",
    "scale_factor",
    "filter",
    "snr",
    "mode",
    "tile",
    "trials",
];

fn bad(key: &str, value: &str) -> Error {
    Error::Parse {
        what: "config",
        msg: format!("invalid value {value:?} for {key}"),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

/// Parses `none`/`inf` as no noise, otherwise a finite dB value.
pub fn parse_snr(value: &str) -> Result<Option<f64>> {
    match value.trim().to_ascii_lowercase().as_str() {
        "none" | "inf" | "infinity" => Ok(None),
        v => {
            let snr: f64 = num("snr", v)?;
            if snr.is_finite() {
                Ok(Some(snr))
            } else {
                Err(bad("snr", v))
            }
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.train;
        match key {
            "r" => t.r = num(key, value)?,
            "patch_size" => t.patch_size = num(key, value)?,
            "n_patches" => t.n_patches = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "noise_variance" => t.noise_variance = num(key, value)?,
            "hidden_filters" => {
                t.hidden_filters = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<Result<_>>()?;
            }
            "learning_rate" => t.adam.step_size = num(key, value)?,
            "beta1" => t.adam.beta1 = num(key, value)?,
            "beta2" => t.adam.beta2 = num(key, value)?,
            "epsilon" => t.adam.epsilon = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "scale_factor" => t.scale_factor = num(key, value)?,
            "filter" => t.filter = value.parse()?,
            "snr" => self.snr_db = parse_snr(value)?,
            "mode" => self.mode = value.parse()?,
            "tile" => self.tile = Some(num(key, value)?),
            "trials" => self.trials = num(key, value)?,
            other => {
                return Err(Error::Parse {
                    what: "config",
                    msg: format!("unknown key {other:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_pairs(text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Flat `key = value` rendering that [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let filters: Vec<String> = t.hidden_filters.iter().map(|f| f.to_string()).collect();
        let mut lines = vec![
            format!("r = {}", t.r),
            format!("patch_size = {}", t.patch_size),
            format!("n_patches = {}", t.n_patches),
            format!("epochs = {}", t.epochs),
            format!("batch_size = {}", t.batch_size),
            format!("noise_variance = {}", t.noise_variance),
            format!("hidden_filters = {}", filters.join(",")),
            format!("learning_rate = {}", t.adam.step_size),
            format!("beta1 = {}", t.adam.beta1),
            format!("beta2 = {}", t.adam.beta2),
            format!("epsilon = {}", t.adam.epsilon),
            format!("seed = {}", t.seed),
            format!("scale_factor = {}", t.scale_factor),
            format!("filter = {}", t.filter),
            format!(
                "snr = {}",
                self.snr_db.map_or("none".to_string(), |s| s.to_string())
            ),
            format!("mode = {}", self.mode),
            format!("trials = {}", self.trials),
        ];
        if let Some(tile) = self.tile {
            lines.push(format!("tile = {tile}"));
        }
        lines.join("\n") + "\n"
    }
}

/// Splits config text into ordered `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                what: "config",
                msg: format!("line {}: expected key = value", n + 1),
            });
        };
        let key = key.trim().to_string();
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse {
                what: "config",
                msg: format!("line {}: {key} set twice", n + 1),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::FilterKind;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\n\nr = 3\nfilter=nearest\nsnr = 25\nhidden_filters = 4, 8\ntile = 16\n",
        )
        .unwrap();
        assert_eq!(cfg.train.r, 3);
        assert_eq!(cfg.train.filter, FilterKind::Nearest);
        assert_eq!(cfg.snr_db, Some(25.0));
        assert_eq!(cfg.train.hidden_filters, vec![4, 8]);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("r 3").is_err());
        assert!(cfg.apply_text("r = three").is_err());
        assert!(cfg.apply_text("r = 2\nr = 3").is_err());
        assert!(cfg.apply_text("snr = nan").is_err());
        assert!(cfg.apply_text("mode = partial").is_err());
    }

    #[test]
    fn snr_sentinels() {
        assert_eq!(parse_snr("none").unwrap(), None);
        assert_eq!(parse_snr("INF").unwrap(), None);
        assert_eq!(parse_snr("20").unwrap(), Some(20.0));
    }

    #[test]
    fn every_key_is_accepted() {
        let defaults = RunConfig {
            tile: Some(8),
            ..RunConfig::default()
        };
        let pairs = parse_pairs(&defaults.to_text()).unwrap();
        for key in KEYS {
            assert!(pairs.contains_key(*key), "{key} missing from to_text");
        }
    }
}
