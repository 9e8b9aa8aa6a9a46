//! Reduced-resolution trials: simulate the observed pair from a reference,
//! fuse, and score both the fusion and the plain interpolation baseline.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::cube::ImageCube;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport};
use crate::pipeline::{fit, fuse, seeded, streams, FuseMode, TrainConfig};
use crate::resample::{interpolate, FilterKind};
use crate::simulate::{add_noise, make_wald_pair, SpectralResponse};

#[derive(Debug, Clone)]
pub struct TrialSpec {
    /// Training settings; `config.filter` is used for the simulated
    /// decimation as well as inside the pipeline.
    pub config: TrainConfig,
    /// SNR of the noise added to the low-resolution HS image, `None` for none.
    pub snr_db: Option<f64>,
    pub mode: FuseMode,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub fused: MetricsReport,
    pub baseline: MetricsReport,
    pub loss_history: Vec<f64>,
}

/// Upsamples the observed HS image with the same kernel, ignoring the MS image.
pub fn interpolation_baseline(
    lr_hs: &ImageCube,
    factor: usize,
    filter: FilterKind,
) -> Result<ImageCube> {
    interpolate(lr_hs, factor, filter)
}

pub fn run_trial(
    reference: &ImageCube,
    response: &SpectralResponse,
    spec: &TrialSpec,
) -> Result<TrialOutcome> {
    let cfg = &spec.config;
    let f = cfg.scale_factor;
    let pair = make_wald_pair(reference, response, f, cfg.filter)?;
    let lr_hs = match spec.snr_db {
        Some(snr) => add_noise(&pair.lr_hs, snr, &mut seeded(cfg.seed, streams::NOISE))?,
        None => pair.lr_hs,
    };
    let (model, pca) = fit(&pair.ms, &lr_hs, cfg)?;
    let out = fuse(&model, &pair.ms, &lr_hs, &pca, spec.mode)?;
    let ratio = 1.0 / f as f64;
    let baseline = interpolation_baseline(&lr_hs, f, cfg.filter)?;
    Ok(TrialOutcome {
        seed: cfg.seed,
        fused: evaluate(reference, &out.fused, ratio)?,
        baseline: evaluate(reference, &baseline, ratio)?,
        loss_history: out.loss_history,
    })
}

/// Which setting a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Number of sharpened loadings `r`.
    Pcs,
    /// SNR of the noise added to the low-resolution HS image.
    Snr,
    /// Resampling kernel, used for simulation and inside the pipeline.
    Filter,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcs" => Ok(SweepKind::Pcs),
            "snr" => Ok(SweepKind::Snr),
            "filter" => Ok(SweepKind::Filter),
            other => Err(Error::Parse {
                what: "sweep kind",
                msg: format!("{other:?}, expected pcs, snr or filter"),
            }),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Pcs => "pcs",
            SweepKind::Snr => "snr",
            SweepKind::Filter => "filter",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Pcs(usize),
    Snr(f64),
    Filter(FilterKind),
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Pcs(r) => write!(f, "{r}"),
            Setting::Snr(s) => write!(f, "{s}"),
            Setting::Filter(k) => write!(f, "{k}"),
        }
    }
}

fn sweep_err(msg: String) -> Error {
    Error::Parse {
        what: "sweep values",
        msg,
    }
}

/// Parses a comma list (`"2,6,10"`) or an inclusive range (`"10:30:5"`).
pub fn parse_numbers(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(sweep_err(format!("range {spec:?} must be lo:hi:step")));
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| sweep_err(format!("{s:?} is not a number")))
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
            return Err(sweep_err(format!(
                "range {spec:?} needs lo <= hi and step > 0"
            )));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| lo + i as f64 * step).collect());
    }
    let values: Vec<f64> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| sweep_err(format!("{s:?} is not a number")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(sweep_err(format!("{spec:?}")));
    }
    Ok(values)
}

pub fn parse_settings(kind: SweepKind, spec: &str) -> Result<Vec<Setting>> {
    match kind {
        SweepKind::Filter => spec
            .split(',')
            .map(|s| s.parse().map(Setting::Filter))
            .collect(),
        SweepKind::Snr => Ok(parse_numbers(spec)?.into_iter().map(Setting::Snr).collect()),
        SweepKind::Pcs => parse_numbers(spec)?
            .into_iter()
            .map(|v| {
                if v >= 1.0 && v.fract() == 0.0 {
                    Ok(Setting::Pcs(v as usize))
                } else {
                    Err(sweep_err(format!("{v} is not a positive component count")))
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub settings: Vec<Setting>,
    pub trials: usize,
    /// Starting point for every trial; trial `t` uses seed `base.config.seed + t`.
    pub base: TrialSpec,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub setting: Setting,
    pub trial: usize,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

pub fn trial_spec(base: &TrialSpec, setting: Setting, trial: usize) -> TrialSpec {
    let mut spec = base.clone();
    spec.config.seed = base.config.seed.wrapping_add(trial as u64);
    match setting {
        Setting::Pcs(r) => spec.config.r = r,
        Setting::Snr(s) => spec.snr_db = Some(s),
        Setting::Filter(k) => spec.config.filter = k,
    }
    spec
}

/// Retrains and evaluates once per `(setting, trial)`, in setting order.
pub fn run_sweep(
    reference: &ImageCube,
    response: &SpectralResponse,
    kind: SweepKind,
    spec: &SweepSpec,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<SweepTable> {
    if spec.trials == 0 || spec.settings.is_empty() {
        return Err(Error::InvalidArgument(
            "a sweep needs at least one setting and one trial".into(),
        ));
    }
    let mut rows = Vec::with_capacity(spec.settings.len() * spec.trials);
    for &setting in &spec.settings {
        for trial in 0..spec.trials {
            let outcome = run_trial(reference, response, &trial_spec(&spec.base, setting, trial))?;
            let row = SweepRow {
                setting,
                trial,
                outcome,
            };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(SweepTable { kind, rows })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl SweepTable {
    pub const CSV_HEADER: &'static str =
        "kind,setting,trial,seed,ergas,sam_deg,ssim,baseline_ergas,baseline_sam_deg,baseline_ssim";

    /// Per-trial rows followed by `mean` and `std` (sample) rows per setting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (f, b) = (&r.outcome.fused, &r.outcome.baseline);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.kind,
                r.setting,
                r.trial,
                r.outcome.seed,
                f.ergas,
                f.sam,
                f.ssim,
                b.ergas,
                b.sam,
                b.ssim
            ));
        }
        let mut settings: Vec<Setting> = Vec::new();
        for r in &self.rows {
            if !settings.contains(&r.setting) {
                settings.push(r.setting);
            }
        }
        for s in settings {
            let group: Vec<&SweepRow> = self.rows.iter().filter(|r| r.setting == s).collect();
            let col = |f: &dyn Fn(&TrialOutcome) -> f64| {
                mean_std(&group.iter().map(|r| f(&r.outcome)).collect::<Vec<_>>())
            };
            let stats = [
                col(&|o| o.fused.ergas),
                col(&|o| o.fused.sam),
                col(&|o| o.fused.ssim),
                col(&|o| o.baseline.ergas),
                col(&|o| o.baseline.sam),
                col(&|o| o.baseline.ssim),
            ];
            for (label, pick) in [("mean", 0), ("std", 1)] {
                out.push_str(&format!("{},{s},{label},", self.kind));
                for v in &stats {
                    out.push(',');
                    out.push_str(&(if pick == 0 { v.0 } else { v.1 }).to_string());
                }
                out.push('\n');
            }
        }
        out
    }

    /// Mean fused ERGAS per setting, in order of first appearance.
    pub fn mean_ergas(&self) -> Vec<(Setting, f64, f64)> {
        let mut out: Vec<(Setting, Vec<f64>, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(s, ..)| *s == r.setting) {
                Some((_, f, b)) => {
                    f.push(r.outcome.fused.ergas);
                    b.push(r.outcome.baseline.ergas);
                }
                None => out.push((
                    r.setting,
                    vec![r.outcome.fused.ergas],
                    vec![r.outcome.baseline.ergas],
                )),
            }
        }
        out.into_iter()
            .map(|(s, f, b)| (s, mean_std(&f).0, mean_std(&b).0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::synthetic_scene;

    #[test]
    fn trial_is_deterministic() {
        let reference = synthetic_scene(32, 32, 6, 2, 4).unwrap();
        let resp = SpectralResponse::block_average(2, 6).unwrap();
        let spec = TrialSpec {
            config: TrainConfig {
                r: 2,
                n_patches: 20,
                epochs: 1,
                hidden_filters: vec![3, 3],
                ..TrainConfig::default()
            },
            snr_db: Some(25.0),
            mode: FuseMode::Reduced,
        };
        let a = run_trial(&reference, &resp, &spec).unwrap();
        let b = run_trial(&reference, &resp, &spec).unwrap();
        assert_eq!(a.fused, b.fused);
        assert_eq!(a.baseline, b.baseline);
        assert!(a.baseline.ergas > 0.0);
    }

    #[test]
    fn sweep_grammar() {
        assert_eq!(
            parse_numbers("10:30:5").unwrap(),
            vec![10.0, 15.0, 20.0, 25.0, 30.0]
        );
        assert_eq!(parse_numbers("2, 6,10").unwrap(), vec![2.0, 6.0, 10.0]);
        assert_eq!(parse_numbers("0:1:0.25").unwrap().len(), 5);
        for bad in ["", "1,,2", "a", "1:2", "5:1:1", "1:5:0", "1:2:3:4", "nan"] {
            assert!(parse_numbers(bad).is_err(), "{bad}");
        }
        assert_eq!(
            parse_settings(SweepKind::Filter, "bicubic,nearest").unwrap(),
            vec![
                Setting::Filter(FilterKind::Bicubic),
                Setting::Filter(FilterKind::Nearest)
            ]
        );
        assert!(parse_settings(SweepKind::Pcs, "2,2.5").is_err());
        assert!(parse_settings(SweepKind::Pcs, "0").is_err());
        assert_eq!(
            parse_settings(SweepKind::Pcs, "2:6:2").unwrap(),
            vec![Setting::Pcs(2), Setting::Pcs(4), Setting::Pcs(6)]
        );
        assert!("volume".parse::<SweepKind>().is_err());
    }

    #[test]
    fn sweep_rows_and_summary() {
        let reference = synthetic_scene(32, 32, 6, 2, 4).unwrap();
        let resp = SpectralResponse::block_average(2, 6).unwrap();
        let base = TrialSpec {
            config: TrainConfig {
                r: 2,
                n_patches: 10,
                epochs: 1,
                hidden_filters: vec![2, 2],
                seed: 5,
                ..TrainConfig::default()
            },
            snr_db: None,
            mode: FuseMode::Full,
        };
        let spec = SweepSpec {
            settings: parse_settings(SweepKind::Pcs, "1,2").unwrap(),
            trials: 2,
            base,
        };
        let mut seen = 0;
        let table = run_sweep(&reference, &resp, SweepKind::Pcs, &spec, |_| seen += 1).unwrap();
        assert_eq!(seen, 4);
        assert_eq!(
            table
                .rows
                .iter()
                .map(|r| r.outcome.seed)
                .collect::<Vec<_>>(),
            vec![5, 6, 5, 6]
        );
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 4 + 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 10));
        assert!(lines[5].starts_with("pcs,1,mean,,"));
        assert_eq!(table.mean_ergas().len(), 2);
    }
}
