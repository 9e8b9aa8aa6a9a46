//! Command-line front end.
//!
//! Every command writes its outputs into `--out-dir` together with a
//! `<command>.manifest.json`. Exit codes: 0 success, 1 runtime failure,
//! 2 usage or configuration error (including missing input files).

pub mod config;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::cube::{encode_cube, read_cube, ImageCube};
use crate::error::Error;
use crate::experiment::{parse_settings, run_sweep, SweepKind, SweepSpec, TrialSpec};
use crate::linalg::pca_decompose;
use crate::metrics::{evaluate, MetricsReport};
use crate::pipeline::{
    fuse_tiled, prepare_training_set, seeded, streams, train_with_progress, TrainedModel,
};
use crate::simulate::{add_noise, make_wald_pair, synthetic_scene, SpectralResponse};

pub use config::RunConfig;
pub use manifest::{write_atomic, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingFile(_) | Error::Parse { .. } | Error::InvalidArgument(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "hsfusion",
    version,
    about = "Hyperspectral/multispectral fusion with a PCA-domain 3-D CNN"
)]
pub struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for outputs and manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the MS image and the low-resolution HS image from a reference.
    Simulate(SimulateArgs),
    /// Train the network on an MS/HS pair.
    Train(TrainArgs),
    /// Fuse an MS/HS pair with a trained model.
    Fuse(FuseArgs),
    /// Score an estimate against a reference.
    Evaluate(EvaluateArgs),
    /// Retrain and score over a range of settings.
    Sweep(SweepArgs),
    /// Render a sweep CSV as an SVG line plot.
    Plot(PlotArgs),
}

/// Training overrides shared by `train` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Number of leading loadings to sharpen.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub n_patches: Option<usize>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub noise_variance: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Comma-separated filter counts of the hidden layers.
    #[arg(long)]
    pub hidden_filters: Option<String>,
    /// MS/HS resolution ratio.
    #[arg(long)]
    pub factor: Option<usize>,
    /// bicubic, bilinear or nearest.
    #[arg(long)]
    pub filter: Option<String>,
}

impl TrainFlags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("r", self.r.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("n_patches", self.n_patches.map(|v| v.to_string()));
        push("patch_size", self.patch_size.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("noise_variance", self.noise_variance.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(|v| v.to_string()));
        push("hidden_filters", self.hidden_filters.clone());
        push("scale_factor", self.factor.map(|v| v.to_string()));
        push("filter", self.filter.clone());
        out
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Reference HS cube (HSC1).
    #[arg(long, required_unless_present = "synthetic")]
    pub reference: Option<PathBuf>,
    /// Generate a synthetic reference `ROWSxCOLSxBANDS` instead, saved as reference.hsc.
    #[arg(long, conflicts_with = "reference")]
    pub synthetic: Option<String>,
    /// Spectral rank of the synthetic reference.
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[command(flatten)]
    pub response: ResponseArgs,
    #[arg(long)]
    pub factor: Option<usize>,
    #[arg(long)]
    pub filter: Option<String>,
    /// SNR in dB of noise added to the low-resolution HS image, or `none`.
    #[arg(long)]
    pub snr: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ResponseArgs {
    /// Spectral response CSV (one row per MS band).
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Use a block-average response with this many MS bands instead of the
    /// default R, G, B, NIR response.
    #[arg(long, conflicts_with = "response")]
    pub ms_bands: Option<usize>,
}

impl ResponseArgs {
    fn load(&self, hs_bands: usize) -> crate::Result<SpectralResponse> {
        match (&self.response, self.ms_bands) {
            (Some(path), _) => SpectralResponse::read_csv(path),
            (None, Some(p)) => SpectralResponse::block_average(p, hs_bands),
            (None, None) => SpectralResponse::rgbn_default(hs_bands),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub ms: PathBuf,
    /// Observed (low-resolution) HS cube.
    #[arg(long)]
    pub hs: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ms: PathBuf,
    #[arg(long)]
    pub hs: PathBuf,
    /// full or reduced.
    #[arg(long)]
    pub mode: Option<String>,
    /// Run the network over tiles of this edge length.
    #[arg(long)]
    pub tile: Option<usize>,
    /// Output cube, default `<out-dir>/fused.hsc`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    /// High/low resolution pixel-size ratio used by ERGAS.
    #[arg(long, default_value_t = 0.25)]
    pub ratio: f64,
    /// Label for the method column.
    #[arg(long, default_value = "estimate")]
    pub method: String,
    /// Output CSV, default `<out-dir>/metrics.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// pcs, snr or filter.
    pub kind: String,
    /// Comma list or lo:hi:step; defaults to 2,6,10,15,20,25,30 / 10:30:5 /
    /// bicubic,bilinear,nearest.
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub response: ResponseArgs,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Noise for pcs/filter sweeps, or `none`.
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// ergas, sam_deg or ssim.
    #[arg(long, default_value = "ergas")]
    pub metric: String,
    /// Output SVG, default `<out-dir>/<input stem>_<metric>.svg`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

struct Ctx {
    out_dir: PathBuf,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn input(&mut self, path: &Path) -> crate::Result<ImageCube> {
        self.inputs.push(path.to_path_buf());
        read_cube(path)
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    fn set(&mut self, key: &str, value: Option<String>) -> CliResult<()> {
        if let Some(v) = value {
            self.config.set(key, &v)?;
        }
        Ok(())
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli, argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    let start = Instant::now();
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cli.out_dir.display())))?;
    let mut ctx = Ctx {
        out_dir: cli.out_dir.clone(),
        config,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    if let Some(path) = &cli.config {
        ctx.inputs.push(path.clone());
    }
    let name = match &cli.command {
        Command::Simulate(a) => {
            cmd_simulate(&mut ctx, a)?;
            "simulate"
        }
        Command::Train(a) => {
            cmd_train(&mut ctx, a)?;
            "train"
        }
        Command::Fuse(a) => {
            cmd_fuse(&mut ctx, a)?;
            "fuse"
        }
        Command::Evaluate(a) => {
            cmd_evaluate(&mut ctx, a)?;
            "evaluate"
        }
        Command::Sweep(a) => {
            cmd_sweep(&mut ctx, a)?;
            "sweep"
        }
        Command::Plot(a) => {
            cmd_plot(&mut ctx, a)?;
            "plot"
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        argv,
        config: ctx.config.to_text(),
        seed: ctx.config.train.seed,
        inputs: ctx.inputs,
        outputs: ctx.outputs,
        duration_secs: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    manifest.write(&cli.out_dir)?;
    Ok(())
}

fn parse_dims(spec: &str) -> CliResult<(usize, usize, usize)> {
    let parts: Vec<usize> = spec
        .split('x')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| {
            CliError::Usage(format!("--synthetic expects ROWSxCOLSxBANDS, got {spec:?}"))
        })?;
    match parts.as_slice() {
        &[r, c, b] => Ok((r, c, b)),
        _ => Err(CliError::Usage(format!(
            "--synthetic expects ROWSxCOLSxBANDS, got {spec:?}"
        ))),
    }
}

fn cmd_simulate(ctx: &mut Ctx, args: &SimulateArgs) -> CliResult<()> {
    ctx.set("scale_factor", args.factor.map(|v| v.to_string()))?;
    ctx.set("filter", args.filter.clone())?;
    ctx.set("snr", args.snr.clone())?;
    let reference = match (&args.reference, &args.synthetic) {
        (Some(path), _) => ctx.input(path)?,
        (None, Some(spec)) => {
            let (rows, cols, bands) = parse_dims(spec)?;
            let cube = synthetic_scene(rows, cols, bands, args.rank, ctx.config.train.seed)?;
            ctx.write(ctx.out_dir.join("reference.hsc"), &encode_cube(&cube))?;
            cube
        }
        (None, None) => {
            return Err(CliError::Usage(
                "--reference or --synthetic is required".into(),
            ))
        }
    };
    if let Some(path) = &args.response.response {
        ctx.inputs.push(path.clone());
    }
    let response = args.response.load(reference.bands())?;
    let cfg = &ctx.config.train;
    let pair = make_wald_pair(&reference, &response, cfg.scale_factor, cfg.filter)?;
    let noisy = match ctx.config.snr_db {
        Some(snr) => Some(add_noise(
            &pair.lr_hs,
            snr,
            &mut seeded(cfg.seed, streams::NOISE),
        )?),
        None => None,
    };
    let dir = ctx.out_dir.clone();
    ctx.write(dir.join("ms.hsc"), &encode_cube(&pair.ms))?;
    ctx.write(dir.join("lr_hs.hsc"), &encode_cube(&pair.lr_hs))?;
    if let Some(noisy) = noisy {
        ctx.write(dir.join("lr_hs_noisy.hsc"), &encode_cube(&noisy))?;
    }
    ctx.write(dir.join("response.csv"), response.to_csv().as_bytes())?;
    Ok(())
}

fn cmd_train(ctx: &mut Ctx, args: &TrainArgs) -> CliResult<()> {
    for (k, v) in args.flags.pairs() {
        ctx.config.set(k, &v)?;
    }
    let cfg = ctx.config.train.clone();
    cfg.validate()?;
    println!("{}", ctx.config.to_text().trim_end());
    let ms = ctx.input(&args.ms)?;
    let hs = ctx.input(&args.hs)?;
    let (set, _) = prepare_training_set(&ms, &hs, &cfg)?;
    let (network, loss_history) = train_with_progress(&set, &cfg, |epoch, loss| {
        eprintln!("epoch {:>4}/{}  loss {loss:.6e}", epoch + 1, cfg.epochs);
    })?;
    let model = TrainedModel {
        network,
        config: cfg,
        scale: set.scale,
        ms_bands: set.ms_bands,
        loss_history,
    };
    let mut csv = String::from("epoch,mean_loss\n");
    for (i, l) in model.loss_history.iter().enumerate() {
        let _ = writeln!(csv, "{},{l}", i + 1);
    }
    let dir = ctx.out_dir.clone();
    ctx.write(dir.join("model.hsfm"), &model.to_bytes())?;
    ctx.write(dir.join("loss.csv"), csv.as_bytes())?;
    Ok(())
}

fn cmd_fuse(ctx: &mut Ctx, args: &FuseArgs) -> CliResult<()> {
    ctx.set("mode", args.mode.clone())?;
    ctx.set("tile", args.tile.map(|v| v.to_string()))?;
    ctx.inputs.push(args.model.clone());
    let model = TrainedModel::load(&args.model)?;
    ctx.config.train = model.config.clone();
    let ms = ctx.input(&args.ms)?;
    let hs = ctx.input(&args.hs)?;
    let pca = pca_decompose(&hs)?;
    let out = fuse_tiled(&model, &ms, &hs, &pca, ctx.config.mode, ctx.config.tile)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join("fused.hsc"));
    ctx.write(path, &encode_cube(&out.fused))?;
    Ok(())
}

pub const EVALUATE_HEADER: &str = "method,ergas,sam_deg,ssim,ratio";

pub fn evaluate_row(report: &MetricsReport, method: &str, ratio: f64) -> String {
    report.csv_row(method, &[ratio.to_string()])
}

fn cmd_evaluate(ctx: &mut Ctx, args: &EvaluateArgs) -> CliResult<()> {
    if !(args.ratio > 0.0 && args.ratio.is_finite()) {
        return Err(CliError::Usage(format!(
            "--ratio must be positive, got {}",
            args.ratio
        )));
    }
    if args.method.contains(',') {
        return Err(CliError::Usage("--method may not contain commas".into()));
    }
    let reference = ctx.input(&args.reference)?;
    let estimate = ctx.input(&args.estimate)?;
    let report = evaluate(&reference, &estimate, args.ratio)?;
    let csv = format!(
        "{EVALUATE_HEADER}\n{}\n",
        evaluate_row(&report, &args.method, args.ratio)
    );
    print!("{csv}");
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join("metrics.csv"));
    ctx.write(path, csv.as_bytes())
}

pub fn default_sweep_values(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Pcs => "2,6,10,15,20,25,30",
        SweepKind::Snr => "10:30:5",
        SweepKind::Filter => "bicubic,bilinear,nearest",
    }
}

fn cmd_sweep(ctx: &mut Ctx, args: &SweepArgs) -> CliResult<()> {
    let kind: SweepKind = args.kind.parse()?;
    for (k, v) in args.flags.pairs() {
        ctx.config.set(k, &v)?;
    }
    ctx.set("trials", args.trials.map(|v| v.to_string()))?;
    ctx.set("snr", args.snr.clone())?;
    ctx.set("mode", args.mode.clone())?;
    let settings = parse_settings(
        kind,
        args.values.as_deref().unwrap_or(default_sweep_values(kind)),
    )?;
    ctx.config.train.validate()?;
    let reference = ctx.input(&args.reference)?;
    if let Some(path) = &args.response.response {
        ctx.inputs.push(path.clone());
    }
    let response = args.response.load(reference.bands())?;
    let spec = SweepSpec {
        settings,
        trials: ctx.config.trials,
        base: TrialSpec {
            config: ctx.config.train.clone(),
            snr_db: ctx.config.snr_db,
            mode: ctx.config.mode,
        },
    };
    let table = run_sweep(&reference, &response, kind, &spec, |row| {
        eprintln!(
            "{kind}={} trial {} seed {}: ergas {:.4} (interpolation {:.4})",
            row.setting,
            row.trial,
            row.outcome.seed,
            row.outcome.fused.ergas,
            row.outcome.baseline.ergas
        );
    })?;
    let path = ctx.out_dir.join(format!("sweep_{kind}.csv"));
    ctx.write(path, table.to_csv().as_bytes())
}

fn cmd_plot(ctx: &mut Ctx, args: &PlotArgs) -> CliResult<()> {
    ctx.inputs.push(args.input.clone());
    let csv = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let summary = plot::summarize(&csv, &args.metric)?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| ctx.out_dir.join(format!("{stem}_{}.svg", args.metric)));
    ctx.write(path, plot::render_svg(&summary, &args.metric).as_bytes())
}
