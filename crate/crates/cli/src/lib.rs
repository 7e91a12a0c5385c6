//! The `padeval` command line.
//!
//! [`run`] takes argv and two output sinks and returns the process exit code,
//! so the whole surface can be driven from tests without spawning processes.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 solver non-convergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use padeval::depth_variance::dv_score;
use padeval::fusion::fuse;
use padeval::ingest::{self, ReportConfig};
use padeval::metrics::{det_curve, evaluate_pad, evaluate_vuln, DetAxes, DetCurve};
use padeval::ocsvm::{self, OcsvmConfig, OcsvmError};
use padeval::synth::{self, ScenarioSpec, SurfaceKind, SynthDepthSpec, SynthFeatureSpec};
use padeval::{defaults, Label, Polarity, PresentationLabel, ScoreRecord, ScoreSet};
use rayon::prelude::*;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

const FUSION_NOTE: &str = "note: min-max normalization parameters are fitted on the scores \
                           being fused, i.e. on test-time statistics";

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

fn data_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Argument model
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "padeval",
    version,
    about = "Presentation attack detection: depth-variance and one-class SVM detectors, \
             score fusion, and ISO/IEC 30107-3 style evaluation"
)]
struct Cli {
    /// Seed for every random generator.
    #[arg(long, global = true, display_order = 900, default_value_t = 42)]
    seed: u64,
    /// Directory for output files (created if missing).
    #[arg(long, global = true, display_order = 900, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Output format where a command offers a choice.
    #[arg(long, global = true, display_order = 900, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolarityArg {
    HigherIsBonaFide,
    HigherIsMatch,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::HigherIsBonaFide => Polarity::HigherIsBonaFide,
            PolarityArg::HigherIsMatch => Polarity::HigherIsMatch,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Depth-variance score of one depth map.
    DvScore(DvScoreArgs),
    /// Depth-variance scores for every sample of a manifest.
    DvBatch(DvBatchArgs),
    /// Train a linear one-class SVM on bona fide feature vectors.
    OcsvmTrain(OcsvmTrainArgs),
    /// Score feature vectors with a trained one-class SVM.
    OcsvmScore(OcsvmScoreArgs),
    /// Min-max normalize two score files and combine them with fixed weights.
    Fuse(FuseArgs),
    /// PAD evaluation: D-EER, BPCER10, BPCER20 and a DET curve.
    EvalPad(EvalPadArgs),
    /// Vulnerability evaluation: thresholds at fixed FMR, FNMR and IAPMR.
    EvalVuln(EvalVulnArgs),
    /// Generate seeded synthetic data.
    SynthGen(SynthGenArgs),
}

#[derive(Debug, Args)]
struct DvScoreArgs {
    /// Depth map, binary 16-bit PGM.
    #[arg(long, value_name = "PGM")]
    depth: PathBuf,
    /// Landmarks CSV (index,x,y).
    #[arg(long, value_name = "CSV")]
    landmarks: PathBuf,
    /// Minimum number of landmarks with valid depth.
    #[arg(long, value_name = "N", default_value_t = defaults::MIN_VALID_LANDMARKS)]
    min_valid: usize,
}

#[derive(Debug, Args)]
struct DvBatchArgs {
    /// Manifest CSV (sample_id,label,depth,landmarks); paths are relative to
    /// the manifest.
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Minimum number of landmarks with valid depth.
    #[arg(long, value_name = "N", default_value_t = defaults::MIN_VALID_LANDMARKS)]
    min_valid: usize,
    /// Output score file [default: <output-dir>/dv_scores.csv, else stdout].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OcsvmTrainArgs {
    /// Bona fide training features (sample_id,f0,...).
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    /// Upper bound on the training outlier fraction, in (0, 1].
    #[arg(long, default_value_t = defaults::NU)]
    nu: f64,
    /// KKT tolerance.
    #[arg(long, default_value_t = defaults::OCSVM_TOL)]
    tol: f64,
    /// Solver iteration cap [default: 100 x training rows].
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,
    /// Use raw features instead of per-dimension unit-variance scaling.
    #[arg(long)]
    no_standardize: bool,
    /// Where to write the trained model (JSON).
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("labelling").required(true).args(["label", "labels"]))]
struct OcsvmScoreArgs {
    /// Trained model (JSON).
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Features to score (sample_id,f0,...).
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    /// One label for every row.
    #[arg(long, value_name = "LABEL")]
    label: Option<String>,
    /// Per-sample labels CSV (sample_id,label).
    #[arg(long, value_name = "CSV")]
    labels: Option<PathBuf>,
    /// Output score file [default: <output-dir>/ad_scores.csv, else stdout].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// First score file; the output follows its order.
    #[arg(long, value_name = "CSV")]
    a: PathBuf,
    /// Second score file.
    #[arg(long, value_name = "CSV")]
    b: PathBuf,
    /// Weight of the first detector.
    #[arg(long, default_value_t = defaults::FUSION_WEIGHT_A)]
    wa: f64,
    /// Weight of the second detector.
    #[arg(long, default_value_t = defaults::FUSION_WEIGHT_B)]
    wb: f64,
    /// Score polarity of both inputs.
    #[arg(long, value_enum, default_value_t = PolarityArg::HigherIsBonaFide)]
    polarity: PolarityArg,
    /// Output score file [default: <output-dir>/fused_scores.csv, else stdout].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("inputs").required(true).args(["scores", "bonafide"]))]
struct EvalPadArgs {
    /// Bona fide scores (higher = more bona fide).
    #[arg(long, value_name = "CSV", requires = "attack")]
    bonafide: Option<PathBuf>,
    /// Attack scores.
    #[arg(long, value_name = "CSV", requires = "bonafide")]
    attack: Option<PathBuf>,
    /// One score file holding both bona fide and attack rows.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["bonafide", "attack"])]
    scores: Option<PathBuf>,
    /// Report file [default: <output-dir>/pad_report.json].
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// DET curve file, CSV or SVG per --format [default: <output-dir>/pad_det.<format>].
    #[arg(long, value_name = "FILE")]
    det: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalVulnArgs {
    /// Mated comparison scores (higher = match).
    #[arg(long, value_name = "CSV")]
    mated: PathBuf,
    /// Non-mated comparison scores.
    #[arg(long, value_name = "CSV")]
    nonmated: PathBuf,
    /// Attack presentation comparison scores.
    #[arg(long, value_name = "CSV")]
    attack: PathBuf,
    /// Target FMR of an operating point; repeatable.
    #[arg(long = "fmr", value_name = "RATE", default_values_t = [0.001, 0.01])]
    fmr: Vec<f64>,
    /// Report file [default: <output-dir>/vuln_report.json].
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// DET curve of mated against non-mated trials, CSV or SVG per --format
    /// [default: <output-dir>/vuln_det.<format>].
    #[arg(long, value_name = "FILE")]
    det: Option<PathBuf>,
    /// DET curve with the attack trials in place of the mated ones
    /// [default: <output-dir>/vuln_attack_det.<format>].
    #[arg(long, value_name = "FILE")]
    attack_det: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthGenArgs {
    #[command(subcommand)]
    what: SynthWhat,
}

#[derive(Debug, Subcommand)]
enum SynthWhat {
    /// One depth map (depth.pgm) and its landmark template (landmarks.csv).
    Depth(SynthDepthArgs),
    /// Gaussian feature clusters (features.csv, labels.csv).
    Features(SynthFeatureArgs),
    /// A full evaluation population for both detectors.
    Scenario(SynthScenarioArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SurfaceArg {
    CurvedFace,
    PlanarShirt,
    WrinkledShirt,
}

impl From<SurfaceArg> for SurfaceKind {
    fn from(s: SurfaceArg) -> Self {
        match s {
            SurfaceArg::CurvedFace => SurfaceKind::CurvedFace,
            SurfaceArg::PlanarShirt => SurfaceKind::PlanarShirt,
            SurfaceArg::WrinkledShirt => SurfaceKind::WrinkledShirt,
        }
    }
}

#[derive(Debug, Args)]
struct SynthDepthArgs {
    /// Surface to render.
    #[arg(long, value_enum, default_value_t = SurfaceArg::CurvedFace)]
    kind: SurfaceArg,
    /// Image width in pixels.
    #[arg(long, default_value_t = 96)]
    width: usize,
    /// Image height in pixels.
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Distance of the base plane in millimetres.
    #[arg(long, default_value_t = 600.0)]
    base_depth: f64,
    /// Face relief in millimetres (curved-face).
    #[arg(long, default_value_t = 20.0)]
    curvature: f64,
    /// Wrinkle amplitude in millimetres (wrinkled-shirt).
    #[arg(long, default_value_t = 3.0)]
    wrinkle_amp: f64,
    /// Wrinkle wavelength in pixels (wrinkled-shirt).
    #[arg(long, default_value_t = 24.0)]
    wavelength: f64,
    /// Gaussian depth noise in millimetres.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Fraction of pixels without depth.
    #[arg(long, default_value_t = 0.0)]
    invalid_fraction: f64,
}

#[derive(Debug, Args)]
struct SynthFeatureArgs {
    /// Number of bona fide samples.
    #[arg(long, default_value_t = 500)]
    n_bonafide: usize,
    /// Number of attack samples.
    #[arg(long, default_value_t = 500)]
    n_attack: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Distance between cluster means in within-cluster standard deviations.
    #[arg(long, default_value_t = 8.0)]
    separation: f64,
    /// Distance of the bona fide mean from the origin.
    #[arg(long, default_value_t = 16.0)]
    offset: f64,
}

#[derive(Debug, Args)]
struct SynthScenarioArgs {
    /// Number of bona fide samples.
    #[arg(long, default_value_t = 500)]
    n_bonafide: usize,
    /// Number of attack samples.
    #[arg(long, default_value_t = 500)]
    n_attack: usize,
    /// Extra bona fide feature rows for training the anomaly detector.
    #[arg(long, default_value_t = 300)]
    n_train: usize,
    /// Image width in pixels.
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Image height in pixels.
    #[arg(long, default_value_t = 80)]
    height: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Feature cluster separation in within-cluster standard deviations.
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    /// Gaussian depth noise in millimetres.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Fraction of pixels without depth.
    #[arg(long, default_value_t = 0.02)]
    invalid_fraction: f64,
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Runs one command line. `argv[0]` is the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ctx = Ctx {
        output_dir: cli.output_dir.clone(),
        format: cli.format,
        seed: cli.seed,
    };
    match &cli.command {
        Command::DvScore(a) => cmd_dv_score(&ctx, a, out),
        Command::DvBatch(a) => cmd_dv_batch(&ctx, a, out),
        Command::OcsvmTrain(a) => cmd_ocsvm_train(&ctx, a, out),
        Command::OcsvmScore(a) => cmd_ocsvm_score(&ctx, a, out),
        Command::Fuse(a) => cmd_fuse(&ctx, a, out, err),
        Command::EvalPad(a) => cmd_eval_pad(&ctx, a, out),
        Command::EvalVuln(a) => cmd_eval_vuln(&ctx, a, out),
        Command::SynthGen(a) => cmd_synth(&ctx, a, out),
    }
}

struct Ctx {
    output_dir: Option<PathBuf>,
    format: Option<Format>,
    seed: u64,
}

impl Ctx {
    /// Rejects `--format` values a command cannot produce.
    fn format(&self, command: &str, allowed: &[Format], default: Format) -> Result<Format> {
        match self.format {
            None => Ok(default),
            Some(f) if allowed.contains(&f) => Ok(f),
            Some(f) => Err(CliError::Usage(format!(
                "--format {} is not supported by {command} (allowed: {})",
                f.name(),
                allowed
                    .iter()
                    .map(|f| f.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
        }
    }

    fn in_output_dir(&self, name: &str) -> Option<PathBuf> {
        self.output_dir.as_ref().map(|d| d.join(name))
    }

    fn require_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| data_err(path.display(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| data_err(parent.display(), e))?;
    }
    fs::write(path, bytes).map_err(|e| data_err(path.display(), e))
}

/// Writes to `path` when given, otherwise to stdout.
fn emit(path: Option<PathBuf>, bytes: &[u8], out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_file(&p, bytes),
        None => out
            .write_all(bytes)
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn read_scores(path: &Path, polarity: Polarity) -> Result<ScoreSet> {
    ingest::parse_scores(&read(path)?, polarity).map_err(|e| data_err(path.display(), e))
}

fn check_positive(flag: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{flag} must be a positive number, got {v}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Depth variance
// ---------------------------------------------------------------------------

fn cmd_dv_score(ctx: &Ctx, a: &DvScoreArgs, out: &mut dyn Write) -> Result<()> {
    let format = ctx.format("dv-score", &[Format::Csv, Format::Json], Format::Csv)?;
    let map =
        ingest::parse_depth_pgm(&read(&a.depth)?).map_err(|e| data_err(a.depth.display(), e))?;
    let lms = ingest::parse_landmarks(&read(&a.landmarks)?)
        .map_err(|e| data_err(a.landmarks.display(), e))?;
    let s = dv_score(&map, &lms, a.min_valid).map_err(|e| data_err(a.depth.display(), e))?;
    let text = match format {
        Format::Json => format!(
            "{}\n",
            serde_json::json!({ "dv_score": s.value, "n_valid": s.n_valid })
        ),
        _ => format!(
            "dv_score,n_valid\n{},{}\n",
            ingest::format_f64(s.value),
            s.n_valid
        ),
    };
    emit(None, text.as_bytes(), out)
}

fn cmd_dv_batch(ctx: &Ctx, a: &DvBatchArgs, out: &mut dyn Write) -> Result<()> {
    ctx.format("dv-batch", &[Format::Csv], Format::Csv)?;
    let entries = ingest::parse_manifest(&read(&a.manifest)?)
        .map_err(|e| data_err(a.manifest.display(), e))?;
    let base = a.manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let records = entries
        .par_iter()
        .map(|e| {
            let depth = base.join(&e.depth);
            let lm = base.join(&e.landmarks);
            let map = ingest::parse_depth_pgm(&read(&depth)?)
                .map_err(|err| data_err(depth.display(), err))?;
            let lms =
                ingest::parse_landmarks(&read(&lm)?).map_err(|err| data_err(lm.display(), err))?;
            let s = dv_score(&map, &lms, a.min_valid)
                .map_err(|err| data_err(format!("sample {:?}", e.sample_id), err))?;
            Ok(ScoreRecord::new(e.sample_id.clone(), e.label, s.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = ScoreSet::new(records, Polarity::HigherIsBonaFide)
        .map_err(|e| data_err(a.manifest.display(), e))?;
    let bytes = ingest::write_scores(&set).map_err(|e| data_err("dv-batch", e))?;
    emit(
        a.out.clone().or_else(|| ctx.in_output_dir("dv_scores.csv")),
        &bytes,
        out,
    )
}

// ---------------------------------------------------------------------------
// One-class SVM
// ---------------------------------------------------------------------------

fn cmd_ocsvm_train(ctx: &Ctx, a: &OcsvmTrainArgs, out: &mut dyn Write) -> Result<()> {
    ctx.format("ocsvm-train", &[Format::Json], Format::Json)?;
    if !(a.nu > 0.0 && a.nu <= 1.0) {
        return Err(CliError::Usage(format!(
            "--nu must be in (0, 1], got {}",
            a.nu
        )));
    }
    check_positive("--tol", a.tol)?;
    if a.max_iter == Some(0) {
        return Err(CliError::Usage("--max-iter must be positive".into()));
    }
    let x = ingest::parse_features(&read(&a.features)?)
        .map_err(|e| data_err(a.features.display(), e))?;
    let cfg = OcsvmConfig {
        nu: a.nu,
        tol: a.tol,
        max_iter: a.max_iter,
        standardize: !a.no_standardize,
    };
    let model = ocsvm::fit(&x, &cfg).map_err(|e| match e {
        OcsvmError::NotConverged { .. } => {
            CliError::NotConverged(format!("{}: {e}", a.features.display()))
        }
        other => data_err(a.features.display(), other),
    })?;
    let bytes = ingest::write_model(&model).map_err(|e| data_err(a.model.display(), e))?;
    write_file(&a.model, &bytes)?;
    let d = &model.diagnostics;
    say(
        out,
        format_args!(
            "trained on {} rows, d = {}: {} iterations, KKT residual {:e}, {} support vectors, {} at bound",
            x.n_rows(),
            x.dim(),
            d.iterations,
            d.kkt_residual,
            d.n_support,
            d.n_margin_errors
        ),
    )
}

fn cmd_ocsvm_score(ctx: &Ctx, a: &OcsvmScoreArgs, out: &mut dyn Write) -> Result<()> {
    ctx.format("ocsvm-score", &[Format::Csv], Format::Csv)?;
    let model =
        ingest::parse_model(&read(&a.model)?).map_err(|e| data_err(a.model.display(), e))?;
    let x = ingest::parse_features(&read(&a.features)?)
        .map_err(|e| data_err(a.features.display(), e))?;
    let labels: Vec<Label> = match (&a.label, &a.labels) {
        (Some(l), _) => {
            let l: Label = l
                .parse()
                .map_err(|e| CliError::Usage(format!("--label: {e}")))?;
            vec![l; x.n_rows()]
        }
        (None, Some(path)) => {
            let table =
                ingest::parse_labels(&read(path)?).map_err(|e| data_err(path.display(), e))?;
            let by_id: std::collections::HashMap<&str, Label> =
                table.iter().map(|(id, l)| (id.as_str(), *l)).collect();
            x.sample_ids()
                .iter()
                .map(|id| {
                    by_id.get(id.as_str()).copied().ok_or_else(|| {
                        data_err(path.display(), format!("no label for sample {id:?}"))
                    })
                })
                .collect::<Result<_>>()?
        }
        (None, None) => unreachable!("clap requires --label or --labels"),
    };
    let set =
        ocsvm::score_matrix(&model, &x, &labels).map_err(|e| data_err(a.features.display(), e))?;
    let bytes = ingest::write_scores(&set).map_err(|e| data_err("ocsvm-score", e))?;
    emit(
        a.out.clone().or_else(|| ctx.in_output_dir("ad_scores.csv")),
        &bytes,
        out,
    )
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

fn cmd_fuse(ctx: &Ctx, a: &FuseArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    ctx.format("fuse", &[Format::Csv], Format::Csv)?;
    let polarity = a.polarity.into();
    let sa = read_scores(&a.a, polarity)?;
    let sb = read_scores(&a.b, polarity)?;
    let fused = fuse(&sa, &sb, a.wa, a.wb).map_err(|e| {
        let flags = format!("--a {} --b {}", a.a.display(), a.b.display());
        match e {
            padeval::fusion::FusionError::WeightError(..) => {
                CliError::Usage(format!("--wa/--wb: {e}"))
            }
            _ => data_err(flags, e),
        }
    })?;
    let _ = writeln!(err, "{FUSION_NOTE}");
    let bytes = ingest::write_scores(&fused).map_err(|e| data_err("fuse", e))?;
    emit(
        a.out
            .clone()
            .or_else(|| ctx.in_output_dir("fused_scores.csv")),
        &bytes,
        out,
    )
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn write_det(path: Option<PathBuf>, curve: &DetCurve, format: Format, title: &str) -> Result<()> {
    let Some(path) = path else {
        return Ok(());
    };
    let bytes = match format {
        Format::Svg => ingest::write_det_svg(curve, title),
        _ => ingest::write_det_csv(curve).map_err(|e| data_err(path.display(), e))?,
    };
    write_file(&path, &bytes)
}

fn cmd_eval_pad(ctx: &Ctx, a: &EvalPadArgs, out: &mut dyn Write) -> Result<()> {
    let det_format = ctx.format("eval-pad", &[Format::Csv, Format::Svg], Format::Csv)?;
    let p = Polarity::HigherIsBonaFide;
    let (bona, attack, source) = match (&a.scores, &a.bonafide, &a.attack) {
        (Some(path), _, _) => {
            let all = read_scores(path, p)?;
            if let Some(r) = all
                .records
                .iter()
                .find(|r| r.label != Label::BONA_FIDE && r.label != Label::ATTACK)
            {
                return Err(data_err(
                    path.display(),
                    format!(
                        "sample {:?} has label {}, expected bonafide or attack",
                        r.sample_id, r.label
                    ),
                ));
            }
            (
                all.filter_label(Label::BONA_FIDE),
                all.filter_label(Label::ATTACK),
                path.display().to_string(),
            )
        }
        (None, Some(b), Some(at)) => (
            read_scores(b, p)?,
            read_scores(at, p)?,
            format!("--bonafide {} --attack {}", b.display(), at.display()),
        ),
        _ => unreachable!("clap enforces the input flags"),
    };
    let report = evaluate_pad(&bona, &attack).map_err(|e| data_err(&source, e))?;
    let curve = det_curve(
        &bona.scores_with(Label::BONA_FIDE),
        &attack.scores_with(Label::ATTACK),
        DetAxes::ApcerBpcer,
    )
    .map_err(|e| data_err(&source, e))?;
    let cfg = ReportConfig::with_defaults(p);
    if let Some(path) = a
        .report
        .clone()
        .or_else(|| ctx.in_output_dir("pad_report.json"))
    {
        let bytes = ingest::write_pad_report(&report, &cfg, None)
            .map_err(|e| data_err(path.display(), e))?;
        write_file(&path, &bytes)?;
    }
    let det_path = a
        .det
        .clone()
        .or_else(|| ctx.in_output_dir(&format!("pad_det.{}", det_format.name())));
    write_det(det_path, &curve, det_format, "PAD DET curve")?;
    for line in ingest::pad_summary(&report) {
        say(out, line)?;
    }
    Ok(())
}

fn cmd_eval_vuln(ctx: &Ctx, a: &EvalVulnArgs, out: &mut dyn Write) -> Result<()> {
    let det_format = ctx.format("eval-vuln", &[Format::Csv, Format::Svg], Format::Csv)?;
    for &t in &a.fmr {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Usage(format!("--fmr must be in (0, 1), got {t}")));
        }
    }
    let p = Polarity::HigherIsMatch;
    let mated = read_scores(&a.mated, p)?;
    let nonmated = read_scores(&a.nonmated, p)?;
    let attack = read_scores(&a.attack, p)?;
    let report = evaluate_vuln(&mated, &nonmated, &attack, &a.fmr).map_err(|e| {
        data_err(
            format!(
                "--mated {} --nonmated {} --attack {}",
                a.mated.display(),
                a.nonmated.display(),
                a.attack.display()
            ),
            e,
        )
    })?;
    let curve = det_curve(
        &mated.scores_with(Label::MATED),
        &nonmated.scores_with(Label::NON_MATED),
        DetAxes::FmrFnmr,
    )
    .map_err(|e| data_err(a.mated.display(), e))?;
    let cfg = ReportConfig::with_defaults(p);
    if let Some(path) = a
        .report
        .clone()
        .or_else(|| ctx.in_output_dir("vuln_report.json"))
    {
        let bytes =
            ingest::write_vuln_report(&report, &cfg).map_err(|e| data_err(path.display(), e))?;
        write_file(&path, &bytes)?;
    }
    let det_path = a
        .det
        .clone()
        .or_else(|| ctx.in_output_dir(&format!("vuln_det.{}", det_format.name())));
    write_det(det_path, &curve, det_format, "Recognition DET curve")?;
    // Attack trials are plotted as a kind of mated comparison.
    let attack_curve = det_curve(
        &attack.scores_with(Label::ATTACK_MATED),
        &nonmated.scores_with(Label::NON_MATED),
        DetAxes::FmrFnmr,
    )
    .map_err(|e| data_err(a.attack.display(), e))?;
    let attack_det_path = a
        .attack_det
        .clone()
        .or_else(|| ctx.in_output_dir(&format!("vuln_attack_det.{}", det_format.name())));
    write_det(
        attack_det_path,
        &attack_curve,
        det_format,
        "Attack DET curve",
    )?;
    for line in ingest::vuln_summary(&report) {
        say(out, line)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

fn cmd_synth(ctx: &Ctx, a: &SynthGenArgs, out: &mut dyn Write) -> Result<()> {
    ctx.format("synth-gen", &[Format::Csv], Format::Csv)?;
    let dir = ctx.require_output_dir();
    let spec_err = |e: synth::SpecError| CliError::Usage(e.to_string());
    let mut written: Vec<PathBuf> = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    let fmt_err = |e: ingest::IngestError| CliError::Data(format!("synth-gen: {e}"));
    match &a.what {
        SynthWhat::Depth(d) => {
            let spec = SynthDepthSpec {
                kind: d.kind.into(),
                width: d.width,
                height: d.height,
                base_depth_mm: d.base_depth,
                curvature_amp_mm: d.curvature,
                wrinkle_amp_mm: d.wrinkle_amp,
                wrinkle_wavelength_px: d.wavelength,
                noise_sigma_mm: d.noise,
                invalid_fraction: d.invalid_fraction,
                seed: ctx.seed,
            };
            let (map, lms) = synth::gen_depth(&spec).map_err(spec_err)?;
            put("depth.pgm", &ingest::write_depth_pgm(&map))?;
            put(
                "landmarks.csv",
                &ingest::write_landmarks(&lms).map_err(fmt_err)?,
            )?;
        }
        SynthWhat::Features(f) => {
            let spec = SynthFeatureSpec {
                n_bonafide: f.n_bonafide,
                n_attack: f.n_attack,
                d: f.dim,
                mean_separation: f.separation,
                bonafide_offset: f.offset,
                seed: ctx.seed,
            };
            let (x, labels) = synth::gen_features(&spec).map_err(spec_err)?;
            put(
                "features.csv",
                &ingest::write_features(&x).map_err(fmt_err)?,
            )?;
            put(
                "labels.csv",
                &labels_csv(x.sample_ids(), &labels).map_err(fmt_err)?,
            )?;
        }
        SynthWhat::Scenario(s) => {
            let spec = ScenarioSpec {
                n_bonafide: s.n_bonafide,
                n_attack: s.n_attack,
                n_train: s.n_train,
                width: s.width,
                height: s.height,
                d: s.dim,
                mean_separation: s.separation,
                noise_sigma_mm: s.noise,
                invalid_fraction: s.invalid_fraction,
                seed: ctx.seed,
                ..ScenarioSpec::default()
            };
            let sc = synth::gen_scenario(&spec).map_err(spec_err)?;
            let mut manifest = Vec::with_capacity(sc.depth.len());
            for sample in &sc.depth {
                let depth = PathBuf::from("depth").join(format!("{}.pgm", sample.sample_id));
                let lm = PathBuf::from("landmarks").join(format!("{}.csv", sample.sample_id));
                put(
                    &depth.to_string_lossy(),
                    &ingest::write_depth_pgm(&sample.depth),
                )?;
                put(
                    &lm.to_string_lossy(),
                    &ingest::write_landmarks(&sample.landmarks).map_err(fmt_err)?,
                )?;
                manifest.push(ingest::ManifestEntry {
                    sample_id: sample.sample_id.clone(),
                    label: Label::Presentation(sample.label),
                    depth,
                    landmarks: lm,
                });
            }
            put(
                "manifest.csv",
                &ingest::write_manifest(&manifest).map_err(fmt_err)?,
            )?;
            put(
                "train_features.csv",
                &ingest::write_features(&sc.train).map_err(fmt_err)?,
            )?;
            put(
                "eval_features.csv",
                &ingest::write_features(&sc.eval).map_err(fmt_err)?,
            )?;
            put(
                "eval_labels.csv",
                &labels_csv(sc.eval.sample_ids(), &sc.eval_labels).map_err(fmt_err)?,
            )?;
        }
    }
    let n = written.len();
    let shown = written
        .iter()
        .take(8)
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>();
    say(
        out,
        format_args!(
            "wrote {n} files: {}{}",
            shown.join(", "),
            if n > 8 { ", ..." } else { "" }
        ),
    )
}

fn labels_csv(
    ids: &[String],
    labels: &[PresentationLabel],
) -> std::result::Result<Vec<u8>, ingest::IngestError> {
    let rows: Vec<(String, Label)> = ids
        .iter()
        .zip(labels)
        .map(|(id, &l)| (id.clone(), Label::Presentation(l)))
        .collect();
    ingest::write_labels(&rows)
}
