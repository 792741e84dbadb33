//! The `unioncut` command line. Results go to files or stdout as `key=value`
//! lines; progress goes straight to stderr, errors to the `err` sink.
//!
//! Exit codes: 0 success, 1 bad input, 2 internal failure. Output files are
//! staged and only written once a command has fully succeeded.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    self, align_to, corner_prior_success_rate, corunion, estimate_mce, judge_foreground,
    mask_metrics, should_stop, solve_inequality, union_coverage, MaskMetric, MceEstimate,
    MceOptions, MceSample, MetricsReport, WeakClassifier,
};
use crate::distill::{self, TrainConfig, TrainingSample};
use crate::ensemble::{union_cut_with, MeanShiftConfig, UnionCutConfig, UnionCutOutput};
use crate::error::{Error, Result};
use crate::tensor_io::{
    encode_heatmap, encode_mask, load_feature_grid, load_mask, BinaryMask, DatasetManifest,
    ManifestEntry,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "unioncut",
    version,
    about = "Foreground-union detection from ViT patch features"
)]
pub struct Cli {
    /// Worker threads; 0 uses every logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect the foreground union of one image or a whole manifest.
    Run(RunArgs),
    /// Train a per-patch head on cached features and UnionCut masks.
    Distill(DistillArgs),
    /// Apply a trained head to one feature grid.
    Predict(PredictArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Estimate voter behavior on a labeled manifest.
    Mce(MceArgs),
    /// Solve the background-dominance inequality for given a b c d.
    Solve(SolveArgs),
    /// Fraction of ground-truth unions that leave a corner free.
    CornerAudit(CornerAuditArgs),
    /// Judge discovered regions against a foreground union.
    Judge(JudgeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(
        long,
        conflicts_with = "manifest",
        required_unless_present = "manifest"
    )]
    pub features: Option<PathBuf>,
    /// Output mask (single image mode).
    #[arg(long, requires = "features")]
    pub out: Option<PathBuf>,
    /// Inverted heat map, bright where foreground (single image mode).
    #[arg(long, requires = "features")]
    pub heatmap: Option<PathBuf>,
    /// Raw vote counts (single image mode).
    #[arg(long, requires = "features")]
    pub aggregate: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory for `<id>.ucmk` and `<id>.ucht` (manifest mode).
    #[arg(long, requires = "manifest")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = crate::ensemble::DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of `<id>.ucmk` UnionCut masks; computed on the fly when absent.
    #[arg(long)]
    pub mask_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 600)]
    pub iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 3407)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::ensemble::DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-patch scores.
    #[arg(long)]
    pub soft: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of `<id>.ucmk` predictions.
    #[arg(long)]
    pub pred_dir: PathBuf,
    /// Directory of `<id>.ucmk` ground truth; defaults to the manifest's third column.
    #[arg(long)]
    pub gt_dir: Option<PathBuf>,
    #[arg(long, default_value = "iou")]
    pub metric: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9])]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct MceArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "uv")]
    pub classifier: String,
    #[arg(long)]
    pub subsample_seeds: Option<usize>,
    #[arg(long, default_value_t = 3407)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(allow_negative_numbers = true)]
    pub a: f64,
    #[arg(allow_negative_numbers = true)]
    pub b: f64,
    #[arg(allow_negative_numbers = true)]
    pub c: f64,
    #[arg(allow_negative_numbers = true)]
    pub d: f64,
}

#[derive(Debug, Args)]
pub struct CornerAuditArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Foreground union mask.
    #[arg(long)]
    pub union: PathBuf,
    /// Discovered region masks.
    #[arg(long, num_args = 1.., required = true)]
    pub candidates: Vec<PathBuf>,
    #[arg(long, default_value_t = analysis::DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_GAMMA)]
    pub gamma: f64,
}

/// Files a command wants to write, committed together at the end.
#[derive(Default)]
struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    fn commit(self) -> Result<()> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, bytes) in &self.files {
            if let Err(e) = std::fs::write(path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::file(path, e));
            }
            written.push(path.clone());
        }
        Ok(())
    }
}

struct Output {
    lines: Vec<String>,
    staged: Staged,
}

impl Output {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            staged: Staged::default(),
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "--{name} must be in [0, 1], got {v}"
        )))
    }
}

fn mean_shift(bandwidth: f64) -> Result<UnionCutConfig> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "--bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(UnionCutConfig {
        mean_shift: MeanShiftConfig {
            bandwidth,
            ..MeanShiftConfig::default()
        },
    })
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let m = DatasetManifest::load(path)?;
    if m.is_empty() {
        return Err(Error::Empty(format!(
            "manifest {} has no entries",
            path.display()
        )));
    }
    Ok(m)
}

fn gt_of(entry: &ManifestEntry) -> Result<BinaryMask> {
    let path = entry.gt_mask_path.as_ref().ok_or_else(|| {
        Error::InvalidArgument(format!("{} has no ground-truth mask", entry.image_id))
    })?;
    load_mask(path)
}

fn id_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.ucmk"))
}

fn cmd_run(args: &RunArgs) -> Result<Output> {
    let cfg = mean_shift(args.bandwidth)?;
    let mut out = Output::new();
    let report = |out: &mut Output, id: Option<&str>, r: &UnionCutOutput| {
        let prefix = id.map(|i| format!("{i}.")).unwrap_or_default();
        out.line(format!(
            "{prefix}union_patches={}",
            r.union_mask.count_ones()
        ));
        out.line(format!("{prefix}corner_inverted={}", r.corner_inverted));
    };
    if let Some(features) = &args.features {
        let grid = load_feature_grid(features)?;
        let r = union_cut_with(&grid, &cfg);
        if let Some(p) = &args.out {
            out.staged.add(p, encode_mask(&r.union_mask));
        }
        if let Some(p) = &args.heatmap {
            out.staged.add(p, encode_heatmap(&r.inverted));
        }
        if let Some(p) = &args.aggregate {
            out.staged.add(p, encode_heatmap(&r.aggregate));
        }
        report(&mut out, None, &r);
    } else {
        let manifest = load_manifest(args.manifest.as_deref().expect("clap requires one input"))?;
        let dir = args
            .out_dir
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("manifest mode needs --out-dir".into()))?;
        if !dir.is_dir() {
            return Err(Error::InvalidArgument(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
        for (k, e) in manifest.entries().iter().enumerate() {
            let grid = load_feature_grid(&e.feature_path)?;
            let r = union_cut_with(&grid, &cfg);
            eprintln!("[{}/{}] {}", k + 1, manifest.len(), e.image_id);
            out.staged
                .add(id_path(dir, &e.image_id), encode_mask(&r.union_mask));
            out.staged.add(
                dir.join(format!("{}.ucht", e.image_id)),
                encode_heatmap(&r.inverted),
            );
            report(&mut out, Some(&e.image_id), &r);
        }
    }
    Ok(out)
}

fn cmd_distill(args: &DistillArgs) -> Result<Output> {
    let cfg = TrainConfig {
        batch_size: args.batch_size,
        learning_rate: args.lr,
        iterations: args.iterations,
        seed: args.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let uc = mean_shift(args.bandwidth)?;
    let manifest = load_manifest(&args.manifest)?;
    let mut samples = Vec::with_capacity(manifest.len());
    for e in manifest.entries() {
        let grid = load_feature_grid(&e.feature_path)?;
        let union = match &args.mask_dir {
            Some(dir) => load_mask(id_path(dir, &e.image_id))?,
            None => union_cut_with(&grid, &uc).union_mask,
        };
        samples.push(TrainingSample { grid, union });
    }
    let log_every = cfg.decay_every;
    let outcome = distill::train_with_observer(&samples, &cfg, |iter, loss| {
        if iter % log_every == 0 || iter + 1 == cfg.iterations {
            eprintln!("iter {iter:>5} loss {loss:.6}");
        }
    })?;
    let mut out = Output::new();
    out.staged
        .add(&args.out, distill::encode_head(&outcome.head));
    out.line(format!("iterations={}", outcome.losses.len()));
    if let (Some(first), Some(last)) = (outcome.losses.first(), outcome.losses.last()) {
        out.line(format!("initial_loss={first:.6}"));
        out.line(format!("final_loss={last:.6}"));
    }
    Ok(out)
}

fn cmd_predict(args: &PredictArgs) -> Result<Output> {
    let head = distill::load_head(&args.head)?;
    let grid = load_feature_grid(&args.features)?;
    let (scores, mask) = distill::predict(&head, &grid)?;
    let mut out = Output::new();
    out.staged.add(&args.out, encode_mask(&mask));
    if let Some(p) = &args.soft {
        out.staged.add(p, encode_heatmap(&scores));
    }
    out.line(format!("foreground_patches={}", mask.count_ones()));
    Ok(out)
}

fn cmd_eval(args: &EvalArgs) -> Result<Output> {
    let metric: MaskMetric = args.metric.parse()?;
    for &t in &args.thresholds {
        check_probability("thresholds", t)?;
    }
    let manifest = load_manifest(&args.manifest)?;
    let mut preds = Vec::with_capacity(manifest.len());
    let mut gts = Vec::with_capacity(manifest.len());
    for e in manifest.entries() {
        let pred = load_mask(id_path(&args.pred_dir, &e.image_id))?;
        let gt = match &args.gt_dir {
            Some(dir) => load_mask(id_path(dir, &e.image_id))?,
            None => gt_of(e)?,
        };
        gts.push(align_to(&gt, pred.height(), pred.width())?);
        preds.push(pred);
    }
    let mut out = Output::new();
    for &t in &args.thresholds {
        let rate = corunion(&preds, &gts, metric, t)?;
        out.line(format!("corunion@{t:.2}={rate:.4}"));
    }
    let reports = preds
        .iter()
        .zip(&gts)
        .map(|(p, g)| mask_metrics(p, g, analysis::DEFAULT_F_BETA))
        .collect::<Result<Vec<MetricsReport>>>()?;
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    out.line(format!("images={}", reports.len()));
    out.line(format!("mean_accuracy={:.4}", mean(|r| r.accuracy)));
    out.line(format!("mean_iou={:.4}", mean(|r| r.iou)));
    out.line(format!("mean_precision={:.4}", mean(|r| r.precision)));
    out.line(format!("mean_recall={:.4}", mean(|r| r.recall)));
    out.line(format!("mean_max_f_beta={:.4}", mean(|r| r.max_f_beta)));
    Ok(out)
}

fn estimate_lines(out: &mut Output, e: &MceEstimate) {
    out.line(format!("a={:.4}", e.a));
    out.line(format!("b={:.4}", e.b));
    out.line(format!("c={:.4}", e.c));
    out.line(format!("d={:.4}", e.d));
    out.line(format!("images_used={}", e.images_used));
    out.line(format!("images_skipped={}", e.images_skipped));
    out.line(format!("seeds_used={}", e.seeds_used));
    out.line(format!("solution={}", solve_inequality(e)));
}

fn cmd_mce(args: &MceArgs) -> Result<Output> {
    let classifier: WeakClassifier = args.classifier.parse()?;
    if args.subsample_seeds == Some(0) {
        return Err(Error::InvalidArgument(
            "--subsample-seeds must be positive".into(),
        ));
    }
    let manifest = load_manifest(&args.manifest)?;
    let samples = manifest
        .entries()
        .iter()
        .map(|e| {
            let grid = load_feature_grid(&e.feature_path)?;
            let gt = align_to(&gt_of(e)?, grid.height(), grid.width())?;
            Ok(MceSample {
                image_id: e.image_id.clone(),
                grid,
                gt,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let est = estimate_mce(
        &samples,
        &MceOptions {
            classifier,
            subsample_seeds: args.subsample_seeds,
            seed: args.seed,
        },
    )?;
    let mut out = Output::new();
    estimate_lines(&mut out, &est);
    Ok(out)
}

fn cmd_solve(args: &SolveArgs) -> Result<Output> {
    let e = MceEstimate::from_values(args.a, args.b, args.c, args.d)?;
    let mut out = Output::new();
    out.line(solve_inequality(&e).to_string());
    Ok(out)
}

fn cmd_corner_audit(args: &CornerAuditArgs) -> Result<Output> {
    let manifest = load_manifest(&args.manifest)?;
    let gts = manifest
        .entries()
        .iter()
        .map(gt_of)
        .collect::<Result<Vec<_>>>()?;
    let mut out = Output::new();
    out.line(format!("images={}", gts.len()));
    out.line(format!(
        "success_rate={:.4}",
        corner_prior_success_rate(&gts)?
    ));
    Ok(out)
}

fn cmd_judge(args: &JudgeArgs) -> Result<Output> {
    check_probability("theta", args.theta)?;
    check_probability("gamma", args.gamma)?;
    let union = load_mask(&args.union)?;
    let mut out = Output::new();
    let mut kept = Vec::new();
    for (i, p) in args.candidates.iter().enumerate() {
        let m = load_mask(p)?;
        let fg = judge_foreground(&m, &union, args.theta)?;
        out.line(format!("candidate{i}.foreground={fg}"));
        if fg {
            kept.push(m);
        }
    }
    out.line(format!("coverage={:.4}", union_coverage(&kept, &union)?));
    out.line(format!("stop={}", should_stop(&kept, &union, args.gamma)?));
    Ok(out)
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Distill(a) => cmd_distill(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Mce(a) => cmd_mce(a),
        Command::Solve(a) => cmd_solve(a),
        Command::CornerAudit(a) => cmd_corner_audit(a),
        Command::Judge(a) => cmd_judge(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_INTERNAL;
        }
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| pool.install(|| dispatch(&cli))));
    match outcome {
        Ok(Ok(result)) => match result.staged.commit() {
            Ok(()) => {
                for l in result.lines {
                    let _ = writeln!(out, "{l}");
                }
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_INPUT
            }
        },
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
        Err(_) => {
            let _ = writeln!(err, "error: internal failure");
            EXIT_INTERNAL
        }
    }
}
