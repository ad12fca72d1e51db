//! Argument definitions and subcommand dispatch for the `ostf` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use ostf_core::daf::{self, ToyConfig};
use ostf_core::dataset::{compute_stats, validate_manifest, DatasetStats, Label, TamperingMethod};
use ostf_core::eval::{self, ClassScores, Distortion, EvalConfig, EvalMode, PerClass};
use ostf_core::jitter::JitterConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io;
use crate::runner;

/// Published totals over all nine sessions: images, tampered images, text
/// instances, tampered instances.
pub const REFERENCE_TOTALS: [u64; 4] = [4418, 1980, 64858, 5018];

#[derive(Debug, Parser, Serialize)]
#[command(name = "ostf", version, about = "Texture-jitter synthesis, open-set forensics evaluation and the DAF core")]
pub struct Cli {
    /// Global seed (jitter, DAF); overrides the seed in a jitter config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "OSTF_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, env = "OSTF_LOG_LEVEL", default_value = "info")]
    pub log_level: log::LevelFilter,
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Build a manifest from ICDAR-style ground-truth files.
    Import(ImportArgs),
    /// Synthesize texture-jittered training data.
    Jitter(JitterArgs),
    /// Score predictions against one test manifest.
    Eval(EvalArgs),
    /// Score the 9×9 cross-session matrix.
    Matrix(MatrixArgs),
    /// Image and instance counts per session.
    Stats(StatsArgs),
    /// Check a manifest for structural problems.
    Validate(ValidateArgs),
    /// Apply a robustness distortion to one image.
    Distort(DistortArgs),
    /// DAF head numerics.
    #[command(subcommand)]
    Daf(DafCommand),
}

#[derive(Debug, Args, Serialize)]
pub struct ImportArgs {
    /// Directory of `gt_*.txt` annotation files.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory holding the matching images.
    #[arg(long)]
    pub images: PathBuf,
    /// Manifest to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct JitterArgs {
    /// Input manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory the manifest's image paths are relative to.
    #[arg(long)]
    pub images: PathBuf,
    /// Output directory for images/, manifest.jsonl and recipes.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON jitter configuration; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Selection probability per eligible instance.
    #[arg(long)]
    pub prob: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Instance,
    Pixel,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum DistortArg {
    #[value(name = "none")]
    #[serde(rename = "none")]
    None,
    #[value(name = "jpeg75")]
    #[serde(rename = "jpeg75")]
    Jpeg75,
    #[value(name = "resize0.5")]
    #[serde(rename = "resize0.5")]
    ResizeHalf,
}

impl DistortArg {
    fn kind(self) -> Option<Distortion> {
        match self {
            DistortArg::None => None,
            DistortArg::Jpeg75 => Some(Distortion::Jpeg75),
            DistortArg::ResizeHalf => Some(Distortion::ResizeHalf),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum DistortOp {
    #[value(name = "jpeg75")]
    #[serde(rename = "jpeg75")]
    Jpeg75,
    #[value(name = "resize0.5")]
    #[serde(rename = "resize0.5")]
    ResizeHalf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoringArgs {
    #[arg(long, value_enum, default_value = "instance")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = eval::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    #[arg(long, default_value_t = eval::DEFAULT_SCORE_THRESHOLD)]
    pub score_threshold: f64,
    /// Distortion the predictions were made under; ground truth follows it.
    #[arg(long, value_enum, default_value = "none")]
    pub distort: DistortArg,
}

impl ScoringArgs {
    fn config(&self) -> Result<EvalConfig> {
        if !(0.0..=1.0).contains(&self.iou) || !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Usage("--iou and --score-threshold must lie in [0, 1]".into()));
        }
        Ok(EvalConfig {
            mode: match self.mode {
                ModeArg::Instance => EvalMode::Instance,
                ModeArg::Pixel => EvalMode::Pixel,
            },
            iou_threshold: self.iou,
            score_threshold: self.score_threshold,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Test manifest (JSON Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Prediction JSON Lines file.
    #[arg(long)]
    pub preds: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixArgs {
    /// Session registry JSON.
    #[arg(long)]
    pub sessions: PathBuf,
    /// Directory holding `{train}__{test}.jsonl` prediction files.
    #[arg(long)]
    pub preds: PathBuf,
    /// Directory for matrix.json and matrix.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Session registry JSON.
    #[arg(long)]
    pub sessions: PathBuf,
    /// Compare against the published counts; mismatches fail the run.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Manifest to check.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DistortArgs {
    /// Distortion to apply.
    #[arg(long, value_enum)]
    pub op: DistortOp,
    /// Input image.
    #[arg(long)]
    pub input: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub output: PathBuf,
    /// Manifest to rescale alongside (every record is transformed).
    #[arg(long, requires = "manifest_out")]
    pub manifest: Option<PathBuf>,
    /// Where to write the rescaled manifest.
    #[arg(long, requires = "manifest")]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "daf", rename_all = "kebab-case")]
pub enum DafCommand {
    /// Gradient check plus toy training on synthetic clusters.
    Demo(DemoArgs),
    /// Compare analytic and finite-difference gradients.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long, default_value_t = daf::DEFAULT_MARGIN)]
    pub margin: f64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
}

/// Result of one subcommand: machine output, its human rendering and the
/// exit status.
pub struct Outcome {
    pub json: Value,
    pub human: String,
    pub code: i32,
}

impl Outcome {
    fn ok(json: Value, human: String) -> Self {
        Self { json, human, code: 0 }
    }

    fn failing_if(mut self, failed: bool) -> Self {
        self.code = i32::from(failed);
        self
    }

    pub fn render(&self, pretty: bool) -> String {
        if pretty {
            self.human.clone()
        } else {
            self.json.to_string()
        }
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("output types serialize")
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    info!("resolved config: {}", to_value(cli));
    match &cli.command {
        Command::Import(a) => import(a),
        Command::Jitter(a) => jitter(a, cli),
        Command::Eval(a) => evaluate(a),
        Command::Matrix(a) => matrix(a, cli.threads),
        Command::Stats(a) => stats(a),
        Command::Validate(a) => validate(a),
        Command::Distort(a) => distort(a),
        Command::Daf(DafCommand::Demo(a)) => daf_demo(a, cli.seed.unwrap_or(0)),
        Command::Daf(DafCommand::GradCheck(a)) => grad_check(a, cli.seed.unwrap_or(0)),
    }
}

fn import(a: &ImportArgs) -> Result<Outcome> {
    require(&a.gt, "ground-truth directory")?;
    require(&a.images, "image directory")?;
    let (manifest, warnings) = io::import_icdar(&a.gt, &a.images)?;
    for w in &warnings {
        warn!("{}:{}: {}", w.file.display(), w.warning.line, w.warning.reason);
    }
    io::write_manifest(&a.out, &manifest)?;
    let instances: usize = manifest.records.iter().map(|r| r.instances.len()).sum();
    let json = json!({
        "records": manifest.records.len(),
        "instances": instances,
        "warnings": warnings.len(),
        "manifest": a.out,
    });
    let human = format!(
        "imported {} images, {instances} instances ({} malformed lines skipped) -> {}\n",
        manifest.records.len(),
        warnings.len(),
        a.out.display()
    );
    Ok(Outcome::ok(json, human))
}

fn jitter_config(a: &JitterArgs, seed: Option<u64>) -> Result<JitterConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            require(path, "config file")?;
            let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.clone(),
                line: 0,
                source,
            })?
        }
        None => JitterConfig::default(),
    };
    if let Some(p) = a.prob {
        cfg.selection_prob = p;
    }
    if let Some(s) = seed {
        cfg.global_seed = s;
    }
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(cfg)
}

fn jitter(a: &JitterArgs, cli: &Cli) -> Result<Outcome> {
    require(&a.manifest, "manifest")?;
    require(&a.images, "image directory")?;
    let cfg = jitter_config(a, cli.seed)?;
    info!("jitter config: {}", to_value(&cfg));
    let manifest = io::read_manifest(&a.manifest)?;
    let summary = runner::run_jitter(&manifest, &a.images, &a.out, &cfg, cli.threads)?;
    let human = format!(
        "images processed: {}/{}\ninstances jittered: {}\ninstances skipped: {}\nfailed images: {}\n",
        summary.processed,
        summary.images,
        summary.jittered,
        summary.skipped,
        summary.failed.len()
    );
    let failed = !summary.failed.is_empty();
    Ok(Outcome::ok(to_value(&summary), human).failing_if(failed))
}

fn scores_table(s: &PerClass<ClassScores>) -> String {
    let mut out = String::from("class        P       R       F       IoU\n");
    for label in Label::ALL {
        let c = s.get(label);
        let iou = c.iou.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let _ = writeln!(out, "{:<9} {:>7.2} {:>7.2} {:>7.2} {:>7}", label.as_str(), c.precision, c.recall, c.f1, iou);
    }
    out
}

fn evaluate(a: &EvalArgs) -> Result<Outcome> {
    require(&a.manifest, "manifest")?;
    require(&a.preds, "prediction file")?;
    let cfg = a.scoring.config()?;
    let manifest = io::read_manifest(&a.manifest)?;
    let preds = io::read_predictions(&a.preds)?;
    let known: std::collections::BTreeSet<&str> = manifest.records.iter().map(|r| r.image.as_str()).collect();
    for p in preds.iter().filter(|p| !known.contains(p.image.as_str())) {
        warn!("predictions for {} have no ground truth and are ignored", p.image);
    }
    let records = runner::ground_truth(&manifest.records, a.scoring.distort.kind())?;
    let scores = eval::evaluate(&records, &preds, &cfg)?;
    let json = json!({ "config": cfg, "images": records.len(), "scores": scores });
    Ok(Outcome::ok(json, scores_table(&scores)))
}

fn matrix(a: &MatrixArgs, threads: usize) -> Result<Outcome> {
    require(&a.sessions, "session registry")?;
    require(&a.preds, "prediction directory")?;
    let cfg = a.scoring.config()?;
    let sessions = io::read_sessions(&a.sessions)?;
    let m = runner::run_matrix(&sessions, &a.preds, &cfg, a.scoring.distort.kind(), threads)?;
    if let Some(out) = &a.out {
        let json = serde_json::to_vec_pretty(&m).expect("matrix serializes");
        io::write_bytes(&out.join("matrix.json"), &json)?;
        runner::write_matrix_csv(&out.join("matrix.csv"), &m)?;
    }
    let mut human = String::from("class        mP      mR      mF\n");
    for label in Label::ALL {
        let s = m.per_class.get(label);
        let _ = writeln!(human, "{:<9} {:>7.2} {:>7.2} {:>7.2}", label.as_str(), s.mp, s.mr, s.mf);
    }
    let _ = writeln!(human, "overall   {:>7.2} {:>7.2} {:>7.2}", m.overall.mp, m.overall.mr, m.overall.mf);
    let json = json!({ "config": cfg, "per_class": m.per_class, "overall": m.overall });
    Ok(Outcome::ok(json, human))
}

#[derive(Serialize)]
struct Mismatch {
    session: String,
    expected: DatasetStats,
    actual: DatasetStats,
}

fn stats(a: &StatsArgs) -> Result<Outcome> {
    require(&a.sessions, "session registry")?;
    let sessions = io::read_sessions(&a.sessions)?;
    let per_session: BTreeMap<String, DatasetStats> =
        sessions.iter().map(|s| (s.name.clone(), compute_stats(s))).collect();
    let total: DatasetStats = per_session.values().copied().sum();
    let totals = [
        total.total_images(),
        total.tampered_images(),
        total.total_instances(),
        total.tampered_instances(),
    ];

    let mut human = String::from("session              images  tampered  instances  tampered\n");
    for s in &sessions {
        let st = &per_session[&s.name];
        let _ = writeln!(
            human,
            "{:<18} {:>8} {:>9} {:>10} {:>9}",
            s.name,
            st.total_images(),
            st.tampered_images(),
            st.total_instances(),
            st.tampered_instances()
        );
    }
    let _ = writeln!(human, "{:<18} {:>8} {:>9} {:>10} {:>9}", "total", totals[0], totals[1], totals[2], totals[3]);

    let mut json = json!({
        "sessions": per_session,
        "totals": { "images": totals[0], "tampered_images": totals[1], "instances": totals[2], "tampered_instances": totals[3] },
    });
    let mut failed = false;
    if a.check {
        let mismatches: Vec<Mismatch> = sessions
            .iter()
            .filter_map(|s| {
                let expected = s.method.reference_stats();
                let actual = per_session[&s.name];
                (expected != actual).then(|| Mismatch {
                    session: s.name.clone(),
                    expected,
                    actual,
                })
            })
            .collect();
        let complete = sessions.len() == TamperingMethod::ALL.len();
        let totals_ok = !complete || totals == REFERENCE_TOTALS;
        failed = !mismatches.is_empty() || !totals_ok;
        for m in &mismatches {
            let _ = writeln!(human, "MISMATCH {}", m.session);
        }
        if !totals_ok {
            let _ = writeln!(human, "MISMATCH totals, expected {REFERENCE_TOTALS:?}");
        }
        let _ = writeln!(human, "check: {}", if failed { "FAIL" } else { "ok" });
        json["check"] = json!({
            "passed": !failed,
            "mismatches": mismatches,
            "totals_checked": complete,
            "totals_match": totals_ok,
        });
    }
    Ok(Outcome::ok(json, human).failing_if(failed))
}

fn validate(a: &ValidateArgs) -> Result<Outcome> {
    require(&a.manifest, "manifest")?;
    let manifest = io::read_manifest(&a.manifest)?;
    let report = validate_manifest(&manifest);
    let mut human = String::new();
    for f in &report.findings {
        let _ = writeln!(human, "{:?} {}: {:?}", f.severity, f.image, f.kind);
    }
    let _ = writeln!(human, "{} findings, {} records", report.findings.len(), manifest.records.len());
    let failed = report.has_errors();
    Ok(Outcome::ok(to_value(&report), human).failing_if(failed))
}

fn distort(a: &DistortArgs) -> Result<Outcome> {
    require(&a.input, "input image")?;
    let kind = match a.op {
        DistortOp::Jpeg75 => Distortion::Jpeg75,
        DistortOp::ResizeHalf => Distortion::ResizeHalf,
    };
    let img = io::read_image(&a.input)?;
    let out = eval::distort(&img, kind)?;
    io::write_png(&a.output, &out)?;
    if let (Some(src), Some(dst)) = (&a.manifest, &a.manifest_out) {
        require(src, "manifest")?;
        let mut m = io::read_manifest(src)?;
        m.records = runner::ground_truth(&m.records, Some(kind))?;
        io::write_manifest(dst, &m)?;
    }
    let json = json!({
        "op": kind,
        "input": { "path": a.input, "width": img.width(), "height": img.height() },
        "output": { "path": a.output, "width": out.width(), "height": out.height() },
    });
    let human = format!(
        "{}x{} -> {}x{} written to {}\n",
        img.width(),
        img.height(),
        out.width(),
        out.height(),
        a.output.display()
    );
    Ok(Outcome::ok(json, human))
}

fn grad_check_report(dim: usize, n: usize, seed: u64, epsilon: f64) -> Result<daf::GradCheckReport> {
    daf::random_grad_check(dim, n, seed, epsilon).map_err(|e| match e {
        ostf_core::Error::Parameter { .. } => Error::Usage(e.to_string()),
        other => other.into(),
    })
}

fn grad_check(a: &GradCheckArgs, seed: u64) -> Result<Outcome> {
    let r = grad_check_report(a.dim, a.n, seed, a.epsilon)?;
    let human = format!(
        "max relative error {:.3e} at {} (analytic {:.6e}, numeric {:.6e}) over {} parameters: {}\n",
        r.max_relative_error,
        r.worst_parameter,
        r.analytic,
        r.numeric,
        r.parameters,
        if r.passed { "PASS" } else { "FAIL" }
    );
    let failed = !r.passed;
    Ok(Outcome::ok(to_value(&r), human).failing_if(failed))
}

fn daf_demo(a: &DemoArgs, seed: u64) -> Result<Outcome> {
    let check = grad_check_report(8, 16, seed, 1e-6)?;
    let cfg = ToyConfig {
        dim: a.dim,
        n_per_class: a.n_per_class,
        separation: a.separation,
        margin: a.margin,
        steps: a.steps,
        learning_rate: a.lr,
        seed,
        ..ToyConfig::default()
    };
    let (_, toy) = daf::train_toy(&cfg)?;
    let human = format!(
        "grad check: max relative error {:.3e} ({})\ntoy training ({} steps, margin {}):\n  |K - authentic mean| = {:.4}\n  held-out accuracy    = {:.2}%\n  final loss           = {:.4} (cls {:.4}, feat {:.4})\n  hinge active         = {}\n",
        check.max_relative_error,
        if check.passed { "PASS" } else { "FAIL" },
        toy.steps,
        cfg.margin,
        toy.kernel_to_authentic_mean,
        100.0 * toy.held_out_accuracy,
        toy.final_loss.l_all,
        toy.final_loss.l_cls,
        toy.final_loss.l_feat,
        toy.hinge_active
    );
    let json = json!({ "grad_check": check, "toy_config": cfg, "toy": toy });
    Ok(Outcome::ok(json, human))
}
