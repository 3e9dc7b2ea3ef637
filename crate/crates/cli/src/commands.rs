//! Subcommand implementations. Each builds its effective configuration
//! as defaults, then values from --config JSON, then explicit flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use mtc_core::baseline::{self, BaselineConfig};
use mtc_core::clip::{Clip, PreprocessConfig};
use mtc_core::model::{self, ModelConfig};
use mtc_core::recommend::{self, PlaybackStyle};
use mtc_core::retrieval::{self, FeatureStore, Metric};
use mtc_core::synth::{Background, MotionType, SynthConfig};
use mtc_core::trainer::{self, TrainConfig};

use crate::dataset;
use crate::formats::{self, CheckpointMeta};

/// Invalid command-line input, distinct from runtime failure so main
/// can map it to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

/// Load a command's JSON config section, or defaults when absent.
fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))
                .map_err(|e| usage(format!("{e:#}")))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn parse_background(s: &str) -> Result<Background> {
    match s {
        "plain" => Ok(Background::Plain),
        "textured-noise" => Ok(Background::TexturedNoise),
        _ => Err(usage(format!("unknown background {s:?}"))),
    }
}

fn parse_metric(s: &str) -> Result<Metric> {
    match s {
        "l2" => Ok(Metric::L2),
        "cosine" => Ok(Metric::Cosine),
        _ => Err(usage(format!("unknown metric {s:?}"))),
    }
}

fn parse_style(s: &str) -> Result<PlaybackStyle> {
    PlaybackStyle::from_name(s).ok_or_else(|| usage(format!("unknown style {s:?}")))
}

fn require_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

// ---------------------------------------------------------------- synthgen

#[derive(Args)]
pub struct SynthgenArgs {
    /// Output dataset directory (train/ val/ test/ created inside)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub clips_per_class: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub sprite_radius: Option<usize>,
    /// plain | textured-noise
    #[arg(long)]
    pub background: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_frac: Option<f64>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    #[arg(long)]
    pub test_frac: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SynthgenFile {
    clips_per_class: Option<usize>,
    height: Option<usize>,
    width: Option<usize>,
    frames: Option<usize>,
    sprite_radius: Option<usize>,
    background: Option<String>,
    seed: Option<u64>,
    train_frac: Option<f64>,
    val_frac: Option<f64>,
    test_frac: Option<f64>,
}

pub fn synthgen(args: SynthgenArgs) -> Result<()> {
    let file: SynthgenFile = load_config(args.config.as_deref())?;
    let d = SynthConfig::default();
    let background = match args.background.or(file.background) {
        Some(s) => parse_background(&s)?,
        None => d.background,
    };
    let cfg = SynthConfig {
        clips_per_class: pick(args.clips_per_class, file.clips_per_class, d.clips_per_class),
        height: pick(args.height, file.height, d.height),
        width: pick(args.width, file.width, d.width),
        t_total: pick(args.frames, file.frames, d.t_total),
        sprite_radius: pick(args.sprite_radius, file.sprite_radius, d.sprite_radius),
        background,
        master_seed: pick(args.seed, file.seed, d.master_seed),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let fractions = (
        pick(args.train_frac, file.train_frac, 2.0 / 3.0),
        pick(args.val_frac, file.val_frac, 1.0 / 6.0),
        pick(args.test_frac, file.test_frac, 1.0 / 6.0),
    );
    if args.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let counts = dataset::write_dataset(&cfg, fractions, &args.out, args.threads)?;
    println!(
        "{}",
        serde_json::json!({"train": counts[0], "val": counts[1], "test": counts[2]})
    );
    Ok(())
}

// ------------------------------------------------------------------- train

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory holding train/ and val/ splits
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path to write (MTCK + JSON sidecar)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train the flow-statistics baseline instead of the segment model
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Comma-separated epochs after which the learning rate halves
    #[arg(long)]
    pub halve_epochs: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional per-epoch metrics CSV
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    segments: Option<usize>,
    lr: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    halve_epochs: Option<Vec<usize>>,
    seed: Option<u64>,
}

fn parse_halve_epochs(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("bad halve epoch {part:?}")))
        })
        .collect()
}

pub fn train(args: TrainArgs) -> Result<()> {
    let file: TrainFile = load_config(args.config.as_deref())?;
    require_exists(&args.data, "dataset directory")?;
    let segments = pick(args.segments, file.segments, ModelConfig::default().segments);
    if segments == 0 {
        return Err(usage("--segments must be at least 1"));
    }
    let train_split = dataset::load_labeled_dir(&args.data.join("train"))?;
    let val_split = dataset::load_labeled_dir(&args.data.join("val"))?;
    let seed = pick(args.seed, file.seed, 0);

    if args.baseline {
        let d = BaselineConfig::default();
        let cfg = BaselineConfig {
            epochs: pick(args.epochs, file.epochs, d.epochs),
            lr: pick(args.lr, file.lr, d.lr),
            ..d
        };
        let params = baseline::train_baseline(&train_split, &cfg, seed)?;
        let mut correct = 0usize;
        for lc in &val_split {
            let (pred, _) = baseline::predict_baseline(&lc.clip, &params, &cfg)?;
            if pred == lc.label {
                correct += 1;
            }
        }
        formats::save_baseline(&params, &cfg, &args.out)?;
        println!(
            "{}",
            serde_json::json!({
                "kind": "baseline",
                "val_accuracy": correct as f64 / val_split.len() as f64,
            })
        );
        return Ok(());
    }

    let model_cfg = ModelConfig { segments, ..ModelConfig::default() };
    let td = TrainConfig::default();
    let halve_epochs = match args.halve_epochs.as_deref() {
        Some(s) => parse_halve_epochs(s)?,
        None => file.halve_epochs.unwrap_or(td.halve_epochs),
    };
    let train_cfg = TrainConfig {
        base_lr: pick(args.lr, file.lr, td.base_lr),
        halve_epochs,
        total_epochs: pick(args.epochs, file.epochs, td.total_epochs),
        momentum: pick(args.momentum, file.momentum, td.momentum),
        weight_decay: pick(args.weight_decay, file.weight_decay, td.weight_decay),
        batch_size: pick(args.batch_size, file.batch_size, td.batch_size),
        seed,
    };
    train_cfg.validate().map_err(|e| usage(e.to_string()))?;
    let pre_train = PreprocessConfig::train(model_cfg.input_size);
    let pre_eval = PreprocessConfig::eval(model_cfg.input_size);
    let (params, metrics) =
        trainer::train(&model_cfg, &train_split, &val_split, &train_cfg, &pre_train, &pre_eval)?;
    formats::save_model(&params, &model_cfg, &args.out)?;
    if let Some(path) = &args.metrics {
        let mut csv = String::from("epoch,lr,train_loss,train_acc,val_acc\n");
        for e in &metrics.epochs {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.lr, e.train_loss, e.train_acc, e.val_acc
            ));
        }
        formats::write_atomic(path, csv.as_bytes())?;
    }
    println!(
        "{}",
        serde_json::json!({
            "kind": "segment",
            "segments": segments,
            "best_epoch": metrics.best_epoch,
            "best_val_acc": metrics.best_val_acc,
        })
    );
    Ok(())
}

// -------------------------------------------------------------------- eval

#[derive(Args)]
pub struct EvalArgs {
    /// Labeled split directory (contains labels.csv)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    require_exists(&args.model, "checkpoint")?;
    require_exists(&args.data, "split directory")?;
    let split = dataset::load_labeled_dir(&args.data)?;
    match formats::load_meta(&args.model)? {
        CheckpointMeta::Segment { .. } => {
            let (params, cfg) = formats::load_model(&args.model)?;
            let pre = PreprocessConfig::eval(cfg.input_size);
            let (acc, confusion) = trainer::evaluate(&params, &split, &cfg, &pre)?;
            println!(
                "{}",
                serde_json::json!({"accuracy": acc, "confusion": confusion})
            );
        }
        CheckpointMeta::Baseline { .. } => {
            let (params, cfg) = formats::load_baseline(&args.model)?;
            let n = model::NUM_CLASSES;
            let mut confusion = vec![vec![0usize; n]; n];
            for lc in &split {
                let (pred, _) = baseline::predict_baseline(&lc.clip, &params, &cfg)?;
                confusion[lc.label.code() as usize][pred.code() as usize] += 1;
            }
            let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
            println!(
                "{}",
                serde_json::json!({
                    "accuracy": correct as f64 / split.len() as f64,
                    "confusion": confusion,
                })
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- classify

#[derive(Args)]
pub struct ClassifyArgs {
    /// Clip path: MTC1 file or a directory of PNG/PGM frames
    #[arg(long)]
    pub clip: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

pub fn classify(args: ClassifyArgs) -> Result<()> {
    require_exists(&args.model, "checkpoint")?;
    require_exists(&args.clip, "clip")?;
    let clip = formats::load_clip(&args.clip)?;
    let (motion, probs) = match formats::load_meta(&args.model)? {
        CheckpointMeta::Segment { .. } => {
            let (params, cfg) = formats::load_model(&args.model)?;
            let pre = PreprocessConfig::eval(cfg.input_size);
            model::predict(&clip, &params, &cfg, &pre)?
        }
        CheckpointMeta::Baseline { .. } => {
            let (params, cfg) = formats::load_baseline(&args.model)?;
            baseline::predict_baseline(&clip, &params, &cfg)?
        }
    };
    let probs: serde_json::Map<String, serde_json::Value> = mtc_core::synth::ALL_MOTION_TYPES
        .iter()
        .zip(probs.data())
        .map(|(m, &p)| (m.name().to_string(), serde_json::json!(p)))
        .collect();
    println!("{}", serde_json::json!({"motion": motion.name(), "probs": probs}));
    Ok(())
}

// -------------------------------------------------------- extract-features

#[derive(Args)]
pub struct ExtractFeaturesArgs {
    /// Labeled split directory (labels.csv) or a directory of bare clips
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output MTFS feature store
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

pub fn extract_features(args: ExtractFeaturesArgs) -> Result<()> {
    require_exists(&args.model, "checkpoint")?;
    require_exists(&args.data, "data directory")?;
    if args.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let (params, cfg) = formats::load_model(&args.model)?;
    let pre = PreprocessConfig::eval(cfg.input_size);
    let clips: Vec<(Clip, Option<MotionType>)> = if args.data.join("labels.csv").exists() {
        dataset::load_labeled_dir(&args.data)?
            .into_iter()
            .map(|lc| (lc.clip, Some(lc.label)))
            .collect()
    } else {
        let mut paths: Vec<PathBuf> = fs::read_dir(&args.data)
            .with_context(|| format!("cannot list {}", args.data.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map_or(false, |x| x == "mtc1") || p.is_dir())
            .collect();
        paths.sort();
        let mut clips = Vec::with_capacity(paths.len());
        for p in paths {
            clips.push((formats::load_clip(&p)?, None));
        }
        clips
    };
    let store = if args.threads == 1 {
        retrieval::extract_features(&clips, &params, &cfg, &pre)?
    } else {
        let chunk = clips.len().div_ceil(args.threads);
        let mut partials: Vec<FeatureStore> = Vec::new();
        std::thread::scope(|s| -> Result<()> {
            let mut handles = Vec::new();
            for part in clips.chunks(chunk.max(1)) {
                let (params, cfg, pre) = (&params, &cfg, &pre);
                handles.push(s.spawn(move || retrieval::extract_features(part, params, cfg, pre)));
            }
            for h in handles {
                partials.push(h.join().expect("worker panicked")?);
            }
            Ok(())
        })?;
        let mut store = FeatureStore::new(cfg.feature_dim());
        for part in partials {
            for r in part.records() {
                store.push(r.clone())?;
            }
        }
        store
    };
    formats::save_store(&store, &args.out)?;
    println!(
        "{}",
        serde_json::json!({"records": store.len(), "feature_dim": store.feature_dim()})
    );
    Ok(())
}

// ---------------------------------------------------------------- retrieve

#[derive(Args)]
pub struct RetrieveArgs {
    /// MTFS feature store
    #[arg(long)]
    pub store: PathBuf,
    /// Query by clip (requires --model to featurize it)
    #[arg(long)]
    pub clip: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Query by the id of a record already in the store (excludes itself)
    #[arg(long)]
    pub query_id: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// l2 | cosine
    #[arg(long, default_value = "l2")]
    pub metric: String,
    /// Leave-one-out top-k label accuracy over the whole store
    #[arg(long)]
    pub loo_accuracy: bool,
}

pub fn retrieve(args: RetrieveArgs) -> Result<()> {
    require_exists(&args.store, "feature store")?;
    let metric = parse_metric(&args.metric)?;
    if args.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let store = formats::load_store(&args.store)?;
    if args.loo_accuracy {
        let acc = retrieval::retrieval_accuracy(&store, args.k, metric)?;
        println!("{}", serde_json::json!({"accuracy": acc, "k": args.k}));
        return Ok(());
    }
    let (query, query_id, exclude): (Vec<f32>, String, Option<String>) = match (&args.clip, &args.query_id)
    {
        (Some(path), None) => {
            let model_path = args
                .model
                .as_ref()
                .ok_or_else(|| usage("--clip queries need --model"))?;
            require_exists(model_path, "checkpoint")?;
            require_exists(path, "clip")?;
            let (params, cfg) = formats::load_model(model_path)?;
            let pre = PreprocessConfig::eval(cfg.input_size);
            let clip = formats::load_clip(path)?;
            let id = clip.id.clone();
            (
                model::extract_feature(&clip, &params, &cfg, &pre)?.into_data(),
                id,
                None,
            )
        }
        (None, Some(id)) => {
            let record = store
                .records()
                .iter()
                .find(|r| &r.id == id)
                .ok_or_else(|| anyhow!("id {id:?} not in store"))?;
            (record.feature.clone(), id.clone(), Some(id.clone()))
        }
        _ => return Err(usage("give exactly one of --clip or --query-id")),
    };
    let hits = retrieval::knn(&store, &query, args.k, metric, exclude.as_deref())?;
    println!("query_id,rank,neighbor_id,distance,neighbor_label");
    for (rank, n) in hits.iter().enumerate() {
        println!(
            "{},{},{},{},{}",
            query_id,
            rank + 1,
            n.id,
            n.distance,
            n.label.map(|l| l.name()).unwrap_or("")
        );
    }
    Ok(())
}

// --------------------------------------------------------------- recommend

#[derive(Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub clip: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Seed for the Random-motion style draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the styled clip here (.mtc1 file, or a directory for PNGs)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = recommend::DEFAULT_LOOP_COUNT)]
    pub loop_count: usize,
}

pub fn recommend(args: RecommendArgs) -> Result<()> {
    require_exists(&args.model, "checkpoint")?;
    require_exists(&args.clip, "clip")?;
    if args.loop_count < 2 {
        return Err(usage("--loop-count must be at least 2"));
    }
    let (params, cfg) = formats::load_model(&args.model)?;
    let pre = PreprocessConfig::eval(cfg.input_size);
    let clip = formats::load_clip(&args.clip)?;
    let (motion, _) = model::predict(&clip, &params, &cfg, &pre)?;
    let style = recommend::recommend(motion, args.seed);
    if let Some(out) = &args.out {
        let styled = recommend::apply_style(&clip, style, args.loop_count)?;
        write_clip_output(&styled, out)?;
    }
    println!(
        "{}",
        serde_json::json!({"motion": motion.name(), "style": style.name()})
    );
    Ok(())
}

// ------------------------------------------------------------- apply-style

#[derive(Args)]
pub struct ApplyStyleArgs {
    #[arg(long)]
    pub clip: PathBuf,
    /// reverse | loop | boomerang
    #[arg(long)]
    pub style: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = recommend::DEFAULT_LOOP_COUNT)]
    pub loop_count: usize,
}

fn write_clip_output(clip: &Clip, out: &Path) -> Result<()> {
    if out.extension().map_or(false, |x| x == "mtc1") {
        formats::save_clip(clip, out)
    } else {
        formats::save_clip_png_dir(clip, out)
    }
}

pub fn apply_style(args: ApplyStyleArgs) -> Result<()> {
    require_exists(&args.clip, "clip")?;
    let style = parse_style(&args.style)?;
    if args.loop_count < 2 {
        return Err(usage("--loop-count must be at least 2"));
    }
    let clip = formats::load_clip(&args.clip)?;
    let styled = recommend::apply_style(&clip, style, args.loop_count)?;
    write_clip_output(&styled, &args.out)?;
    println!(
        "{}",
        serde_json::json!({"style": style.name(), "frames": styled.t_total()})
    );
    Ok(())
}

// -------------------------------------------------------------------- macs

#[derive(Args)]
pub struct MacsArgs {
    #[arg(long, default_value_t = 3)]
    pub segments: usize,
}

pub fn macs(args: MacsArgs) -> Result<()> {
    if args.segments == 0 {
        return Err(usage("--segments must be at least 1"));
    }
    let cfg = ModelConfig { segments: args.segments, ..ModelConfig::default() };
    let report = model::count_macs(&cfg)?;
    println!("{:<16} {:>12}", "layer", "macs");
    for (name, macs) in &report.layers {
        println!("{name:<16} {macs:>12}");
    }
    println!("{:<16} {:>12}", "backbone/seg", report.backbone_per_segment);
    println!("{:<16} {:>12}", "backbone total", report.backbone_total);
    println!("{:<16} {:>12}", "head", report.head);
    println!("{:<16} {:>12}", "total", report.total);
    let single = model::count_macs(&ModelConfig { segments: 1, ..cfg })?;
    let ratio = report.backbone_total as f64 / single.backbone_total as f64;
    println!(
        "backbone macs(T={}) / macs(T=1) = {} (expected {})",
        args.segments, ratio, args.segments
    );
    Ok(())
}

// --------------------------------------------------------------- gradcheck

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let results = mtc_core::gradcheck::run_suite(args.seed)?;
    let mut worst = 0.0f64;
    for r in &results {
        println!("{:<24} {:.3e}", r.name, r.max_rel_error);
        worst = worst.max(r.max_rel_error);
    }
    if worst > 1e-5 {
        bail!("max relative error {worst:.3e} exceeds 1e-5");
    }
    println!("max relative error {worst:.3e} within 1e-5");
    Ok(())
}
