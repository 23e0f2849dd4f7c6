//! Command-line front end: `gen`, `train`, `explain`, `eval`, `features`.
//!
//! Settings come from a flat JSON config file (`--config`), overridden by
//! flags. Primary output goes to the supplied writer (stdout in the
//! binary); logs go to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, GenConfig, SchemaSpec, TimeSeries};
use crate::error::{Error, Result};
use crate::explain::{Level, RenderFormat, RuleBase};
use crate::features::{feature_report, FeatureConfig, KlMode};
use crate::harness::{classify_all, flip_rate, flip_table};
use crate::influence::{SalientPolicy, ScalingMode};
use crate::network::{self, Architecture, Network, TrainConfig};
use crate::pipeline::{self, ExplainConfig};

#[derive(Debug, Parser)]
#[command(name = "seqexplain", version, about = "Explainable anomaly classification for multichannel time series")]
pub struct Cli {
    /// Flat JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (gen) or file (train).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset and split it into train/val/test CSV files.
    Gen,
    /// Train a classifier on `<input>/train.csv` and `<input>/val.csv`.
    Train(InputArgs),
    /// Classify series and explain the anomalous ones.
    Explain(ExplainArgs),
    /// Classification metrics and the masking flip-rate table.
    Eval(ExplainArgs),
    /// Feature report for one series.
    Features(ExplainArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Only this series.
    #[arg(long)]
    pub id: Option<u64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_parser = ["novice", "expert"])]
    pub level: Option<String>,
    #[arg(long, value_parser = ["plain_text", "json"])]
    pub format: Option<String>,
    /// JSON rule base replacing the built-in one.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

/// The fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub id: Option<u64>,

    pub n_series: usize,
    pub length: usize,
    pub anomaly_fraction: f64,
    pub spike_min: f64,
    pub spike_max: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,

    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub beta: f64,
    pub early_stop_patience: usize,

    pub block_size: usize,
    pub kl_bins: usize,
    pub kl_epsilon: f64,
    pub kl_mode: KlMode,
    pub r_sigma: f64,
    pub peak_max_width: usize,
    pub peak_snr: f64,

    pub salient_threshold: f64,
    pub salient_cap: usize,
    pub scaling: ScalingMode,
    pub window: usize,
    pub eval_windows: Vec<usize>,
    pub level: Level,
    pub format: RenderFormat,
}

const DEFAULT_GEN_SEED: u64 = 7;

impl Default for RunConfig {
    fn default() -> Self {
        let g = GenConfig::default();
        let t = TrainConfig::default();
        let f = FeatureConfig::default();
        let s = SalientPolicy::default();
        RunConfig {
            seed: None,
            input: None,
            out: None,
            checkpoint: None,
            rules: None,
            id: None,
            n_series: g.n_series,
            length: g.length,
            anomaly_fraction: g.anomaly_fraction,
            spike_min: g.spike_magnitude_range.0,
            spike_max: g.spike_magnitude_range.1,
            train_fraction: 2.0 / 3.0,
            val_fraction: 2.0 / 15.0,
            test_fraction: 0.2,
            lr: t.lr,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lambda: t.lambda,
            beta: t.beta,
            early_stop_patience: t.early_stop_patience,
            block_size: f.block_size,
            kl_bins: f.kl_bins,
            kl_epsilon: f.kl_epsilon,
            kl_mode: f.kl_mode,
            r_sigma: f.r_sigma,
            peak_max_width: f.peak_max_width,
            peak_snr: f.peak_snr,
            salient_threshold: s.threshold,
            salient_cap: s.per_channel_cap,
            scaling: ScalingMode::default(),
            window: 1,
            eval_windows: vec![1, 3],
            level: Level::Expert,
            format: RenderFormat::PlainText,
        }
    }
}

impl RunConfig {
    /// Parses a config document; unknown keys are rejected by name.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .strip_prefix("unknown field `")
                .and_then(|rest| rest.split('`').next())
                .unwrap_or("config")
                .to_string();
            Error::Config { field, reason: msg }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n_series: self.n_series,
            length: self.length,
            anomaly_fraction: self.anomaly_fraction,
            spike_magnitude_range: (self.spike_min, self.spike_max),
            seed: self.seed.unwrap_or(DEFAULT_GEN_SEED),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lambda: self.lambda,
            beta: self.beta,
            seed: self.seed.unwrap_or(TrainConfig::default().seed),
            early_stop_patience: self.early_stop_patience,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            block_size: self.block_size,
            kl_bins: self.kl_bins,
            kl_epsilon: self.kl_epsilon,
            kl_mode: self.kl_mode,
            r_sigma: self.r_sigma,
            peak_max_width: self.peak_max_width,
            peak_snr: self.peak_snr,
        }
    }

    pub fn explain_config(&self) -> ExplainConfig {
        ExplainConfig {
            features: self.feature_config(),
            salient: SalientPolicy {
                threshold: self.salient_threshold,
                per_channel_cap: self.salient_cap,
            },
            scaling: self.scaling,
            window: self.window,
            level: self.level,
        }
    }

    fn apply(&mut self, cli: &Cli) -> Result<()> {
        if cli.seed.is_some() {
            self.seed = cli.seed;
        }
        if cli.out.is_some() {
            self.out = cli.out.clone();
        }
        let args = match &cli.command {
            Command::Gen => return Ok(()),
            Command::Train(a) => {
                if a.input.is_some() {
                    self.input = a.input.clone();
                }
                return Ok(());
            }
            Command::Explain(a) | Command::Eval(a) | Command::Features(a) => a,
        };
        if args.input.is_some() {
            self.input = args.input.clone();
        }
        if args.checkpoint.is_some() {
            self.checkpoint = args.checkpoint.clone();
        }
        if args.rules.is_some() {
            self.rules = args.rules.clone();
        }
        if args.id.is_some() {
            self.id = args.id;
        }
        if let Some(w) = args.window {
            self.window = w;
        }
        if let Some(l) = &args.level {
            self.level = l.parse()?;
        }
        if let Some(f) = &args.format {
            self.format = match f.as_str() {
                "json" => RenderFormat::Json,
                _ => RenderFormat::PlainText,
            };
        }
        Ok(())
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, field: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::config(field, "is required for this command"))
    }
}

/// Resolves the config for `cli` (file, then flags).
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(cli)?;
    Ok(cfg)
}

/// Runs one parsed command, writing its primary output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve(cli)?;
    log::info!(
        "resolved config: {}",
        serde_json::to_string(&cfg).expect("config serializes")
    );
    match &cli.command {
        Command::Gen => cmd_gen(&cfg, out),
        Command::Train(_) => cmd_train(&cfg, out),
        Command::Explain(_) => cmd_explain(&cfg, out),
        Command::Eval(_) => cmd_eval(&cfg, out),
        Command::Features(_) => cmd_features(&cfg, out),
    }
}

fn load_input(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.require(&cfg.input, "input")?;
    dataset::load_csv(path, &SchemaSpec::default())
}

fn selected<'a>(cfg: &RunConfig, ds: &'a Dataset) -> Result<Vec<&'a TimeSeries>> {
    match cfg.id {
        Some(id) => Ok(vec![ds
            .get(id)
            .ok_or_else(|| Error::config("id", format!("no series with id {id}")))?]),
        None => Ok(ds.series.iter().collect()),
    }
}

fn rules(cfg: &RunConfig) -> Result<RuleBase> {
    match &cfg.rules {
        Some(p) => RuleBase::from_json(&std::fs::read_to_string(p)?),
        None => Ok(RuleBase::default_rules()),
    }
}

pub fn cmd_gen(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let gen = cfg.gen_config();
    let all = dataset::generate_synthetic(&gen)?;
    let (train, val, test) = dataset::split(
        &all,
        (cfg.train_fraction, cfg.val_fraction, cfg.test_fraction),
        gen.seed,
    )?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&dir)?;
    let mut summary = serde_json::Map::new();
    for (name, ds) in [("train", &train), ("val", &val), ("test", &test)] {
        dataset::save_csv(ds, &dir.join(format!("{name}.csv")))?;
        summary.insert(
            name.into(),
            serde_json::json!({ "series": ds.len(), "anomalous": ds.n_anomalous() }),
        );
    }
    writeln!(out, "{}", serde_json::Value::Object(summary))?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let dir = cfg.require(&cfg.input, "input")?;
    let train = dataset::load_csv(&dir.join("train.csv"), &SchemaSpec::default())?;
    let val = dataset::load_csv(&dir.join("val.csv"), &SchemaSpec::default())?;
    let length = train
        .length()
        .ok_or_else(|| Error::Series("training set is empty".into()))?;
    let tc = cfg.train_config();
    let mut init = Network::init(Architecture::default_for(train.channel_schema.len(), length), tc.seed)?;
    init.channel_schema = train.channel_schema.clone();
    let net = pipeline::fit(&init, &train, &val, &tc, &cfg.feature_config())?;
    let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("model.tsxn"));
    network::save(&net, &path)?;
    let m = &net.training_meta;
    writeln!(
        out,
        "{}",
        serde_json::json!({
            "checkpoint": path,
            "parameters": net.param_count(),
            "epochs_trained": m.epochs_trained,
            "best_epoch": m.best_epoch,
            "best_val_loss": m.val_loss.get(m.best_epoch.saturating_sub(1)),
        })
    )?;
    Ok(())
}

pub fn cmd_explain(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let net = network::load(cfg.require(&cfg.checkpoint, "checkpoint")?)?;
    let ds = load_input(cfg)?;
    let rules = rules(cfg)?;
    let ec = cfg.explain_config();
    for s in selected(cfg, &ds)? {
        let e = pipeline::explain_series(&net, s, &ec, &rules)?;
        if !e.active {
            writeln!(out, "{{\"active\": false, \"prediction\": \"normal\"}}")?;
            continue;
        }
        match cfg.format {
            RenderFormat::Json => {
                writeln!(out, "{}", serde_json::to_string(&e).expect("explanation serializes"))?
            }
            RenderFormat::PlainText => {
                writeln!(out, "# series {}", s.id)?;
                write!(out, "{}", e.render(RenderFormat::PlainText))?;
            }
        }
    }
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let net = network::load(cfg.require(&cfg.checkpoint, "checkpoint")?)?;
    let mut ds = load_input(cfg)?;
    if let Some(id) = cfg.id {
        ds.series.retain(|s| s.id == id);
    }
    let ec = cfg.explain_config();
    let classification = classify_all(&net, &ds)?;
    let reports = cfg
        .eval_windows
        .iter()
        .map(|&w| flip_rate(&net, &ds, w, &ec))
        .collect::<Result<Vec<_>>>()?;
    match cfg.format {
        RenderFormat::Json => writeln!(
            out,
            "{}",
            serde_json::json!({ "metrics": classification.metrics, "flip_rate": reports })
        )?,
        RenderFormat::PlainText => {
            let m = &classification.metrics;
            let c = &m.confusion;
            writeln!(
                out,
                "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} (tp {} fp {} tn {} fn {})",
                m.accuracy, m.precision, m.recall, m.f1, c.tp, c.fp, c.tn, c.fn_
            )?;
            writeln!(out)?;
            write!(out, "{}", flip_table(&reports))?;
        }
    }
    Ok(())
}

pub fn cmd_features(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let ds = load_input(cfg)?;
    let fc = cfg.feature_config();
    let net = cfg.checkpoint.as_deref().map(network::load).transpose()?;
    let ec = cfg.explain_config();
    for s in selected(cfg, &ds)? {
        let salient = match &net {
            Some(n) => pipeline::salient_points(n, s, &ec)?,
            None => Vec::new(),
        };
        let report = feature_report(s, &salient, &fc)?;
        writeln!(out, "{}", serde_json::json!({ "id": s.id, "report": report }))?;
    }
    Ok(())
}
