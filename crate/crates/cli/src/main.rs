//! `oltr` — command-line driver for the online learning-to-rank simulator.
//!
//! Three subcommands cover the experiment lifecycle:
//!
//! * `train` runs one online learning experiment end to end and writes the
//!   full artifact set (learning curve, weight table, summary, checkpoint,
//!   manifest) into `--out-dir`.
//! * `compare` runs or reloads several configurations over shared seeds and
//!   emits a significance table against the best performer.
//! * `weights` reports a trained run's learned position weights next to the
//!   ground-truth profile of its feedback process.
//!
//! Exit codes: 0 success, 1 runtime failure (a manifest with the error is
//! still written), 2 invalid usage or configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use oltr_core::experiment::{
    evaluate_offline, random_ranking_baseline, run_online, t_test_two_tailed, weight_distance,
    ExperimentConfig, FeedbackKind, OfflineEvaluation, RunOutput, Split, WeightComparison,
};
use oltr_core::feedback::{BuiltinClickModel, ClickConfig};
use oltr_core::learners::{LearnerCheckpoint, LearnerKind};
use oltr_core::rng::{sub_seed, SeedDomain};

/// How a command failed, which decides the process exit code.
#[derive(Debug)]
enum Failure {
    /// Bad flags or an invalid configuration: exit 2.
    Usage(String),
    /// The configuration was valid but the work failed: exit 1.
    Runtime(String),
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self::Usage(message.into())
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self::Runtime(message.into())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            Self::Usage(_) => ExitCode::from(2),
            Self::Runtime(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "oltr", version, about = "Online learning-to-rank simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one online experiment and write its artifacts.
    Train(TrainArgs),
    /// Run or reload several configurations and compare them statistically.
    Compare(CompareArgs),
    /// Report learned position weights against the ground-truth profile.
    Weights(WeightsArgs),
}

/// Flags shared by every command that builds an experiment configuration.
/// Each flag overrides the corresponding field of the base configuration
/// (the `--config` file if given, library defaults otherwise).
#[derive(Args, Debug, Clone)]
struct ConfigFlags {
    /// Base configuration: a config JSON or a summary.json from an earlier
    /// run (its embedded config is used). Explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Learning algorithm: pglearn, reglearn, or oraclelearn.
    #[arg(long)]
    learner: Option<LearnerKind>,

    /// Feedback simulator: ndcg or clicks.
    #[arg(long)]
    feedback: Option<FeedbackFlag>,

    /// Click model for --feedback clicks: perfect, locating, entertaining,
    /// or path#section for a TOML-defined configuration.
    #[arg(long)]
    click_config: Option<ClickSpec>,

    /// Length of every displayed list.
    #[arg(long)]
    k: Option<usize>,

    /// Exploration rate of the epsilon-greedy policy.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Number of training batches.
    #[arg(long)]
    batches: Option<usize>,

    /// Interactions per batch.
    #[arg(long)]
    batch_size: Option<usize>,

    /// Candidate pool size per interaction.
    #[arg(long)]
    pool_size: Option<usize>,

    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,

    /// Hidden layer widths of the scorer, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,

    /// Subtract the batch-mean reward in the policy-gradient update.
    #[arg(long)]
    reward_baseline: bool,

    /// Master seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Dataset: number of standing queries.
    #[arg(long)]
    queries: Option<usize>,

    /// Dataset: number of items.
    #[arg(long)]
    items: Option<usize>,

    /// Dataset: feature dimension.
    #[arg(long)]
    dim: Option<usize>,

    /// Dataset: probability an item is relevant to two queries.
    #[arg(long)]
    multi_prob: Option<f64>,

    /// Dataset: feature noise scale.
    #[arg(long)]
    noise: Option<f64>,

    /// Dataset: minimum relevant items per query per split.
    #[arg(long)]
    min_relevant: Option<usize>,

    /// Offline evaluation: number of test batches.
    #[arg(long)]
    offline_batches: Option<usize>,

    /// Offline evaluation: interactions per test batch.
    #[arg(long)]
    offline_batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    flags: ConfigFlags,

    /// Directory for the artifact set.
    #[arg(long, default_value = "oltr-out")]
    out_dir: PathBuf,

    /// Monte-Carlo draws for the random-ranking baseline in the summary.
    #[arg(long, default_value_t = 20_000)]
    baseline_draws: usize,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Two or more configurations to compare: config JSON or summary.json
    /// files (a summary's embedded config is used).
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,

    /// Seeds to run every configuration under, comma separated. Without
    /// this flag each configuration runs once under its own seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Directory for compare.csv and the manifest.
    #[arg(long, default_value = "oltr-out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    /// Read learned weights from a checkpoint instead of training. The
    /// ground-truth profile still comes from --feedback/--click-config.
    #[arg(long)]
    checkpoint: Option<PathBuf>,

    #[command(flatten)]
    flags: ConfigFlags,

    /// Directory for weights.csv and the manifest.
    #[arg(long, default_value = "oltr-out")]
    out_dir: PathBuf,
}

/// `--feedback` values.
#[derive(Debug, Clone, Copy)]
enum FeedbackFlag {
    Ndcg,
    Clicks,
}

impl FromStr for FeedbackFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ndcg" => Ok(Self::Ndcg),
            "clicks" => Ok(Self::Clicks),
            other => Err(format!("unknown feedback kind '{other}' (expected ndcg or clicks)")),
        }
    }
}

/// `--click-config` values: a built-in name or `path#section`.
#[derive(Debug, Clone)]
enum ClickSpec {
    Builtin(BuiltinClickModel),
    File { path: PathBuf, section: String },
}

impl FromStr for ClickSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(builtin) = s.parse::<BuiltinClickModel>() {
            return Ok(Self::Builtin(builtin));
        }
        if let Some((path, section)) = s.rsplit_once('#') {
            if !path.is_empty() && !section.is_empty() {
                return Ok(Self::File {
                    path: PathBuf::from(path),
                    section: section.to_string(),
                });
            }
        }
        Err(format!(
            "unknown click config '{s}' (expected perfect, locating, entertaining, or path#section)"
        ))
    }
}

impl ClickSpec {
    fn resolve(&self) -> Result<ClickConfig, Failure> {
        match self {
            Self::Builtin(builtin) => Ok(ClickConfig::builtin(*builtin)),
            Self::File { path, section } => ClickConfig::from_file(path, section)
                .map_err(|e| Failure::usage(format!("--click-config {}: {e}", path.display()))),
        }
    }
}

impl ConfigFlags {
    /// Builds the effective configuration: base (config file or defaults)
    /// with every explicit flag applied on top, then validated.
    fn build_config(&self) -> Result<ExperimentConfig, Failure> {
        let learner = self.learner.unwrap_or(LearnerKind::RegLearn);
        let mut config = match &self.config {
            Some(path) => load_config_file(path)?,
            None => ExperimentConfig::default_for(learner),
        };
        if let Some(learner) = self.learner {
            config.learner = learner;
        }
        match self.feedback {
            Some(FeedbackFlag::Ndcg) => config.feedback = FeedbackKind::Ndcg,
            Some(FeedbackFlag::Clicks) => {
                let spec = self
                    .click_config
                    .clone()
                    .unwrap_or(ClickSpec::Builtin(BuiltinClickModel::Perfect));
                config.feedback = FeedbackKind::Clicks(spec.resolve()?);
            }
            None => {
                // --click-config alone refines an already-clicks config.
                if let (Some(spec), FeedbackKind::Clicks(_)) = (&self.click_config, &config.feedback)
                {
                    config.feedback = FeedbackKind::Clicks(spec.resolve()?);
                }
            }
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(epsilon) = self.epsilon {
            config.epsilon = epsilon;
        }
        if let Some(batches) = self.batches {
            config.num_batches = batches;
        }
        if let Some(batch_size) = self.batch_size {
            config.batch_size = batch_size;
        }
        if let Some(pool_size) = self.pool_size {
            config.pool_size = pool_size;
        }
        if let Some(lr) = self.lr {
            config.learning_rate = lr;
        }
        if let Some(hidden) = &self.hidden {
            config.hidden_sizes = hidden.clone();
        }
        if self.reward_baseline {
            config.use_reward_baseline = true;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(queries) = self.queries {
            config.dataset.num_queries = queries;
        }
        if let Some(items) = self.items {
            config.dataset.num_items = items;
        }
        if let Some(dim) = self.dim {
            config.dataset.feature_dim = dim;
        }
        if let Some(multi_prob) = self.multi_prob {
            config.dataset.multi_relevance_prob = multi_prob;
        }
        if let Some(noise) = self.noise {
            config.dataset.noise_scale = noise;
        }
        if let Some(min_relevant) = self.min_relevant {
            config.dataset.min_relevant_per_split = min_relevant;
        }
        if let Some(offline_batches) = self.offline_batches {
            config.offline_batches = offline_batches;
        }
        if let Some(offline_batch_size) = self.offline_batch_size {
            config.offline_batch_size = offline_batch_size;
        }
        config
            .validate()
            .map_err(|e| Failure::usage(format!("invalid configuration: {e}")))?;
        Ok(config)
    }
}

/// Loads an [`ExperimentConfig`] from a config JSON or a summary.json
/// (recognized by its top-level `config` field).
fn load_config_file(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{} is not valid JSON: {e}", path.display())))?;
    let config_value = match value.get("config") {
        Some(embedded) => embedded.clone(),
        None => value,
    };
    serde_json::from_value(config_value)
        .map_err(|e| Failure::usage(format!("{} is not a run configuration: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BuildInfo {
    name: &'static str,
    version: &'static str,
}

impl BuildInfo {
    fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Record of one command invocation: what ran, for how long, from which
/// seeds, and which files it left behind. Written even when the command
/// fails, with the error preserved.
#[derive(Serialize)]
struct Manifest {
    build: BuildInfo,
    command: &'static str,
    duration_seconds: f64,
    seeds: serde_json::Value,
    configs: Vec<ExperimentConfig>,
    outputs: Vec<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct OnlineSummary {
    batches: usize,
    interactions: u64,
    explored: u64,
    explored_fraction: f64,
    final_running_ndcg: f64,
}

#[derive(Serialize)]
struct OfflineSummary<'a> {
    mean_ndcg: f64,
    std_dev: f64,
    batch_means: &'a [f64],
}

#[derive(Serialize)]
struct WeightSummary {
    learned: Vec<f64>,
    ground_truth: Vec<f64>,
    #[serde(flatten)]
    comparison: WeightComparison,
}

/// The full result record of a `train` run; `config` alone suffices to
/// reproduce every artifact bit for bit.
#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    online: OnlineSummary,
    offline: OfflineSummary<'a>,
    random_baseline: f64,
    weights: Option<WeightSummary>,
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::runtime(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Per-run master seed plus every domain seed derived from it, so a manifest
/// documents the exact random streams the run consumed.
fn seed_table(master: u64) -> serde_json::Value {
    serde_json::json!({
        "master": master,
        "dataset": sub_seed(master, SeedDomain::Dataset),
        "model_init": sub_seed(master, SeedDomain::ModelInit),
        "online": sub_seed(master, SeedDomain::Online),
        "offline": sub_seed(master, SeedDomain::Offline),
        "random_baseline": sub_seed(master, SeedDomain::RandomBaseline),
    })
}

/// Minimal RFC-4180 quoting: fields with commas, quotes, or newlines are
/// wrapped in double quotes with inner quotes doubled.
fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Renders the learned-vs-ground-truth weight table.
fn weights_csv(learned: &[f64], ground_truth: &[f64]) -> String {
    let mut out = String::from("position,learned_w,ground_truth_w\n");
    for (i, (l, g)) in learned.iter().zip(ground_truth).enumerate() {
        let _ = writeln!(out, "{},{l},{g}", i + 1);
    }
    out
}

fn format_vector(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Everything `train` computes after the online loop.
struct TrainResult {
    output: RunOutput,
    offline: OfflineEvaluation,
    baseline: f64,
}

fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    let config = args.flags.build_config()?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;

    let started = Instant::now();
    let mut outputs = Vec::new();
    let result = train_and_write(&config, args, &mut outputs);

    let manifest = Manifest {
        build: BuildInfo::current(),
        command: "train",
        duration_seconds: started.elapsed().as_secs_f64(),
        seeds: seed_table(config.seed),
        configs: vec![config],
        outputs: {
            let mut all = outputs.clone();
            all.push("manifest.json".into());
            all
        },
        error: result.as_ref().err().map(|f| f.message().to_string()),
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;

    let result = result?;
    let weight_note = match &result.output.learner.weights() {
        Some(w) => format!(", weights {}", format_vector(w.values())),
        None => String::new(),
    };
    println!(
        "{} {} on {} feedback: online nDCG@{} {:.4} over {} interactions, \
         offline {:.4} ± {:.4} (random baseline {:.4}){}",
        manifest.configs[0].learner,
        if manifest.configs[0].num_batches == 0 {
            "untrained"
        } else {
            "trained"
        },
        manifest.configs[0].feedback.label(),
        manifest.configs[0].k,
        result.output.final_running_ndcg,
        result.output.interactions,
        result.offline.mean_ndcg,
        result.offline.std_dev(),
        result.baseline,
        weight_note
    );
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

/// Runs the experiment and writes every artifact except the manifest,
/// recording each file in `outputs` as soon as it exists on disk.
fn train_and_write(
    config: &ExperimentConfig,
    args: &TrainArgs,
    outputs: &mut Vec<String>,
) -> Result<TrainResult, Failure> {
    let curve_path = args.out_dir.join("learning_curve.csv");
    let output = match run_online(config) {
        Ok(output) => output,
        Err(failure) => {
            // Preserve the partial learning curve for post-mortems.
            failure
                .partial
                .write_csv(&curve_path)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            outputs.push("learning_curve.csv".into());
            return Err(Failure::runtime(failure.to_string()));
        }
    };
    output
        .metrics
        .write_csv(&curve_path)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    outputs.push("learning_curve.csv".into());

    let offline = evaluate_offline(output.learner.model(), &output.dataset, config)
        .map_err(|e| Failure::runtime(format!("offline evaluation failed: {e}")))?;
    let baseline =
        random_ranking_baseline(&output.dataset, Split::Test, config, args.baseline_draws)
            .map_err(|e| Failure::runtime(format!("random baseline failed: {e}")))?;

    let weights = match output.learner.weights() {
        Some(weights) => {
            let learned = weights.values().to_vec();
            let truth = config.ground_truth_weights();
            write_text(&args.out_dir.join("weights.csv"), &weights_csv(&learned, &truth))?;
            outputs.push("weights.csv".into());
            let comparison = weight_distance(&learned, &truth)
                .map_err(|e| Failure::runtime(format!("weight comparison failed: {e}")))?;
            Some(WeightSummary {
                learned,
                ground_truth: truth,
                comparison,
            })
        }
        None => None,
    };

    let summary = Summary {
        config,
        online: OnlineSummary {
            batches: output.metrics.rows.len(),
            interactions: output.interactions,
            explored: output.explored,
            explored_fraction: output.explored_fraction(),
            final_running_ndcg: output.final_running_ndcg,
        },
        offline: OfflineSummary {
            mean_ndcg: offline.mean_ndcg,
            std_dev: offline.std_dev(),
            batch_means: &offline.batch_means,
        },
        random_baseline: baseline,
        weights,
    };
    write_json(&args.out_dir.join("summary.json"), &summary)?;
    outputs.push("summary.json".into());

    let checkpoint = output.learner.to_checkpoint(output.metrics.rows.len() as u64);
    let checkpoint_text = serde_json::to_string(&checkpoint)
        .map_err(|e| Failure::runtime(format!("cannot serialize checkpoint: {e}")))?;
    write_text(&args.out_dir.join("checkpoint.json"), &checkpoint_text)?;
    outputs.push("checkpoint.json".into());

    Ok(TrainResult {
        output,
        offline,
        baseline,
    })
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareRow {
    label: String,
    mean: f64,
    std_dev: f64,
    batch_means: Vec<f64>,
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let configs: Vec<(String, ExperimentConfig)> = args
        .runs
        .iter()
        .map(|path| Ok((path.display().to_string(), load_config_file(path)?)))
        .collect::<Result<_, Failure>>()?;

    // All runs must rank lists of the same length for their offline nDCG@k
    // values to be comparable.
    let k = configs[0].1.k;
    if let Some((label, config)) = configs.iter().find(|(_, c)| c.k != k) {
        return Err(Failure::usage(format!(
            "cannot compare runs with different list lengths: {} has k = {}, {} has k = {}",
            configs[0].0, k, label, config.k
        )));
    }

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let started = Instant::now();

    let mut rows = Vec::with_capacity(configs.len());
    for (label, config) in &configs {
        let seeds = args.seeds.clone().unwrap_or_else(|| vec![config.seed]);
        let mut batch_means = Vec::new();
        for &seed in &seeds {
            let mut seeded = config.clone();
            seeded.seed = seed;
            let output = run_online(&seeded)
                .map_err(|f| Failure::runtime(format!("{label} (seed {seed}): {f}")))?;
            let offline = evaluate_offline(output.learner.model(), &output.dataset, &seeded)
                .map_err(|e| {
                    Failure::runtime(format!("{label} (seed {seed}): offline evaluation: {e}"))
                })?;
            batch_means.extend(offline.batch_means);
        }
        let eval = OfflineEvaluation {
            mean_ndcg: batch_means.iter().sum::<f64>() / batch_means.len() as f64,
            batch_means,
        };
        rows.push(CompareRow {
            label: label.clone(),
            mean: eval.mean_ndcg,
            std_dev: eval.std_dev(),
            batch_means: eval.batch_means,
        });
    }

    // Best configuration first; ties broken by label for determinism.
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.label.cmp(&b.label)));

    let mut csv = String::from("config,mean,std,p_vs_best,significant\n");
    let mut table = String::new();
    for (i, row) in rows.iter().enumerate() {
        // The best row compares to itself: p = 1 by convention, no marker.
        let p = if i == 0 {
            1.0
        } else {
            t_test_two_tailed(&row.batch_means, &rows[0].batch_means)
                .map_err(|e| Failure::runtime(format!("t-test for {}: {e}", row.label)))?
                .p_value
        };
        let marker = if i > 0 && p < 0.05 { "*" } else { "" };
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            csv_field(&row.label),
            row.mean,
            row.std_dev,
            p,
            marker
        );
        // Extreme significance underflows the two-tailed p to 0.0; render it
        // as a bound so the table doesn't look like a division bug.
        let p_text = if p > 0.0 && p < 1e-300 || i > 0 && p == 0.0 {
            "<1e-300".to_string()
        } else {
            format!("{p:.4e}")
        };
        let _ = writeln!(
            table,
            "{:>10.4} ± {:<8.4} p={:<12} {:<2} {}",
            row.mean, row.std_dev, p_text, marker, row.label
        );
    }
    write_text(&args.out_dir.join("compare.csv"), &csv)?;

    let manifest = Manifest {
        build: BuildInfo::current(),
        command: "compare",
        duration_seconds: started.elapsed().as_secs_f64(),
        seeds: serde_json::json!(args.seeds),
        configs: configs.into_iter().map(|(_, c)| c).collect(),
        outputs: vec!["compare.csv".into(), "manifest.json".into()],
        error: None,
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;

    println!("offline nDCG@{k}, best first (* = significantly worse than best, p < 0.05):");
    print!("{table}");
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

fn cmd_weights(args: &WeightsArgs) -> Result<(), Failure> {
    let (learned, k, config_echo) = match &args.checkpoint {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            let checkpoint: LearnerCheckpoint = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("{} is not a checkpoint: {e}", path.display())))?;
            if checkpoint.config.kind != LearnerKind::RegLearn {
                return Err(Failure::usage(format!(
                    "weights requires a reglearn checkpoint; {} holds {}",
                    path.display(),
                    checkpoint.config.kind
                )));
            }
            let weights = checkpoint
                .weights
                .as_ref()
                .expect("reglearn checkpoints carry weights");
            (weights.values().to_vec(), checkpoint.config.k, None)
        }
        None => {
            let config = args.flags.build_config()?;
            if config.learner != LearnerKind::RegLearn {
                return Err(Failure::usage(format!(
                    "weights requires a reglearn run configuration, got {}",
                    config.learner
                )));
            }
            let output = run_online(&config).map_err(|f| Failure::runtime(f.to_string()))?;
            let learned = output
                .learner
                .weights()
                .expect("reglearn has weights")
                .values()
                .to_vec();
            (learned, config.k, Some(config))
        }
    };

    // Ground truth follows the feedback flags (the checkpoint itself does
    // not record what feedback trained it).
    let truth_config = match &config_echo {
        Some(config) => config.clone(),
        None => {
            let mut flags = args.flags.clone();
            flags.k = Some(k);
            flags.learner = Some(LearnerKind::RegLearn);
            // Pool size must stay ≥ k for validation; the value is otherwise
            // unused here.
            if flags.pool_size.is_none() {
                flags.pool_size = Some(k.max(20));
            }
            flags.batches = Some(0);
            flags.build_config()?
        }
    };
    let ground_truth = truth_config.ground_truth_weights();

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let started = Instant::now();
    write_text(&args.out_dir.join("weights.csv"), &weights_csv(&learned, &ground_truth))?;

    let comparison = weight_distance(&learned, &ground_truth)
        .map_err(|e| Failure::runtime(format!("weight comparison failed: {e}")))?;

    let manifest = Manifest {
        build: BuildInfo::current(),
        command: "weights",
        duration_seconds: started.elapsed().as_secs_f64(),
        seeds: serde_json::json!(config_echo.as_ref().map(|c| seed_table(c.seed))),
        configs: config_echo.into_iter().collect(),
        outputs: vec!["weights.csv".into(), "manifest.json".into()],
        error: None,
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;

    println!("learned weights:      {}", format_vector(&learned));
    println!("ground-truth profile: {}", format_vector(&ground_truth));
    println!("euclidean distance:   {}", comparison.euclidean_distance);
    println!("strictly decreasing:  {}", comparison.strictly_decreasing);
    println!("order matches truth:  {}", comparison.order_matches);
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Weights(args) => cmd_weights(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}
