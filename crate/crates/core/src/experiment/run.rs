//! The online simulation loop and its evaluations.
//!
//! One run: generate a synthetic corpus, build a learner, then repeat for
//! `num_batches` rounds — draw `batch_size` interactions from the train
//! split, display a list for each (epsilon-greedy), collect one scalar of
//! feedback per list, and apply exactly one learner update on the collected
//! batch. The online metric is always nDCG@k of the *shown* lists, whatever
//! feedback the learner trains on, so runs with different feedback kinds
//! plot on a common axis.
//!
//! Every source of randomness is derived from the config's master seed (see
//! [`crate::rng`]); a run is a pure function of its config, and each
//! interaction's RNG depends only on its global index, so results cannot
//! depend on execution interleaving.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::experiment::dataset::{
    generate_synthetic_dataset, sample_interaction, Dataset, DatasetParams, Item, Split,
};
use crate::feedback::{ctr_feedback, dcg_discounts, ndcg_at_k, simulate_clicks_pbm, ClickConfig};
use crate::learners::{greedy_top_k, InteractionRecord, Learner, LearnerConfig, LearnerKind};
use crate::plackett_luce::ScoredPool;
use crate::rng::{interaction_rng, sub_seed, SeedDomain};
use crate::scorer::{FeatureVector, ScoringModel};
use crate::{Error, Result};

/// What kind of list-level feedback the simulator produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    /// Ideal judge: the reward is the shown list's nDCG@k.
    Ndcg,
    /// Behavioral: the reward is the click count from a position-based
    /// click model.
    Clicks(ClickConfig),
}

impl FeedbackKind {
    pub fn label(&self) -> String {
        match self {
            Self::Ndcg => "ndcg".into(),
            Self::Clicks(config) => format!("clicks:{}", config.name()),
        }
    }
}

/// Complete description of one online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub learner: LearnerKind,
    pub feedback: FeedbackKind,
    /// Length of every displayed list.
    pub k: usize,
    /// Exploration rate of the epsilon-greedy policy.
    pub epsilon: f64,
    /// Candidate pool size per interaction.
    pub pool_size: usize,
    /// Interactions per batch (one learner update per batch).
    pub batch_size: usize,
    pub num_batches: usize,
    /// Adam learning rate for the scorer and (for RegLearn) the weights.
    pub learning_rate: f64,
    /// Hidden layer widths of the scorer.
    pub hidden_sizes: Vec<usize>,
    /// Subtract the batch-mean reward in the policy-gradient update.
    pub use_reward_baseline: bool,
    /// Master seed; every other seed in the run is derived from it.
    pub seed: u64,
    pub dataset: DatasetParams,
    /// Offline evaluation: number of test batches and interactions each.
    pub offline_batches: usize,
    pub offline_batch_size: usize,
}

impl ExperimentConfig {
    /// A ready-to-run configuration with the library defaults: nDCG@5
    /// feedback, epsilon 0.1, pools of 20, batches of 100 interactions.
    pub fn default_for(learner: LearnerKind) -> Self {
        Self {
            learner,
            feedback: FeedbackKind::Ndcg,
            k: 5,
            epsilon: 0.1,
            pool_size: 20,
            batch_size: 100,
            num_batches: 5000,
            learning_rate: 1e-4,
            hidden_sizes: vec![64, 64],
            use_reward_baseline: false,
            seed: 0,
            dataset: DatasetParams::default(),
            offline_batches: 150,
            offline_batch_size: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "list length k must be at least 1".into(),
            ));
        }
        if self.k > self.pool_size {
            return Err(Error::InvalidArgument(format!(
                "list length k = {} cannot exceed the pool size c = {}",
                self.k, self.pool_size
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if !self.epsilon.is_finite() || !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(
                "hidden layer sizes must be positive".into(),
            ));
        }
        if self.offline_batches == 0 || self.offline_batch_size == 0 {
            return Err(Error::InvalidArgument(
                "offline evaluation needs at least one batch of at least one interaction".into(),
            ));
        }
        if let FeedbackKind::Clicks(config) = &self.feedback {
            if self.k > config.max_positions() {
                return Err(Error::InvalidArgument(format!(
                    "k = {} exceeds the {} positions modeled by click config '{}'",
                    self.k,
                    config.max_positions(),
                    config.name()
                )));
            }
        }
        self.learner_config().validate()
    }

    /// Scorer architecture: feature dim, hidden layers, one output per query.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(self.dataset.feature_dim);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(self.dataset.num_queries);
        sizes
    }

    /// The ground-truth position profile of this config's feedback process:
    /// nDCG's discounts, or the click model's examination probabilities.
    pub fn ground_truth_weights(&self) -> Vec<f64> {
        match &self.feedback {
            FeedbackKind::Ndcg => dcg_discounts(self.k),
            FeedbackKind::Clicks(config) => config.examination()[..self.k].to_vec(),
        }
    }

    /// The learner-level slice of this configuration. OracleLearn receives
    /// the ground-truth position profile as its frozen discount weights.
    pub fn learner_config(&self) -> LearnerConfig {
        let mut config = LearnerConfig::new(self.learner, self.k, self.epsilon);
        config.use_reward_baseline = self.use_reward_baseline;
        if self.learner == LearnerKind::OracleLearn {
            config.oracle_weights = Some(self.ground_truth_weights());
        }
        config
    }
}

/// One logged batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub batch: usize,
    /// Mean shown-list nDCG@k over this batch's interactions.
    pub mean_ndcg: f64,
    /// Running mean of shown-list nDCG@k over all interactions so far.
    pub running_ndcg: f64,
    /// Mean training loss on this batch (regression learners only).
    pub loss: Option<f64>,
    /// Discount weights after this batch's update (empty for PgLearn).
    pub weights: Vec<f64>,
}

/// Per-batch training log; serializes to CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    /// Number of weight columns in every row (0 when the learner has none).
    pub weight_count: usize,
    pub rows: Vec<BatchRow>,
}

impl MetricsLog {
    /// Renders the log as CSV with header
    /// `batch,mean_ndcg,running_ndcg,loss[,w_1..w_k]`.
    ///
    /// Floats print in shortest round-trip form, so equal logs render to
    /// byte-identical text; an undefined loss renders as an empty cell.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("batch,mean_ndcg,running_ndcg,loss");
        for i in 1..=self.weight_count {
            out.push_str(&format!(",w_{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}",
                row.batch,
                row.mean_ndcg,
                row.running_ndcg,
                row.loss.map(|l| l.to_string()).unwrap_or_default()
            ));
            for w in &row.weights {
                out.push_str(&format!(",{w}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Everything a completed run leaves behind.
#[derive(Debug)]
pub struct RunOutput {
    pub metrics: MetricsLog,
    pub learner: Learner,
    pub dataset: Dataset,
    /// Total interactions simulated.
    pub interactions: u64,
    /// Interactions that showed a uniformly random (exploration) list.
    pub explored: u64,
    /// Final running mean of shown-list nDCG@k (0.0 for an empty run).
    pub final_running_ndcg: f64,
}

impl RunOutput {
    pub fn explored_fraction(&self) -> f64 {
        if self.interactions == 0 {
            0.0
        } else {
            self.explored as f64 / self.interactions as f64
        }
    }
}

/// A run that aborted: the error plus everything logged up to that point.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: MetricsLog,
    pub batches_completed: usize,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run aborted after {} completed batches: {}",
            self.batches_completed, self.error
        )
    }
}

impl std::error::Error for RunFailure {}

/// Simulates one interaction end to end; returns the learning record and the
/// shown list's nDCG@k.
fn simulate_one<R: rand::Rng + ?Sized>(
    config: &ExperimentConfig,
    dataset: &Dataset,
    learner: &Learner,
    rng: &mut R,
) -> Result<(InteractionRecord, f64)> {
    let interaction = sample_interaction(dataset, Split::Train, config.pool_size, rng)?;
    let query = interaction.query;
    let features: Vec<FeatureVector> = interaction
        .pool_ids
        .iter()
        .map(|&id| dataset.item(id).feature().clone())
        .collect();
    let scores = features
        .iter()
        .map(|f| learner.model().score(f, query))
        .collect::<Result<Vec<f64>>>()?;
    // Rejects non-finite scores: a diverged model aborts the run here.
    let pool = ScoredPool::new(interaction.pool_ids, scores)?;
    let (list, explored) = learner.generate(&pool, rng)?;
    let shown_relevances: Vec<bool> = list
        .items()
        .iter()
        .map(|&id| dataset.is_relevant(id, query))
        .collect();
    let relevant_in_pool = pool
        .item_ids()
        .iter()
        .filter(|&&id| dataset.is_relevant(id, query))
        .count();
    let shown_ndcg = ndcg_at_k(&shown_relevances, relevant_in_pool, config.k)?;
    let reward = match &config.feedback {
        FeedbackKind::Ndcg => shown_ndcg,
        FeedbackKind::Clicks(click_config) => {
            ctr_feedback(&simulate_clicks_pbm(&shown_relevances, click_config, rng)?)
        }
    };
    let record = InteractionRecord::new(query, pool, features, list, reward, explored)?;
    Ok((record, shown_ndcg))
}

/// Runs the full online loop described in the module docs.
///
/// On error the run aborts immediately and returns a [`RunFailure`] carrying
/// the log of every batch that completed before the fault.
pub fn run_online(config: &ExperimentConfig) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let fail = |error: Error, partial: &MetricsLog| {
        Box::new(RunFailure {
            error,
            partial: partial.clone(),
            batches_completed: partial.rows.len(),
        })
    };
    let empty = MetricsLog::default();
    config.validate().map_err(|e| fail(e, &empty))?;

    // The dataset must hold at least k relevant items per query per split so
    // ideal lists exist; raise the generation floor to k if needed.
    let mut dataset_params = config.dataset.clone();
    dataset_params.min_relevant_per_split = dataset_params.min_relevant_per_split.max(config.k);
    let dataset = generate_synthetic_dataset(&dataset_params, sub_seed(config.seed, SeedDomain::Dataset))
        .map_err(|e| fail(e, &empty))?;

    let learner = Learner::new(
        config.learner_config(),
        &config.layer_sizes(),
        config.learning_rate,
        sub_seed(config.seed, SeedDomain::ModelInit),
    )
    .map_err(|e| fail(e, &empty))?;
    let mut learner = learner;

    let online_seed = sub_seed(config.seed, SeedDomain::Online);
    let mut metrics = MetricsLog {
        weight_count: learner.weights().map_or(0, |w| w.len()),
        rows: Vec::with_capacity(config.num_batches),
    };
    let mut running_ndcg = 0.0;
    let mut interactions: u64 = 0;
    let mut explored_count: u64 = 0;

    for batch in 0..config.num_batches {
        let mut records = Vec::with_capacity(config.batch_size);
        let mut shown_ndcgs = Vec::with_capacity(config.batch_size);
        for slot in 0..config.batch_size {
            let index = (batch * config.batch_size + slot) as u64;
            let mut rng = interaction_rng(online_seed, index);
            let (record, shown_ndcg) = simulate_one(config, &dataset, &learner, &mut rng)
                .map_err(|e| fail(e, &metrics))?;
            if record.explored() {
                explored_count += 1;
            }
            records.push(record);
            shown_ndcgs.push(shown_ndcg);
        }

        // Update the running mean one interaction at a time; the recurrence
        // mean_t = ((t - 1) * mean_{t-1} + x_t) / t is the logged contract.
        for &x in &shown_ndcgs {
            interactions += 1;
            let t = interactions as f64;
            running_ndcg = ((t - 1.0) * running_ndcg + x) / t;
        }
        let mean_ndcg = shown_ndcgs.iter().sum::<f64>() / shown_ndcgs.len() as f64;

        let loss = learner.update(&records).map_err(|e| fail(e, &metrics))?;
        metrics.rows.push(BatchRow {
            batch,
            mean_ndcg,
            running_ndcg,
            loss,
            weights: learner.weights().map_or_else(Vec::new, |w| w.values().to_vec()),
        });
    }

    Ok(RunOutput {
        metrics,
        learner,
        dataset,
        interactions,
        explored: explored_count,
        final_running_ndcg: running_ndcg,
    })
}

/// Offline evaluation summary: the overall mean nDCG@k and the per-batch
/// means that feed significance tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineEvaluation {
    pub mean_ndcg: f64,
    pub batch_means: Vec<f64>,
}

impl OfflineEvaluation {
    /// Sample standard deviation of the batch means.
    pub fn std_dev(&self) -> f64 {
        let n = self.batch_means.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.mean_ndcg;
        (self
            .batch_means
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    }
}

/// Evaluates a scoring model on held-out test pools.
///
/// Draws `offline_batches x offline_batch_size` interactions from the test
/// split (deterministically from the config seed, independent of the online
/// phase), ranks each pool greedily — evaluation never explores — and
/// averages nDCG@k. Returns the overall mean and each batch's mean.
pub fn evaluate_offline(
    model: &ScoringModel,
    dataset: &Dataset,
    config: &ExperimentConfig,
) -> Result<OfflineEvaluation> {
    evaluate_offline_with(dataset, config, |item, query| {
        model.score(item.feature(), query)
    })
}

/// [`evaluate_offline`] for an arbitrary scoring rule — lets tests evaluate
/// synthetic scorers (a cheating oracle, a constant) on the same pools.
pub fn evaluate_offline_with<F>(
    dataset: &Dataset,
    config: &ExperimentConfig,
    mut score: F,
) -> Result<OfflineEvaluation>
where
    F: FnMut(&Item, usize) -> Result<f64>,
{
    dataset.validate()?;
    let offline_seed = sub_seed(config.seed, SeedDomain::Offline);
    let mut batch_means = Vec::with_capacity(config.offline_batches);
    for batch in 0..config.offline_batches {
        let mut total = 0.0;
        for slot in 0..config.offline_batch_size {
            let index = (batch * config.offline_batch_size + slot) as u64;
            let mut rng = interaction_rng(offline_seed, index);
            let interaction = sample_interaction(dataset, Split::Test, config.pool_size, &mut rng)?;
            let query = interaction.query;
            let scores = interaction
                .pool_ids
                .iter()
                .map(|&id| score(dataset.item(id), query))
                .collect::<Result<Vec<f64>>>()?;
            let pool = ScoredPool::new(interaction.pool_ids, scores)?;
            let list = greedy_top_k(&pool, config.k)?;
            let shown: Vec<bool> = list
                .items()
                .iter()
                .map(|&id| dataset.is_relevant(id, query))
                .collect();
            let relevant_in_pool = pool
                .item_ids()
                .iter()
                .filter(|&&id| dataset.is_relevant(id, query))
                .count();
            total += ndcg_at_k(&shown, relevant_in_pool, config.k)?;
        }
        batch_means.push(total / config.offline_batch_size as f64);
    }
    let mean_ndcg = batch_means.iter().sum::<f64>() / batch_means.len() as f64;
    Ok(OfflineEvaluation {
        mean_ndcg,
        batch_means,
    })
}

/// Monte-Carlo estimate of the expected nDCG@k of uniformly random ranking
/// on pools drawn like the experiment's, from `split`.
pub fn random_ranking_baseline(
    dataset: &Dataset,
    split: Split,
    config: &ExperimentConfig,
    draws: usize,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidArgument(
            "the Monte-Carlo baseline needs at least one draw".into(),
        ));
    }
    let seed = sub_seed(config.seed, SeedDomain::RandomBaseline);
    let mut total = 0.0;
    for i in 0..draws {
        let mut rng = interaction_rng(seed, i as u64);
        let interaction = sample_interaction(dataset, split, config.pool_size, &mut rng)?;
        let query = interaction.query;
        // Uniform list: shuffle prefix of the pool ids.
        let mut ids = interaction.pool_ids;
        for j in 0..config.k {
            let pick = rng.gen_range(j..ids.len());
            ids.swap(j, pick);
        }
        let shown: Vec<bool> = ids[..config.k]
            .iter()
            .map(|&id| dataset.is_relevant(id, query))
            .collect();
        let relevant_in_pool = ids
            .iter()
            .filter(|&&id| dataset.is_relevant(id, query))
            .count();
        total += ndcg_at_k(&shown, relevant_in_pool, config.k)?;
    }
    Ok(total / draws as f64)
}
