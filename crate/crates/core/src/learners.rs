//! Learning rules that improve a ranking policy from list-level rewards.
//!
//! All learners share the same skeleton: a [`ScoringModel`] produces one
//! score per (item, query) pair, an epsilon-greedy policy turns pool scores
//! into a displayed list, and after a batch of interactions the learner
//! updates its parameters from the `(list, reward)` pairs it observed. They
//! differ only in how they assign credit:
//!
//! - **PgLearn** treats the scorer as a stochastic policy: lists are sampled
//!   from Plackett-Luce over the pool scores, and the score-function
//!   (REINFORCE) estimator `E[reward * grad log P(list)]` moves every pool
//!   item's score, listed or not.
//! - **RegLearn** treats the reward as a regression target: it predicts
//!   `reward ≈ sum_i w_i * score(item at position i)` with one learnable
//!   discount weight per position and backpropagates the squared error into
//!   both the weights and the scorer.
//! - **OracleLearn** is RegLearn with the discount weights frozen at the
//!   ground-truth position profile of the feedback process (the nDCG
//!   discounts, or the click model's examination probabilities). It is a
//!   skyline: the best RegLearn could hope to learn.
//!
//! Updates are deterministic — only list generation consumes randomness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::plackett_luce::{pl_log_prob_grad, pl_sample, RankedList, ScoredPool};
use crate::scorer::{adam_step, AdamState, FeatureVector, OutputGrad, ParamSet, ScoringModel};
use crate::{Error, Result};

/// The three learning rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerKind {
    PgLearn,
    RegLearn,
    OracleLearn,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pglearn" => Ok(Self::PgLearn),
            "reglearn" => Ok(Self::RegLearn),
            "oraclelearn" => Ok(Self::OracleLearn),
            other => Err(Error::InvalidArgument(format!(
                "unknown learner '{other}' (expected pglearn, reglearn, or oraclelearn)"
            ))),
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PgLearn => "pglearn",
            Self::RegLearn => "reglearn",
            Self::OracleLearn => "oraclelearn",
        })
    }
}

/// Per-position discount weights used by the regression learners.
///
/// Stored as a single-group [`ParamSet`] so the same Adam implementation that
/// trains the scorer can train the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountWeights {
    params: ParamSet,
    trainable: bool,
}

impl DiscountWeights {
    /// Trainable weights initialized to all ones (no positional opinion).
    pub fn trainable_ones(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "discount weights need at least one position".into(),
            ));
        }
        Ok(Self {
            params: ParamSet::from_groups(vec![vec![1.0; k]]),
            trainable: true,
        })
    }

    /// Frozen weights pinned to a known position profile.
    pub fn fixed(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "discount weights need at least one position".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "discount weights",
            });
        }
        Ok(Self {
            params: ParamSet::from_groups(vec![values]),
            trainable: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.params.groups()[0]
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }
}

/// Everything one interaction leaves behind for learning.
///
/// `features[i]` is the feature vector of `pool.item_ids()[i]`, and the pool
/// scores are the model's scores at display time. Records are meant to be
/// consumed by the same model state that produced them, in the round they
/// were produced.
#[derive(Debug, Clone)]
pub struct InteractionRecord {
    query: usize,
    pool: ScoredPool,
    features: Vec<FeatureVector>,
    list: RankedList,
    reward: f64,
    explored: bool,
}

impl InteractionRecord {
    pub fn new(
        query: usize,
        pool: ScoredPool,
        features: Vec<FeatureVector>,
        list: RankedList,
        reward: f64,
        explored: bool,
    ) -> Result<Self> {
        if features.len() != pool.len() {
            return Err(Error::ShapeMismatch {
                context: "pool feature vectors",
                expected: pool.len(),
                actual: features.len(),
            });
        }
        if !reward.is_finite() {
            return Err(Error::NonFinite {
                context: "interaction reward",
            });
        }
        for &id in list.items() {
            if pool.index_of(id).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "displayed item {id} is not in the record's pool"
                )));
            }
        }
        Ok(Self {
            query,
            pool,
            features,
            list,
            reward,
            explored,
        })
    }

    pub fn query(&self) -> usize {
        self.query
    }

    pub fn pool(&self) -> &ScoredPool {
        &self.pool
    }

    pub fn list(&self) -> &RankedList {
        &self.list
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    pub fn explored(&self) -> bool {
        self.explored
    }

    /// Pool indices of the listed items, in display order.
    fn list_indices(&self) -> Vec<usize> {
        self.list
            .items()
            .iter()
            .map(|&id| self.pool.index_of(id).expect("validated at construction"))
            .collect()
    }
}

/// Static configuration of a [`Learner`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Length of every displayed list.
    pub k: usize,
    /// Probability of showing a uniformly random list instead of the
    /// policy's own choice.
    pub epsilon: f64,
    /// Subtract the batch-mean reward from each reward in the
    /// policy-gradient update (variance reduction; off by default).
    pub use_reward_baseline: bool,
    /// Ground-truth position profile for `OracleLearn` (required exactly for
    /// that kind).
    pub oracle_weights: Option<Vec<f64>>,
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind, k: usize, epsilon: f64) -> Self {
        Self {
            kind,
            k,
            epsilon,
            use_reward_baseline: false,
            oracle_weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "list length k must be at least 1".into(),
            ));
        }
        if !self.epsilon.is_finite() || !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        match (self.kind, &self.oracle_weights) {
            (LearnerKind::OracleLearn, Some(w)) => {
                if w.len() != self.k {
                    return Err(Error::ShapeMismatch {
                        context: "oracle discount weights",
                        expected: self.k,
                        actual: w.len(),
                    });
                }
                if !w.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: "oracle discount weights",
                    });
                }
            }
            (LearnerKind::OracleLearn, None) => {
                return Err(Error::InvalidArgument(
                    "oraclelearn requires ground-truth discount weights".into(),
                ));
            }
            (_, Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "{} does not take oracle discount weights",
                    self.kind
                )));
            }
            (_, None) => {}
        }
        Ok(())
    }
}

/// The policy's pure exploitation choice: the top `k` pool items by score,
/// ties broken by smaller item id.
pub fn greedy_top_k(pool: &ScoredPool, k: usize) -> Result<RankedList> {
    if k == 0 || k > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot rank {k} items from a pool of {}",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        pool.scores()[b]
            .total_cmp(&pool.scores()[a])
            .then(pool.item_ids()[a].cmp(&pool.item_ids()[b]))
    });
    RankedList::new(order[..k].iter().map(|&i| pool.item_ids()[i]).collect())
}

/// A uniformly random ordered selection of `k` pool items (partial
/// Fisher-Yates, so all `c!/(c-k)!` lists are equally likely).
pub fn uniform_random_list<R: Rng + ?Sized>(
    pool: &ScoredPool,
    k: usize,
    rng: &mut R,
) -> Result<RankedList> {
    if k == 0 || k > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot rank {k} items from a pool of {}",
            pool.len()
        )));
    }
    let mut ids = pool.item_ids().to_vec();
    for i in 0..k {
        let j = rng.gen_range(i..ids.len());
        ids.swap(i, j);
    }
    ids.truncate(k);
    RankedList::new(ids)
}

/// Epsilon-greedy list generation for a scored pool.
///
/// With probability `epsilon` the list is uniformly random (explored = true).
/// Otherwise `PgLearn` samples from Plackett-Luce over the scores — its
/// policy *is* stochastic — while the regression learners exploit greedily.
/// The exploration coin is always tossed first, so RNG consumption is
/// identical across learner kinds up to the list draw itself.
pub fn generate_results<R: Rng + ?Sized>(
    pool: &ScoredPool,
    k: usize,
    epsilon: f64,
    kind: LearnerKind,
    rng: &mut R,
) -> Result<(RankedList, bool)> {
    if !epsilon.is_finite() || !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    let explore = rng.gen::<f64>() < epsilon;
    let list = if explore {
        uniform_random_list(pool, k, rng)?
    } else {
        match kind {
            LearnerKind::PgLearn => pl_sample(pool, k, rng)?,
            LearnerKind::RegLearn | LearnerKind::OracleLearn => greedy_top_k(pool, k)?,
        }
    };
    Ok((list, explore))
}

/// Policy-gradient (REINFORCE) parameter gradients for a batch, averaged
/// over records.
///
/// The minimized objective is `-(1/B) * sum_r reward_r * ln P(list_r)`, so
/// the returned gradients point *against* reward. Every pool item of every
/// record contributes — items that were scored but not displayed carry
/// gradient too, because they appear in the Plackett-Luce denominators.
/// Exploration records participate like any other: the reward was earned by
/// the displayed list regardless of how it was chosen.
pub fn pg_batch_gradients(
    model: &ScoringModel,
    batch: &[InteractionRecord],
    use_reward_baseline: bool,
) -> Result<ParamSet> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument(
            "policy-gradient update needs a non-empty batch".into(),
        ));
    }
    let baseline = if use_reward_baseline {
        batch.iter().map(InteractionRecord::reward).sum::<f64>() / batch.len() as f64
    } else {
        0.0
    };
    let scale = 1.0 / batch.len() as f64;
    let mut grads = model.params().zeros_like();
    for record in batch {
        let score_grad = pl_log_prob_grad(record.pool(), record.list())?;
        let advantage = record.reward() - baseline;
        for (j, &g) in score_grad.iter().enumerate() {
            if g != 0.0 {
                model.backprop_into(
                    &record.features[j],
                    OutputGrad::Single {
                        query: record.query,
                        value: -advantage * g,
                    },
                    scale,
                    &mut grads,
                )?;
            }
        }
    }
    Ok(grads)
}

/// One policy-gradient Adam step on the model from a batch of interactions.
pub fn pg_update(
    model: &mut ScoringModel,
    adam: &mut AdamState,
    batch: &[InteractionRecord],
    use_reward_baseline: bool,
) -> Result<()> {
    let grads = pg_batch_gradients(model, batch, use_reward_baseline)?;
    model.adam_step(adam, &grads)
}

/// The regression learners' reward prediction for a displayed list:
/// `sum_i weights[i] * list_scores[i]`.
pub fn reg_predict(weights: &DiscountWeights, list_scores: &[f64]) -> Result<f64> {
    if list_scores.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            context: "list scores for reward prediction",
            expected: weights.len(),
            actual: list_scores.len(),
        });
    }
    Ok(weights
        .values()
        .iter()
        .zip(list_scores)
        .map(|(w, s)| w * s)
        .sum())
}

/// Gradients of the batch-averaged squared regression error
/// `(1/B) * sum_r 0.5 * (prediction_r - reward_r)^2` with respect to the
/// model parameters and the discount weights.
///
/// Returns `(model gradients, weight gradients, mean loss)`. The error
/// signal reaches the scorer only through the `k` displayed positions
/// (`dL/d score_i = err * w_i`) and reaches each weight through its
/// position's score (`dL/d w_i = err * s_i`).
pub fn reg_batch_gradients(
    model: &ScoringModel,
    weights: &DiscountWeights,
    batch: &[InteractionRecord],
) -> Result<(ParamSet, ParamSet, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument(
            "regression update needs a non-empty batch".into(),
        ));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut model_grads = model.params().zeros_like();
    let mut weight_grads = weights.params().zeros_like();
    let mut loss_sum = 0.0;
    for record in batch {
        let indices = record.list_indices();
        if indices.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                context: "displayed list length vs discount weights",
                expected: weights.len(),
                actual: indices.len(),
            });
        }
        let list_scores: Vec<f64> = indices.iter().map(|&i| record.pool.scores()[i]).collect();
        let error = reg_predict(weights, &list_scores)? - record.reward();
        loss_sum += 0.5 * error * error;
        let wg = &mut weight_grads.groups_mut()[0];
        for (pos, &s) in list_scores.iter().enumerate() {
            wg[pos] += scale * error * s;
        }
        for (pos, &i) in indices.iter().enumerate() {
            let value = error * weights.values()[pos];
            if value != 0.0 {
                model.backprop_into(
                    &record.features[i],
                    OutputGrad::Single {
                        query: record.query,
                        value,
                    },
                    scale,
                    &mut model_grads,
                )?;
            }
        }
    }
    Ok((model_grads, weight_grads, loss_sum * scale))
}

/// One RegLearn step: Adam-update both the scorer and the (trainable)
/// discount weights from the batch's squared prediction errors. Returns the
/// mean loss before the update.
pub fn reg_update(
    model: &mut ScoringModel,
    model_adam: &mut AdamState,
    weights: &mut DiscountWeights,
    weights_adam: &mut AdamState,
    batch: &[InteractionRecord],
) -> Result<f64> {
    if !weights.is_trainable() {
        return Err(Error::InvalidArgument(
            "reg_update requires trainable discount weights".into(),
        ));
    }
    let (model_grads, weight_grads, loss) = reg_batch_gradients(model, weights, batch)?;
    model.adam_step(model_adam, &model_grads)?;
    adam_step(&mut weights.params, weights_adam, &weight_grads)?;
    Ok(loss)
}

/// One OracleLearn step: like [`reg_update`], but the discount weights are
/// ground truth and stay frozen — only the scorer learns. Returns the mean
/// loss before the update.
pub fn oracle_update(
    model: &mut ScoringModel,
    model_adam: &mut AdamState,
    weights: &DiscountWeights,
    batch: &[InteractionRecord],
) -> Result<f64> {
    let (model_grads, _, loss) = reg_batch_gradients(model, weights, batch)?;
    model.adam_step(model_adam, &model_grads)?;
    Ok(loss)
}

/// A complete learning agent: configuration, scoring model, optimizer
/// state(s), and (for the regression learners) discount weights.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    model: ScoringModel,
    model_adam: AdamState,
    weights: Option<DiscountWeights>,
    weights_adam: Option<AdamState>,
}

impl Learner {
    /// Builds a learner with a freshly initialized scorer.
    ///
    /// `layer_sizes` runs from the feature dimension to the number of
    /// standing queries; `learning_rate` drives Adam for the model and (for
    /// RegLearn) the discount weights, which start at all ones.
    pub fn new(
        config: LearnerConfig,
        layer_sizes: &[usize],
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let model = ScoringModel::init(layer_sizes, seed)?;
        let model_adam = AdamState::new(model.params(), learning_rate)?;
        let (weights, weights_adam) = match config.kind {
            LearnerKind::PgLearn => (None, None),
            LearnerKind::RegLearn => {
                let weights = DiscountWeights::trainable_ones(config.k)?;
                let adam = AdamState::new(weights.params(), learning_rate)?;
                (Some(weights), Some(adam))
            }
            LearnerKind::OracleLearn => {
                let values = config
                    .oracle_weights
                    .clone()
                    .expect("validated: oraclelearn carries weights");
                (Some(DiscountWeights::fixed(values)?), None)
            }
        };
        Ok(Self {
            config,
            model,
            model_adam,
            weights,
            weights_adam,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn kind(&self) -> LearnerKind {
        self.config.kind
    }

    pub fn model(&self) -> &ScoringModel {
        &self.model
    }

    pub fn weights(&self) -> Option<&DiscountWeights> {
        self.weights.as_ref()
    }

    /// Epsilon-greedy list generation with this learner's policy.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        pool: &ScoredPool,
        rng: &mut R,
    ) -> Result<(RankedList, bool)> {
        generate_results(pool, self.config.k, self.config.epsilon, self.kind(), rng)
    }

    /// Consumes one batch of interaction records and updates all trainable
    /// parameters. Returns the mean regression loss for the regression
    /// learners, `None` for the policy-gradient learner (whose objective has
    /// no per-batch loss to report).
    pub fn update(&mut self, batch: &[InteractionRecord]) -> Result<Option<f64>> {
        match self.config.kind {
            LearnerKind::PgLearn => {
                pg_update(
                    &mut self.model,
                    &mut self.model_adam,
                    batch,
                    self.config.use_reward_baseline,
                )?;
                Ok(None)
            }
            LearnerKind::RegLearn => {
                let weights = self.weights.as_mut().expect("reglearn has weights");
                let weights_adam = self
                    .weights_adam
                    .as_mut()
                    .expect("reglearn has a weight optimizer");
                reg_update(
                    &mut self.model,
                    &mut self.model_adam,
                    weights,
                    weights_adam,
                    batch,
                )
                .map(Some)
            }
            LearnerKind::OracleLearn => {
                let weights = self.weights.as_ref().expect("oraclelearn has weights");
                oracle_update(&mut self.model, &mut self.model_adam, weights, batch).map(Some)
            }
        }
    }

    /// Snapshot of everything needed to resume this learner.
    pub fn to_checkpoint(&self, batches_done: u64) -> LearnerCheckpoint {
        LearnerCheckpoint {
            config: self.config.clone(),
            model: self.model.clone(),
            model_adam: self.model_adam.clone(),
            weights: self.weights.clone(),
            weights_adam: self.weights_adam.clone(),
            batches_done,
        }
    }

    /// Rebuilds a learner from a checkpoint, re-validating every invariant
    /// the constructor would have enforced. Returns the learner and the
    /// number of batches it had completed.
    pub fn from_checkpoint(checkpoint: LearnerCheckpoint) -> Result<(Self, u64)> {
        let LearnerCheckpoint {
            config,
            model,
            model_adam,
            weights,
            weights_adam,
            batches_done,
        } = checkpoint;
        config.validate()?;
        model.validate()?;
        model_adam.validate_for(model.params())?;
        match (config.kind, &weights, &weights_adam) {
            (LearnerKind::PgLearn, None, None) => {}
            (LearnerKind::RegLearn, Some(w), Some(wa)) => {
                if w.len() != config.k || !w.is_trainable() {
                    return Err(Error::InvalidArgument(
                        "checkpointed reglearn weights are malformed".into(),
                    ));
                }
                wa.validate_for(w.params())?;
            }
            (LearnerKind::OracleLearn, Some(w), None) => {
                if w.len() != config.k || w.is_trainable() {
                    return Err(Error::InvalidArgument(
                        "checkpointed oraclelearn weights are malformed".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint weight slots do not match learner kind {}",
                    config.kind
                )));
            }
        }
        Ok((
            Self {
                config,
                model,
                model_adam,
                weights,
                weights_adam,
            },
            batches_done,
        ))
    }
}

/// Serializable snapshot of a [`Learner`] plus its training progress.
///
/// Round-trips through JSON bit-exactly: every `f64` is preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerCheckpoint {
    pub config: LearnerConfig,
    pub model: ScoringModel,
    pub model_adam: AdamState,
    pub weights: Option<DiscountWeights>,
    pub weights_adam: Option<AdamState>,
    pub batches_done: u64,
}
