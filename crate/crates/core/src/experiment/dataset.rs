//! Synthetic retrieval corpus with planted query structure.
//!
//! Each standing query gets a prototype direction in feature space; the
//! prototypes are random unit vectors kept at least 60 degrees apart so
//! queries stay distinguishable. Every item is relevant to one query (or,
//! with some probability, two), and its feature vector is the mean of its
//! queries' prototypes plus isotropic Gaussian noise. Items are split
//! 80/20 into train and test, stratified by their first drawn query, so both
//! splits retain relevant items for every query.
//!
//! The construction makes relevance *learnable from features by design* — a
//! nearest-prototype rule already recovers most relevance sets — which is
//! exactly what a learned scorer needs if list-level rewards are to teach it
//! anything.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scorer::FeatureVector;
use crate::{Error, Result};

/// Knobs for [`generate_synthetic_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    /// Number of standing queries (`m`).
    pub num_queries: usize,
    /// Corpus size (`n`).
    pub num_items: usize,
    /// Feature dimension (`d`).
    pub feature_dim: usize,
    /// Probability that an item is relevant to two queries instead of one.
    pub multi_relevance_prob: f64,
    /// Standard deviation of the additive feature noise.
    pub noise_scale: f64,
    /// Fewest relevant items any query may have in either split; generation
    /// fails loudly if the corpus comes out thinner.
    pub min_relevant_per_split: usize,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            num_queries: 10,
            num_items: 2000,
            feature_dim: 16,
            multi_relevance_prob: 0.2,
            noise_scale: 0.3,
            min_relevant_per_split: 5,
        }
    }
}

impl DatasetParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_queries < 2 {
            return Err(Error::InvalidArgument(
                "need at least two standing queries".into(),
            ));
        }
        if self.num_items == 0 {
            return Err(Error::InvalidArgument("corpus must not be empty".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidArgument(
                "features need at least one dimension".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.multi_relevance_prob) {
            return Err(Error::InvalidArgument(format!(
                "multi-relevance probability {} is not a probability",
                self.multi_relevance_prob
            )));
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise scale must be finite and non-negative, got {}",
                self.noise_scale
            )));
        }
        if self.min_relevant_per_split == 0 {
            return Err(Error::InvalidArgument(
                "each query needs at least one relevant item per split".into(),
            ));
        }
        Ok(())
    }
}

/// One corpus item: its feature vector and the queries it is relevant to.
#[derive(Debug, Clone)]
pub struct Item {
    id: usize,
    feature: FeatureVector,
    relevant: Vec<usize>,
}

impl Item {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn feature(&self) -> &FeatureVector {
        &self.feature
    }

    /// Queries this item is relevant to (first entry drove the train/test
    /// stratification).
    pub fn relevant_queries(&self) -> &[usize] {
        &self.relevant
    }

    pub fn is_relevant_to(&self, query: usize) -> bool {
        self.relevant.contains(&query)
    }
}

/// The two halves of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// A generated corpus: items, their relevance, the train/test partition, and
/// per-split relevance indexes.
#[derive(Debug, Clone)]
pub struct Dataset {
    params: DatasetParams,
    prototypes: Vec<Vec<f64>>,
    items: Vec<Item>,
    train_ids: Vec<usize>,
    test_ids: Vec<usize>,
    train_relevant: Vec<Vec<usize>>,
    test_relevant: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn params(&self) -> &DatasetParams {
        &self.params
    }

    pub fn num_queries(&self) -> usize {
        self.params.num_queries
    }

    pub fn feature_dim(&self) -> usize {
        self.params.feature_dim
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: usize) -> &Item {
        &self.items[id]
    }

    /// The per-query prototype directions (unit vectors).
    pub fn prototypes(&self) -> &[Vec<f64>] {
        &self.prototypes
    }

    /// Item ids belonging to `split`, in ascending order of assignment.
    pub fn split_ids(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train_ids,
            Split::Test => &self.test_ids,
        }
    }

    /// Ids of the items in `split` relevant to `query`, ascending.
    pub fn relevant_in_split(&self, split: Split, query: usize) -> &[usize] {
        match split {
            Split::Train => &self.train_relevant[query],
            Split::Test => &self.test_relevant[query],
        }
    }

    pub fn is_relevant(&self, item_id: usize, query: usize) -> bool {
        self.items[item_id].is_relevant_to(query)
    }

    /// Re-asserts the dataset invariants: the splits partition the corpus
    /// (disjoint and exhaustive), every item is relevant to at least one
    /// query, and every query keeps at least `min_relevant_per_split`
    /// relevant items in each split.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![0u8; self.items.len()];
        for &id in self.train_ids.iter().chain(&self.test_ids) {
            if id >= self.items.len() || seen[id] > 0 {
                return Err(Error::DatasetGeneration(format!(
                    "item {id} appears in more than one split"
                )));
            }
            seen[id] = 1;
        }
        if self.train_ids.len() + self.test_ids.len() != self.items.len() {
            return Err(Error::DatasetGeneration(
                "splits do not cover the corpus".into(),
            ));
        }
        if self.items.iter().any(|item| item.relevant.is_empty()) {
            return Err(Error::DatasetGeneration(
                "an item is relevant to no query".into(),
            ));
        }
        for query in 0..self.params.num_queries {
            for (split, name) in [(Split::Train, "train"), (Split::Test, "test")] {
                let have = self.relevant_in_split(split, query).len();
                if have < self.params.min_relevant_per_split {
                    return Err(Error::DatasetGeneration(format!(
                        "query {query} has only {have} relevant items in the {name} split \
                         (need at least {})",
                        self.params.min_relevant_per_split
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How many resampling attempts to spend on placing one prototype before
/// declaring the configuration infeasible.
const PROTOTYPE_ATTEMPTS: usize = 10_000;

/// Generates a corpus from `params`, deterministically in `seed`.
///
/// Fails with a diagnostic when the constraints cannot be met — for example
/// when `num_items` is too small for every query to keep
/// `min_relevant_per_split` relevant items in both splits, or when
/// `num_queries` unit vectors cannot be kept 60 degrees apart in
/// `feature_dim` dimensions.
pub fn generate_synthetic_dataset(params: &DatasetParams, seed: u64) -> Result<Dataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = params.num_queries;
    let d = params.feature_dim;

    // Prototype directions: random unit vectors, resampled until each is at
    // least 60 degrees (cosine <= 0.5) from all earlier ones.
    let mut prototypes: Vec<Vec<f64>> = Vec::with_capacity(m);
    for query in 0..m {
        let mut placed = false;
        for _ in 0..PROTOTYPE_ATTEMPTS {
            let candidate = random_unit_vector(d, &mut rng);
            let separated = prototypes
                .iter()
                .all(|p| dot(p, &candidate) <= 0.5 + 1e-12);
            if separated {
                prototypes.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::DatasetGeneration(format!(
                "could not place prototype {query} of {m} with pairwise angle >= 60 degrees \
                 in {d} dimensions; reduce num_queries or raise feature_dim"
            )));
        }
    }

    // Items: relevance set first, then feature = prototype mean + noise.
    let mut items = Vec::with_capacity(params.num_items);
    for id in 0..params.num_items {
        let mut relevant = vec![rng.gen_range(0..m)];
        if rng.gen::<f64>() < params.multi_relevance_prob {
            loop {
                let second = rng.gen_range(0..m);
                if second != relevant[0] {
                    relevant.push(second);
                    break;
                }
            }
        }
        let mut feature = vec![0.0; d];
        for &q in &relevant {
            for (f, p) in feature.iter_mut().zip(&prototypes[q]) {
                *f += p / relevant.len() as f64;
            }
        }
        for f in feature.iter_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            *f += params.noise_scale * noise;
        }
        items.push(Item {
            id,
            feature: FeatureVector::new(feature)?,
            relevant,
        });
    }

    // 80/20 split, stratified by each item's first query so no query gets
    // starved on either side.
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
    for item in &items {
        groups[item.relevant[0]].push(item.id);
    }
    let mut train_ids = Vec::new();
    let mut test_ids = Vec::new();
    for group in &mut groups {
        group.shuffle(&mut rng);
        let train_count = (group.len() as f64 * 0.8).round() as usize;
        train_ids.extend_from_slice(&group[..train_count]);
        test_ids.extend_from_slice(&group[train_count..]);
    }
    train_ids.sort_unstable();
    test_ids.sort_unstable();

    let mut train_relevant = vec![Vec::new(); m];
    for &id in &train_ids {
        for &q in &items[id].relevant {
            train_relevant[q].push(id);
        }
    }
    let mut test_relevant = vec![Vec::new(); m];
    for &id in &test_ids {
        for &q in &items[id].relevant {
            test_relevant[q].push(id);
        }
    }

    let dataset = Dataset {
        params: params.clone(),
        prototypes,
        items,
        train_ids,
        test_ids,
        train_relevant,
        test_relevant,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// One simulated arrival: a standing query and a candidate pool of distinct
/// item ids from one split. Features and relevance are looked up in the
/// dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub query: usize,
    pub pool_ids: Vec<usize>,
}

/// Draws one interaction: a uniformly random standing query and `pool_size`
/// distinct items drawn uniformly from `split`.
///
/// If the pool happens to contain nothing relevant to the query, one
/// uniformly chosen slot is replaced by a uniformly chosen relevant item
/// from the split, so every returned pool supports a non-degenerate nDCG.
pub fn sample_interaction<R: Rng + ?Sized>(
    dataset: &Dataset,
    split: Split,
    pool_size: usize,
    rng: &mut R,
) -> Result<Interaction> {
    let split_ids = dataset.split_ids(split);
    if pool_size == 0 || pool_size > split_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw a pool of {pool_size} from a split of {}",
            split_ids.len()
        )));
    }
    let query = rng.gen_range(0..dataset.num_queries());
    let mut pool_ids: Vec<usize> = Vec::with_capacity(pool_size);
    while pool_ids.len() < pool_size {
        let id = split_ids[rng.gen_range(0..split_ids.len())];
        if !pool_ids.contains(&id) {
            pool_ids.push(id);
        }
    }
    if !pool_ids.iter().any(|&id| dataset.is_relevant(id, query)) {
        let relevant = dataset.relevant_in_split(split, query);
        if relevant.is_empty() {
            return Err(Error::DatasetGeneration(format!(
                "query {query} has no relevant items in the split"
            )));
        }
        let slot = rng.gen_range(0..pool_size);
        pool_ids[slot] = relevant[rng.gen_range(0..relevant.len())];
    }
    Ok(Interaction { query, pool_ids })
}

fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
