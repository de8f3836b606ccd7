//! The Plackett-Luce distribution over ranked lists.
//!
//! Given a pool of candidate items with real-valued scores, Plackett-Luce
//! builds a length-`k` list by repeatedly drawing the next item from a
//! softmax over the items *not yet placed*. The probability of a concrete
//! list is therefore a product of `k` softmax terms whose denominators shrink
//! as items are consumed:
//!
//! ```text
//! P(list | scores) = prod_{i=1}^{k}  exp(s_{l_i}) / sum_{j in remaining_i} exp(s_j)
//! ```
//!
//! where `remaining_i` is the whole pool minus the items placed before
//! position `i`. Summing `P` over every possible length-`k` ordering of the
//! pool yields exactly 1, for any `k` up to the pool size.
//!
//! All three operations here — exact probability, sampling, and the gradient
//! of the log-probability with respect to the scores — share that definition,
//! so sampled frequencies converge to `pl_probability` and the gradient is
//! the exact derivative of its logarithm. Every softmax is computed with a
//! per-stage max shift, which keeps results finite for arbitrarily wide score
//! ranges.

use rand::Rng;

use crate::{Error, Result};

/// A candidate pool: distinct item ids paired with their finite scores.
///
/// The pool fixes the universe (and the indexing) for all Plackett-Luce
/// operations; gradients are reported in pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPool {
    item_ids: Vec<usize>,
    scores: Vec<f64>,
}

impl ScoredPool {
    /// Builds a pool, rejecting empty input, mismatched lengths, duplicate
    /// ids, and non-finite scores.
    pub fn new(item_ids: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if item_ids.is_empty() {
            return Err(Error::InvalidArgument("candidate pool is empty".into()));
        }
        if item_ids.len() != scores.len() {
            return Err(Error::ShapeMismatch {
                context: "pool scores",
                expected: item_ids.len(),
                actual: scores.len(),
            });
        }
        if !scores.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFinite {
                context: "pool scores",
            });
        }
        let mut sorted = item_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "candidate pool contains duplicate item ids".into(),
            ));
        }
        Ok(Self { item_ids, scores })
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn item_ids(&self) -> &[usize] {
        &self.item_ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Position of `item_id` within the pool, if present.
    pub fn index_of(&self, item_id: usize) -> Option<usize> {
        self.item_ids.iter().position(|&id| id == item_id)
    }
}

/// An ordered list of distinct item ids, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    items: Vec<usize>,
}

impl RankedList {
    /// Builds a ranked list, rejecting empty lists and repeated items.
    pub fn new(items: Vec<usize>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("ranked list is empty".into()));
        }
        let mut sorted = items.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "ranked list repeats an item".into(),
            ));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Resolves each listed item to its pool index, validating membership and
/// that the list is not longer than the pool.
fn list_pool_indices(pool: &ScoredPool, list: &RankedList) -> Result<Vec<usize>> {
    if list.len() > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "ranked list has {} items but the pool only {}",
            list.len(),
            pool.len()
        )));
    }
    list.items()
        .iter()
        .map(|&id| {
            pool.index_of(id).ok_or_else(|| {
                Error::InvalidArgument(format!("listed item {id} is not in the pool"))
            })
        })
        .collect()
}

/// Exact probability of drawing `list` from `pool` under Plackett-Luce.
///
/// Computed stage by stage with a max-shifted softmax, so extreme score gaps
/// produce probabilities that saturate at 0 or 1 instead of overflowing.
pub fn pl_probability(pool: &ScoredPool, list: &RankedList) -> Result<f64> {
    let chosen = list_pool_indices(pool, list)?;
    let scores = pool.scores();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut probability = 1.0;
    for &pick in &chosen {
        let max = remaining
            .iter()
            .map(|&j| scores[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = remaining.iter().map(|&j| (scores[j] - max).exp()).sum();
        probability *= (scores[pick] - max).exp() / total;
        let slot = remaining
            .iter()
            .position(|&j| j == pick)
            .expect("chosen index is still remaining: the list has no duplicates");
        remaining.swap_remove(slot);
    }
    Ok(probability)
}

/// Draws a length-`k` list from `pool` by sequential softmax sampling
/// without replacement.
pub fn pl_sample<R: Rng + ?Sized>(pool: &ScoredPool, k: usize, rng: &mut R) -> Result<RankedList> {
    if k == 0 || k > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample a list of {k} from a pool of {}",
            pool.len()
        )));
    }
    let scores = pool.scores();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let max = remaining
            .iter()
            .map(|&j| scores[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = remaining.iter().map(|&j| (scores[j] - max).exp()).sum();
        // total >= 1 because the max-shifted weights include exp(0); the
        // threshold u * total is strictly below the accumulated total, so the
        // walk always terminates on a remaining item.
        let threshold = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut slot = remaining.len() - 1;
        for (s, &j) in remaining.iter().enumerate() {
            acc += (scores[j] - max).exp();
            if acc > threshold {
                slot = s;
                break;
            }
        }
        picked.push(pool.item_ids()[remaining[slot]]);
        remaining.swap_remove(slot);
    }
    RankedList::new(picked)
}

/// Gradient of `ln pl_probability(pool, list)` with respect to the pool
/// scores, in pool order.
///
/// For each of the `k` placement stages, every still-remaining item `j`
/// contributes `-softmax_stage(j)`, and the item actually placed contributes
/// an additional `+1`. Items never remaining at a stage (already placed)
/// receive nothing from it, so the components over the whole pool always sum
/// to zero.
pub fn pl_log_prob_grad(pool: &ScoredPool, list: &RankedList) -> Result<Vec<f64>> {
    let chosen = list_pool_indices(pool, list)?;
    let scores = pool.scores();
    let mut grad = vec![0.0; pool.len()];
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut weights = Vec::with_capacity(pool.len());
    for &pick in &chosen {
        let max = remaining
            .iter()
            .map(|&j| scores[j])
            .fold(f64::NEG_INFINITY, f64::max);
        weights.clear();
        weights.extend(remaining.iter().map(|&j| (scores[j] - max).exp()));
        let total: f64 = weights.iter().sum();
        for (&j, &w) in remaining.iter().zip(&weights) {
            grad[j] -= w / total;
        }
        grad[pick] += 1.0;
        let slot = remaining
            .iter()
            .position(|&j| j == pick)
            .expect("chosen index is still remaining: the list has no duplicates");
        remaining.swap_remove(slot);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(scores: &[f64]) -> ScoredPool {
        ScoredPool::new((0..scores.len()).collect(), scores.to_vec()).unwrap()
    }

    /// All ordered selections of `k` out of `n` pool items (as id vectors).
    fn all_lists(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn extend(prefix: &mut Vec<usize>, n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == k {
                out.push(prefix.clone());
                return;
            }
            for id in 0..n {
                if !prefix.contains(&id) {
                    prefix.push(id);
                    extend(prefix, n, k, out);
                    prefix.pop();
                }
            }
        }
        let mut out = Vec::new();
        extend(&mut Vec::new(), n, k, &mut out);
        out
    }

    #[test]
    fn two_item_probabilities_match_hand_calculation() {
        // Scores (ln 3, 0): the first item wins the top spot with odds 3:1.
        let p = pool(&[3.0f64.ln(), 0.0]);
        let best_first = RankedList::new(vec![0, 1]).unwrap();
        let worst_first = RankedList::new(vec![1, 0]).unwrap();
        assert_relative_eq!(
            pl_probability(&p, &best_first).unwrap(),
            0.75,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            pl_probability(&p, &worst_first).unwrap(),
            0.25,
            max_relative = 1e-12
        );
    }

    #[test]
    fn probabilities_sum_to_one_over_all_orderings() {
        let p = pool(&[0.3, -1.2, 2.0, 0.0, 0.77]);
        for k in 1..=5 {
            let total: f64 = all_lists(5, k)
                .into_iter()
                .map(|ids| pl_probability(&p, &RankedList::new(ids).unwrap()).unwrap())
                .sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn length_one_lists_reduce_to_softmax() {
        let scores = [0.1, 1.4, -0.3];
        let p = pool(&scores);
        let exp_sum: f64 = scores.iter().map(|s| s.exp()).sum();
        for id in 0..3 {
            let list = RankedList::new(vec![id]).unwrap();
            assert_relative_eq!(
                pl_probability(&p, &list).unwrap(),
                scores[id].exp() / exp_sum,
                max_relative = 1e-12
            );
            let grad = pl_log_prob_grad(&p, &list).unwrap();
            for j in 0..3 {
                let softmax_j = scores[j].exp() / exp_sum;
                let indicator = if j == id { 1.0 } else { 0.0 };
                assert_relative_eq!(grad[j], indicator - softmax_j, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn probability_is_invariant_to_score_shifts() {
        let base = [0.5, -0.25, 1.75, 0.0];
        let list = RankedList::new(vec![2, 0, 3]).unwrap();
        let reference = pl_probability(&pool(&base), &list).unwrap();
        for shift in [-700.0, -3.0, 123.456, 690.0] {
            let shifted: Vec<f64> = base.iter().map(|s| s + shift).collect();
            assert_relative_eq!(
                pl_probability(&pool(&shifted), &list).unwrap(),
                reference,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn extreme_score_gaps_saturate_without_overflow() {
        let p = pool(&[1e308, 0.0, -1e308]);
        let dominant = RankedList::new(vec![0, 1, 2]).unwrap();
        let hopeless = RankedList::new(vec![2, 1, 0]).unwrap();
        assert_relative_eq!(pl_probability(&p, &dominant).unwrap(), 1.0);
        assert_eq!(pl_probability(&p, &hopeless).unwrap(), 0.0);
        let grad = pl_log_prob_grad(&p, &dominant).unwrap();
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn sampling_frequencies_track_exact_probabilities() {
        // Quick consistency check; the strict large-sample version lives in
        // the acceptance suite.
        let p = pool(&[0.9, 0.1, -0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let draws = 20_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let list = pl_sample(&p, 2, &mut rng).unwrap();
            *counts.entry(list.items().to_vec()).or_insert(0usize) += 1;
        }
        let mut tv = 0.0;
        for ids in all_lists(3, 2) {
            let exact = pl_probability(&p, &RankedList::new(ids.clone()).unwrap()).unwrap();
            let observed = *counts.get(&ids).unwrap_or(&0) as f64 / draws as f64;
            tv += 0.5 * (exact - observed).abs();
        }
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn sampler_is_deterministic_given_the_rng() {
        let p = pool(&[0.2, 0.4, -1.0, 0.0, 2.2]);
        let draw = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10)
                .map(|_| pl_sample(&p, 3, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn gradient_matches_finite_differences_of_log_probability() {
        let scores = [0.25, -0.9, 1.3, 0.0, 0.6];
        let list = RankedList::new(vec![3, 0, 4]).unwrap();
        let grad = pl_log_prob_grad(&pool(&scores), &list).unwrap();
        let h = 1e-6;
        for j in 0..scores.len() {
            let mut plus = scores.to_vec();
            plus[j] += h;
            let mut minus = scores.to_vec();
            minus[j] -= h;
            let numeric = (pl_probability(&pool(&plus), &list).unwrap().ln()
                - pl_probability(&pool(&minus), &list).unwrap().ln())
                / (2.0 * h);
            assert_relative_eq!(grad[j], numeric, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn gradient_components_sum_to_zero() {
        let scores = [1.1, 0.4, -0.2, 0.9, 0.0, -1.5];
        for k in 1..=6 {
            let list = RankedList::new((0..k).collect()).unwrap();
            let grad = pl_log_prob_grad(&pool(&scores), &list).unwrap();
            let sum: f64 = grad.iter().sum();
            assert!(sum.abs() < 1e-12, "k = {k}: gradient sum {sum}");
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(ScoredPool::new(vec![], vec![]).is_err());
        assert!(ScoredPool::new(vec![1, 1], vec![0.0, 0.0]).is_err());
        assert!(ScoredPool::new(vec![1, 2], vec![0.0]).is_err());
        assert!(ScoredPool::new(vec![1, 2], vec![0.0, f64::NAN]).is_err());
        assert!(RankedList::new(vec![]).is_err());
        assert!(RankedList::new(vec![3, 3]).is_err());

        let p = pool(&[0.0, 1.0]);
        let foreign = RankedList::new(vec![0, 7]).unwrap();
        assert!(pl_probability(&p, &foreign).is_err());
        assert!(pl_log_prob_grad(&p, &foreign).is_err());
        let too_long = RankedList::new(vec![0, 1, 2]).unwrap();
        assert!(pl_probability(&p, &too_long).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(pl_sample(&p, 0, &mut rng).is_err());
        assert!(pl_sample(&p, 3, &mut rng).is_err());
    }
}
