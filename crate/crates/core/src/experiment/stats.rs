//! Significance testing and learned-weight analysis.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Result of a two-tailed Welch t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestOutcome {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

impl TTestOutcome {
    pub fn significant_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn mean_and_variance(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let variance = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, variance)
}

/// Two-tailed Welch (unequal-variance) t-test for a difference in means.
///
/// Welch's variant is the safer default when nothing is known about the two
/// variances, and it coincides with the pooled-variance Student test when
/// they happen to be equal. Each sample needs at least two values and
/// nonzero variance; otherwise the statistic is undefined and an error is
/// returned.
pub fn t_test_two_tailed(a: &[f64], b: &[f64]) -> Result<TTestOutcome> {
    for (name, sample) in [("first", a), ("second", b)] {
        if sample.len() < 2 {
            return Err(Error::DegenerateStatistics(format!(
                "{name} sample has {} values; the t-test needs at least 2",
                sample.len()
            )));
        }
        if !sample.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "t-test sample",
            });
        }
    }
    let (mean_a, var_a) = mean_and_variance(a);
    let (mean_b, var_b) = mean_and_variance(b);
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateStatistics(
            "a sample has zero variance; the t-statistic is undefined".into(),
        ));
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let sa = var_a / na;
    let sb = var_b / nb;
    let t_statistic = (mean_a - mean_b) / (sa + sb).sqrt();
    let degrees_of_freedom =
        (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, degrees_of_freedom).map_err(|e| {
        Error::DegenerateStatistics(format!("invalid t-distribution ({degrees_of_freedom} df): {e}"))
    })?;
    let p_value = (2.0 * (1.0 - dist.cdf(t_statistic.abs()))).clamp(0.0, 1.0);
    Ok(TTestOutcome {
        t_statistic,
        degrees_of_freedom,
        p_value,
    })
}

/// How a learned discount-weight vector relates to the ground-truth position
/// profile of the feedback process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightComparison {
    /// Euclidean distance between the two vectors.
    pub euclidean_distance: f64,
    /// Whether the learned weights strictly decrease with position — the
    /// qualitative signature of a position effect.
    pub strictly_decreasing: bool,
    /// Whether sorting positions by learned weight reproduces the
    /// ground-truth order exactly.
    pub order_matches: bool,
}

/// Compares learned discount weights against ground truth (see
/// [`WeightComparison`]).
pub fn weight_distance(learned: &[f64], ground_truth: &[f64]) -> Result<WeightComparison> {
    if learned.len() != ground_truth.len() {
        return Err(Error::ShapeMismatch {
            context: "weight vectors",
            expected: ground_truth.len(),
            actual: learned.len(),
        });
    }
    if learned.is_empty() {
        return Err(Error::InvalidArgument(
            "weight vectors must not be empty".into(),
        ));
    }
    if !learned.iter().chain(ground_truth).all(|w| w.is_finite()) {
        return Err(Error::NonFinite {
            context: "weight vectors",
        });
    }
    let euclidean_distance = learned
        .iter()
        .zip(ground_truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let strictly_decreasing = learned.windows(2).all(|w| w[0] > w[1]);
    let order_matches = descending_order(learned) == descending_order(ground_truth);
    Ok(WeightComparison {
        euclidean_distance,
        strictly_decreasing,
        order_matches,
    })
}

/// Position indices sorted by value descending (ties by position).
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
}
