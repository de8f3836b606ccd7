//! List-level feedback simulators.
//!
//! The learners in this crate never see per-document labels. Each displayed
//! list earns a single scalar:
//!
//! - **nDCG@k** — idealized judge feedback: discounted cumulative gain of the
//!   shown list, normalized by the best achievable gain given how many
//!   relevant items exist in the candidate pool.
//! - **Click-through count** — behavioral feedback from a position-based
//!   click model (PBM): a user examines position `i` with probability
//!   `examination[i]` and clicks an examined item with a probability that
//!   depends only on the item's relevance. The feedback is the raw number of
//!   clicks on the list.
//!
//! Binary relevance throughout: a [`RelevanceJudgment`] holds one `bool` per
//! displayed position.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

/// Per-position binary relevance of a displayed list (index 0 = top).
pub type RelevanceJudgment = Vec<bool>;

/// Examination probabilities by display position, estimated from large-scale
/// search logs; position 1 is almost always seen, position 5 under half the
/// time. This fixes the maximum supported list length for click simulation
/// at 5.
pub const STANDARD_EXAMINATION: [f64; 5] = [0.999, 0.959, 0.761, 0.592, 0.457];

/// The position discounts `1 / log2(i + 1)` used by DCG, for positions
/// `1..=k`.
pub fn dcg_discounts(k: usize) -> Vec<f64> {
    (1..=k).map(|i| 1.0 / ((i + 1) as f64).log2()).collect()
}

/// nDCG@k of a displayed list.
///
/// `list_relevances` holds the binary relevance of each shown position (so
/// its length must be `k`), and `num_relevant_in_pool` the number of relevant
/// items that existed in the candidate pool the list was drawn from. The
/// ideal ranking packs `min(k, num_relevant_in_pool)` relevant items at the
/// top, which keeps the score in `[0, 1]` even when the pool cannot fill the
/// whole list with relevant items.
pub fn ndcg_at_k(
    list_relevances: &[bool],
    num_relevant_in_pool: usize,
    k: usize,
) -> Result<f64> {
    if list_relevances.len() != k {
        return Err(Error::ShapeMismatch {
            context: "list relevances",
            expected: k,
            actual: list_relevances.len(),
        });
    }
    if num_relevant_in_pool == 0 {
        return Err(Error::DegenerateStatistics(
            "nDCG is undefined for a pool with no relevant items".into(),
        ));
    }
    let shown_relevant = list_relevances.iter().filter(|&&r| r).count();
    if shown_relevant > num_relevant_in_pool {
        return Err(Error::InvalidArgument(format!(
            "list shows {shown_relevant} relevant items but the pool only held {num_relevant_in_pool}"
        )));
    }
    let discounts = dcg_discounts(k);
    let dcg: f64 = discounts
        .iter()
        .zip(list_relevances)
        .map(|(d, &rel)| if rel { *d } else { 0.0 })
        .sum();
    let ideal: f64 = discounts[..k.min(num_relevant_in_pool)].iter().sum();
    Ok(dcg / ideal)
}

/// Parameters of a position-based click model.
///
/// A user examines position `i` with probability `examination[i]`,
/// independently of the items; an examined item attracts a click with
/// probability `p_attract_relevant` or `p_attract_irrelevant` according to
/// its relevance. The gap between the two attraction probabilities controls
/// how informative clicks are, and their absolute level controls click
/// volume (noise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickConfig {
    name: String,
    p_attract_relevant: f64,
    p_attract_irrelevant: f64,
    examination: Vec<f64>,
}

/// The three built-in user models: `perfect` clicks every examined relevant
/// item and nothing else; `locating` is slightly noisy; `entertaining`
/// clicks relevant items barely more often than irrelevant ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinClickModel {
    Perfect,
    Locating,
    Entertaining,
}

impl std::str::FromStr for BuiltinClickModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(Self::Perfect),
            "locating" => Ok(Self::Locating),
            "entertaining" => Ok(Self::Entertaining),
            other => Err(Error::InvalidArgument(format!(
                "unknown click model '{other}' (expected perfect, locating, or entertaining)"
            ))),
        }
    }
}

impl std::fmt::Display for BuiltinClickModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Perfect => "perfect",
            Self::Locating => "locating",
            Self::Entertaining => "entertaining",
        })
    }
}

/// On-disk shape of one click-model section in a TOML config file.
#[derive(Debug, Deserialize)]
struct RawClickConfig {
    p_attract_relevant: f64,
    p_attract_irrelevant: f64,
    /// Defaults to [`STANDARD_EXAMINATION`] when omitted.
    examination: Option<Vec<f64>>,
}

impl ClickConfig {
    /// Builds a click configuration, validating that every probability lies
    /// in `[0, 1]` and that at least one position can be examined.
    pub fn new(
        name: impl Into<String>,
        p_attract_relevant: f64,
        p_attract_irrelevant: f64,
        examination: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if examination.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "click config '{name}' has an empty examination curve"
            )));
        }
        let mut probs = vec![
            ("p_attract_relevant", p_attract_relevant),
            ("p_attract_irrelevant", p_attract_irrelevant),
        ];
        probs.extend(examination.iter().map(|&e| ("examination", e)));
        for (what, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "click config '{name}': {what} = {p} is not a probability"
                )));
            }
        }
        Ok(Self {
            name,
            p_attract_relevant,
            p_attract_irrelevant,
            examination,
        })
    }

    /// One of the built-in user models, with the standard examination curve.
    pub fn builtin(model: BuiltinClickModel) -> Self {
        let (p_rel, p_irr) = match model {
            BuiltinClickModel::Perfect => (1.0, 0.0),
            BuiltinClickModel::Locating => (0.95, 0.05),
            BuiltinClickModel::Entertaining => (0.9, 0.4),
        };
        Self::new(model.to_string(), p_rel, p_irr, STANDARD_EXAMINATION.to_vec())
            .expect("built-in click models are valid")
    }

    /// Loads the section called `name` from a TOML click-model file.
    ///
    /// Each section defines `p_attract_relevant`, `p_attract_irrelevant`,
    /// and optionally its own `examination` curve:
    ///
    /// ```toml
    /// [skimmer]
    /// p_attract_relevant = 0.7
    /// p_attract_irrelevant = 0.1
    /// examination = [1.0, 0.5, 0.25]
    /// ```
    pub fn from_file(path: &Path, name: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sections: BTreeMap<String, RawClickConfig> = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let raw = sections.get(name).ok_or_else(|| {
            Error::Config(format!(
                "{} defines no click model named '{name}' (found: {})",
                path.display(),
                sections.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        Self::new(
            name,
            raw.p_attract_relevant,
            raw.p_attract_irrelevant,
            raw.examination
                .clone()
                .unwrap_or_else(|| STANDARD_EXAMINATION.to_vec()),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p_attract_relevant(&self) -> f64 {
        self.p_attract_relevant
    }

    pub fn p_attract_irrelevant(&self) -> f64 {
        self.p_attract_irrelevant
    }

    pub fn examination(&self) -> &[f64] {
        &self.examination
    }

    /// Longest list this configuration can simulate clicks for.
    pub fn max_positions(&self) -> usize {
        self.examination.len()
    }
}

/// Simulates one user's clicks on a displayed list under the PBM.
///
/// Position `i` is clicked with probability
/// `examination[i] * p_attract(relevance[i])`, independently across
/// positions. One uniform draw is consumed per position regardless of the
/// outcome, so RNG consumption does not leak the relevance pattern.
pub fn simulate_clicks_pbm<R: Rng + ?Sized>(
    list_relevances: &[bool],
    config: &ClickConfig,
    rng: &mut R,
) -> Result<Vec<bool>> {
    if list_relevances.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot simulate clicks on an empty list".into(),
        ));
    }
    if list_relevances.len() > config.max_positions() {
        return Err(Error::InvalidArgument(format!(
            "list has {} positions but click config '{}' only models {}",
            list_relevances.len(),
            config.name,
            config.max_positions()
        )));
    }
    Ok(list_relevances
        .iter()
        .zip(&config.examination)
        .map(|(&rel, &exam)| {
            let attract = if rel {
                config.p_attract_relevant
            } else {
                config.p_attract_irrelevant
            };
            rng.gen::<f64>() < exam * attract
        })
        .collect())
}

/// The list-level reward extracted from a click vector: the raw click count.
///
/// Deliberately *not* normalized — a list that earns more clicks is worth
/// more, and the learners consume the value as-is.
pub fn ctr_feedback(clicks: &[bool]) -> f64 {
    clicks.iter().filter(|&&c| c).count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn discounts_match_the_log_definition() {
        let d = dcg_discounts(5);
        let expected = [
            1.0,
            0.6309297535714575,
            0.5,
            0.43067655807339306,
            0.38685280723454163,
        ];
        assert_eq!(d.len(), 5);
        for (got, want) in d.iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
    }

    #[test]
    fn ndcg_of_an_ideal_prefix_is_exactly_one() {
        for num_rel in 1..=4 {
            let rels: Vec<bool> = (0..4).map(|i| i < num_rel).collect();
            assert_eq!(ndcg_at_k(&rels, num_rel, 4).unwrap(), 1.0);
        }
        // Pool has more relevant items than fit on the list.
        assert_eq!(ndcg_at_k(&[true, true, true], 10, 3).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_matches_hand_computed_examples() {
        // Single relevant item shown at position 2 of 2: dcg = 1/log2(3),
        // ideal puts it at position 1.
        assert_relative_eq!(
            ndcg_at_k(&[false, true], 1, 2).unwrap(),
            0.6309297535714575,
            max_relative = 1e-15
        );
        // Relevant at positions 1 and 3 of 5, with 3 relevant in the pool.
        let dcg = 1.0 + 0.5;
        let ideal = 1.0 + 0.6309297535714575 + 0.5;
        assert_relative_eq!(
            ndcg_at_k(&[true, false, true, false, false], 3, 5).unwrap(),
            dcg / ideal,
            max_relative = 1e-14
        );
    }

    #[test]
    fn ndcg_is_zero_when_nothing_relevant_is_shown() {
        assert_eq!(ndcg_at_k(&[false, false, false], 2, 3).unwrap(), 0.0);
    }

    #[test]
    fn ndcg_rejects_degenerate_inputs() {
        assert!(ndcg_at_k(&[true, false], 0, 2).is_err());
        assert!(ndcg_at_k(&[true, false], 1, 3).is_err());
        assert!(ndcg_at_k(&[true, true], 1, 2).is_err());
    }

    #[test]
    fn moving_a_relevant_item_up_never_hurts_ndcg() {
        let base = ndcg_at_k(&[false, false, true, false], 2, 4).unwrap();
        let better = ndcg_at_k(&[false, true, false, false], 2, 4).unwrap();
        let best = ndcg_at_k(&[true, false, false, false], 2, 4).unwrap();
        assert!(base < better && better < best);
    }

    #[test]
    fn builtin_click_models_have_the_documented_parameters() {
        let perfect = ClickConfig::builtin(BuiltinClickModel::Perfect);
        assert_eq!(
            (perfect.p_attract_relevant(), perfect.p_attract_irrelevant()),
            (1.0, 0.0)
        );
        let locating = ClickConfig::builtin(BuiltinClickModel::Locating);
        assert_eq!(
            (locating.p_attract_relevant(), locating.p_attract_irrelevant()),
            (0.95, 0.05)
        );
        let entertaining = ClickConfig::builtin(BuiltinClickModel::Entertaining);
        assert_eq!(
            (
                entertaining.p_attract_relevant(),
                entertaining.p_attract_irrelevant()
            ),
            (0.9, 0.4)
        );
        for cfg in [perfect, locating, entertaining] {
            assert_eq!(cfg.examination(), STANDARD_EXAMINATION);
        }
    }

    #[test]
    fn click_config_rejects_out_of_range_probabilities() {
        assert!(ClickConfig::new("bad", 1.2, 0.0, vec![0.5]).is_err());
        assert!(ClickConfig::new("bad", 0.5, -0.1, vec![0.5]).is_err());
        assert!(ClickConfig::new("bad", 0.5, 0.1, vec![0.5, 7.0]).is_err());
        assert!(ClickConfig::new("bad", 0.5, 0.1, vec![]).is_err());
    }

    #[test]
    fn perfect_user_never_clicks_irrelevant_items() {
        let cfg = ClickConfig::builtin(BuiltinClickModel::Perfect);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let clicks =
                simulate_clicks_pbm(&[false, true, false, true, false], &cfg, &mut rng).unwrap();
            assert!(!clicks[0] && !clicks[2] && !clicks[4]);
        }
    }

    #[test]
    fn click_rates_match_examination_times_attraction() {
        // Mixed list under the noisiest model; compare per-position click
        // frequency against its binomial expectation within 4 standard
        // errors. The stricter three-sigma sweep over all built-ins lives in
        // the acceptance suite.
        let cfg = ClickConfig::builtin(BuiltinClickModel::Entertaining);
        let rels = [true, false, true, false, true];
        let draws = 40_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            for (i, c) in simulate_clicks_pbm(&rels, &cfg, &mut rng)
                .unwrap()
                .iter()
                .enumerate()
            {
                if *c {
                    counts[i] += 1;
                }
            }
        }
        for i in 0..5 {
            let attract = if rels[i] { 0.9 } else { 0.4 };
            let p = STANDARD_EXAMINATION[i] * attract;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let observed = counts[i] as f64 / draws as f64;
            assert!(
                (observed - p).abs() < 4.0 * se,
                "position {i}: observed {observed}, expected {p} (se {se})"
            );
        }
    }

    #[test]
    fn click_simulation_respects_list_length_limits() {
        let cfg = ClickConfig::builtin(BuiltinClickModel::Perfect);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(simulate_clicks_pbm(&[], &cfg, &mut rng).is_err());
        assert!(simulate_clicks_pbm(&[true; 6], &cfg, &mut rng).is_err());
        assert_eq!(
            simulate_clicks_pbm(&[true; 5], &cfg, &mut rng).unwrap().len(),
            5
        );
    }

    #[test]
    fn ctr_feedback_counts_clicks() {
        assert_eq!(ctr_feedback(&[true, false, true]), 2.0);
        assert_eq!(ctr_feedback(&[false; 5]), 0.0);
        assert_eq!(ctr_feedback(&[true; 5]), 5.0);
    }

    #[test]
    fn click_configs_load_from_toml_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clicks.toml");
        std::fs::write(
            &path,
            r#"
[skimmer]
p_attract_relevant = 0.7
p_attract_irrelevant = 0.1
examination = [1.0, 0.5, 0.25]

[standard_curve]
p_attract_relevant = 0.8
p_attract_irrelevant = 0.2
"#,
        )
        .unwrap();

        let skimmer = ClickConfig::from_file(&path, "skimmer").unwrap();
        assert_eq!(skimmer.p_attract_relevant(), 0.7);
        assert_eq!(skimmer.examination(), [1.0, 0.5, 0.25]);
        assert_eq!(skimmer.max_positions(), 3);

        let standard = ClickConfig::from_file(&path, "standard_curve").unwrap();
        assert_eq!(standard.examination(), STANDARD_EXAMINATION);

        let err = ClickConfig::from_file(&path, "absent").unwrap_err();
        assert!(err.to_string().contains("absent"));

        std::fs::write(&path, "not [valid toml").unwrap();
        assert!(ClickConfig::from_file(&path, "skimmer").is_err());
    }
}
