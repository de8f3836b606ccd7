//! Online learning to rank from list-level feedback.
//!
//! This crate simulates ranking systems that improve from the kind of signal a
//! live service actually observes: one scalar judgment per *displayed list*
//! (an nDCG score from a rater, or a click count), never per-document labels.
//! It provides:
//!
//! - [`scorer`]: a small dense neural network scoring (item, query) pairs,
//!   trained with Adam.
//! - [`plackett_luce`]: exact probabilities, sampling, and score gradients for
//!   the Plackett-Luce distribution over ranked lists.
//! - [`learners`]: the update rules — a score-function policy-gradient learner
//!   (`PgLearn`), a regression learner with learnable position discounts
//!   (`RegLearn`), and a fixed-discount skyline (`OracleLearn`).
//! - [`feedback`]: list-level feedback simulators (ideal nDCG@k and a
//!   position-based click model).
//! - [`experiment`]: synthetic dataset generation, the epsilon-greedy online
//!   loop, offline evaluation, and significance testing.

pub mod experiment;
pub mod feedback;
pub mod learners;
pub mod plackett_luce;
pub mod rng;
pub mod scorer;

mod error;

pub use error::{Error, Result};
