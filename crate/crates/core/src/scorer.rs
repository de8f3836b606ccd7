//! Dense neural scoring model and its Adam optimizer.
//!
//! The model maps an item feature vector `x` (dimension `d`) to one score per
//! standing query (dimension `m`) through fully connected layers with ReLU
//! activations on the hidden layers and an identity output layer. Everything
//! is `f64`; gradients are computed by explicit backpropagation so callers
//! can weight per-example output gradients however their learning rule
//! requires.
//!
//! Determinism contract: given the same inputs, every operation in this
//! module produces bit-identical results. Summation orders are fixed, and
//! [`ScoringModel::score`] accumulates in exactly the same order as
//! [`ScoringModel::forward`], so `score(x, q)` equals `forward(x)[q]` down to
//! the last bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A validated, finite, non-empty feature vector.
///
/// Dereferences to `[f64]`, so `&FeatureVector` can be passed anywhere a
/// slice is expected. Backed by shared storage: clones are cheap, which lets
/// interaction records carry their pool's features without copying.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(std::sync::Arc<[f64]>);

impl FeatureVector {
    /// Wraps `values`, rejecting empty vectors and non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "feature vector must not be empty".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "feature vector",
            });
        }
        Ok(Self(values.into()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Parameters (or parameter-shaped gradients / optimizer moments) organized
/// as a list of flat groups.
///
/// A [`ScoringModel`] with `L` affine layers stores `2L` groups: the weight
/// vector and bias vector of each layer, in layer order. Other trainable
/// objects (for example a vector of position discounts) use a single group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    groups: Vec<Vec<f64>>,
}

impl ParamSet {
    pub fn from_groups(groups: Vec<Vec<f64>>) -> Self {
        Self { groups }
    }

    /// A `ParamSet` of the same shape as `self`, filled with zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            groups: self.groups.iter().map(|g| vec![0.0; g.len()]).collect(),
        }
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.groups
    }

    /// True when `other` has the same number of groups, each of equal length.
    pub fn shape_matches(&self, other: &Self) -> bool {
        self.groups.len() == other.groups.len()
            && self
                .groups
                .iter()
                .zip(&other.groups)
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.iter().all(|v| v.is_finite()))
    }

    pub fn num_values(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// One example for [`ScoringModel::backward`]: an input and the gradient of
/// the objective with respect to the model's output on that input.
#[derive(Debug, Clone, Copy)]
pub struct BackwardExample<'a> {
    pub input: &'a [f64],
    pub output_grad: &'a [f64],
}

/// Gradient of the objective with respect to the output layer, either full or
/// concentrated on a single output unit.
pub(crate) enum OutputGrad<'a> {
    Dense(&'a [f64]),
    Single { query: usize, value: f64 },
}

/// Fully connected ReLU network scoring items against `m` standing queries.
///
/// Layer `l` (for `l` in `0..L`) maps activations of width `layer_sizes[l]`
/// to width `layer_sizes[l + 1]`. Weights are stored input-major: the weight
/// from input unit `i` to output unit `o` lives at `weights[i * out + o]`.
/// Hidden layers apply ReLU; the final layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringModel {
    layer_sizes: Vec<usize>,
    params: ParamSet,
}

impl ScoringModel {
    /// Creates a model with freshly initialized parameters.
    ///
    /// Weights are drawn from a zero-mean normal with variance `2 / fan_in`
    /// (He initialization, which keeps early scores in a numerically
    /// comfortable range under ReLU); biases start at zero. The same
    /// `layer_sizes` and `seed` always produce bit-identical parameters.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut groups = Vec::with_capacity(2 * (layer_sizes.len() - 1));
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .expect("standard deviation is finite and positive");
            let weights: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| normal.sample(&mut rng))
                .collect();
            groups.push(weights);
            groups.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: ParamSet::from_groups(groups),
        })
    }

    /// Assembles a model from explicit parameters (weights input-major, as
    /// documented on the type). Mainly useful for tests and tooling.
    pub fn from_parts(layer_sizes: &[usize], groups: Vec<Vec<f64>>) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let model = Self {
            layer_sizes: layer_sizes.to_vec(),
            params: ParamSet::from_groups(groups),
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks internal consistency: group count and lengths match
    /// `layer_sizes`, and every parameter is finite. Useful after
    /// deserializing a checkpoint from disk.
    pub fn validate(&self) -> Result<()> {
        validate_layer_sizes(&self.layer_sizes)?;
        let groups = self.params.groups();
        let expected_groups = 2 * (self.layer_sizes.len() - 1);
        if groups.len() != expected_groups {
            return Err(Error::ShapeMismatch {
                context: "model parameter groups",
                expected: expected_groups,
                actual: groups.len(),
            });
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if groups[2 * l].len() != fan_in * fan_out {
                return Err(Error::ShapeMismatch {
                    context: "layer weight group",
                    expected: fan_in * fan_out,
                    actual: groups[2 * l].len(),
                });
            }
            if groups[2 * l + 1].len() != fan_out {
                return Err(Error::ShapeMismatch {
                    context: "layer bias group",
                    expected: fan_out,
                    actual: groups[2 * l + 1].len(),
                });
            }
        }
        if !self.params.is_finite() {
            return Err(Error::NonFinite {
                context: "model parameters",
            });
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of standing queries, i.e. the width of the output layer.
    pub fn num_queries(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Weights of affine layer `l`, input-major (see the type docs).
    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.params.groups()[2 * layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.params.groups()[2 * layer + 1]
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.is_finite()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "model input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Scores `input` against every standing query.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.num_layers() {
            affine_forward(self.weights(l), self.biases(l), &current, &mut next);
            if l + 1 < self.num_layers() {
                relu_in_place(&mut next);
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Scores `input` against the single standing query `query`.
    ///
    /// Runs the hidden layers once and evaluates only row `query` of the
    /// output layer, accumulating in the same order as [`Self::forward`], so
    /// the result is bit-identical to `forward(input)[query]`.
    pub fn score(&self, input: &[f64], query: usize) -> Result<f64> {
        self.check_input(input)?;
        let m = self.num_queries();
        if query >= m {
            return Err(Error::InvalidArgument(format!(
                "query index {query} out of range for {m} standing queries"
            )));
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        let last = self.num_layers() - 1;
        for l in 0..last {
            affine_forward(self.weights(l), self.biases(l), &current, &mut next);
            relu_in_place(&mut next);
            std::mem::swap(&mut current, &mut next);
        }
        let weights = self.weights(last);
        let mut score = self.biases(last)[query];
        for (i, &a) in current.iter().enumerate() {
            score += a * weights[i * m + query];
        }
        Ok(score)
    }

    /// Backpropagates a batch of per-example output gradients and returns the
    /// parameter gradients **averaged over the batch**.
    pub fn backward(&self, examples: &[BackwardExample<'_>]) -> Result<ParamSet> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument(
                "backward requires at least one example".into(),
            ));
        }
        let mut grads = self.params.zeros_like();
        let scale = 1.0 / examples.len() as f64;
        for example in examples {
            if example.output_grad.len() != self.num_queries() {
                return Err(Error::ShapeMismatch {
                    context: "output gradient",
                    expected: self.num_queries(),
                    actual: example.output_grad.len(),
                });
            }
            self.backprop_into(
                example.input,
                OutputGrad::Dense(example.output_grad),
                scale,
                &mut grads,
            )?;
        }
        Ok(grads)
    }

    /// Adds `scale` times the gradient contribution of one example to
    /// `grads`.
    ///
    /// With `OutputGrad::Single { query, value }` the objective's output
    /// gradient is `value` on unit `query` and zero elsewhere, which lets
    /// learning rules that only ever touch one query per example skip the
    /// dense output layer work.
    pub(crate) fn backprop_into(
        &self,
        input: &[f64],
        output_grad: OutputGrad<'_>,
        scale: f64,
        grads: &mut ParamSet,
    ) -> Result<()> {
        self.check_input(input)?;
        if !grads.shape_matches(&self.params) {
            return Err(Error::ShapeMismatch {
                context: "gradient accumulator groups",
                expected: self.params.groups().len(),
                actual: grads.groups().len(),
            });
        }

        // Forward pass, keeping every post-activation.
        let num_layers = self.num_layers();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(num_layers + 1);
        acts.push(input.to_vec());
        for l in 0..num_layers {
            let mut next = Vec::new();
            affine_forward(self.weights(l), self.biases(l), &acts[l], &mut next);
            if l + 1 < num_layers {
                relu_in_place(&mut next);
            }
            acts.push(next);
        }

        // Output layer: accumulate its parameter gradients and compute the
        // gradient with respect to its input activations.
        let last = num_layers - 1;
        let m = self.num_queries();
        let hidden = &acts[last];
        let mut upstream: Vec<f64> = match output_grad {
            OutputGrad::Dense(grad_out) => {
                let weights = self.weights(last);
                let groups = grads.groups_mut();
                {
                    let (weight_grads, bias_grads) = split_layer(groups, last);
                    for (i, &a) in hidden.iter().enumerate() {
                        let coeff = scale * a;
                        let row = &mut weight_grads[i * m..(i + 1) * m];
                        for (wg, &g) in row.iter_mut().zip(grad_out) {
                            *wg += coeff * g;
                        }
                    }
                    for (bg, &g) in bias_grads.iter_mut().zip(grad_out) {
                        *bg += scale * g;
                    }
                }
                (0..hidden.len())
                    .map(|i| dot_unrolled(&weights[i * m..(i + 1) * m], grad_out))
                    .collect()
            }
            OutputGrad::Single { query, value } => {
                if query >= m {
                    return Err(Error::InvalidArgument(format!(
                        "query index {query} out of range for {m} standing queries"
                    )));
                }
                let weights = self.weights(last);
                let groups = grads.groups_mut();
                {
                    let (weight_grads, bias_grads) = split_layer(groups, last);
                    let coeff = scale * value;
                    for (i, &a) in hidden.iter().enumerate() {
                        weight_grads[i * m + query] += coeff * a;
                    }
                    bias_grads[query] += coeff;
                }
                (0..hidden.len())
                    .map(|i| weights[i * m + query] * value)
                    .collect()
            }
        };

        // Hidden layers, last to first.
        for l in (0..last).rev() {
            let out_dim = self.layer_sizes[l + 1];
            // Gate the upstream gradient through ReLU: units that emitted
            // zero pass no gradient.
            for (g, &a) in upstream.iter_mut().zip(&acts[l + 1]) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let weights = self.weights(l);
            {
                let groups = grads.groups_mut();
                let (weight_grads, bias_grads) = split_layer(groups, l);
                for (i, &a) in acts[l].iter().enumerate() {
                    let coeff = scale * a;
                    let row = &mut weight_grads[i * out_dim..(i + 1) * out_dim];
                    for (wg, &g) in row.iter_mut().zip(&upstream) {
                        *wg += coeff * g;
                    }
                }
                for (bg, &g) in bias_grads.iter_mut().zip(&upstream) {
                    *bg += scale * g;
                }
            }
            if l > 0 {
                upstream = (0..acts[l].len())
                    .map(|i| dot_unrolled(&weights[i * out_dim..(i + 1) * out_dim], &upstream))
                    .collect();
            }
        }
        Ok(())
    }

    /// Applies one Adam update to this model's parameters. See [`adam_step`].
    pub fn adam_step(&mut self, state: &mut AdamState, grads: &ParamSet) -> Result<()> {
        adam_step(&mut self.params, state, grads)
    }
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a scoring model needs at least input and output layers, got {} sizes",
            layer_sizes.len()
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidArgument(
            "layer sizes must all be positive".into(),
        ));
    }
    Ok(())
}

/// Borrows the weight-gradient and bias-gradient vectors of layer `l` from a
/// gradient `ParamSet`'s groups simultaneously.
fn split_layer(groups: &mut [Vec<f64>], l: usize) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = groups.split_at_mut(2 * l + 1);
    (&mut head[2 * l], &mut tail[0])
}

/// `out = biases + weights^T input`, accumulating over inputs in index order.
///
/// Weights are input-major, so the inner loop runs over a contiguous row and
/// each output unit's sum is evaluated in a fixed, reproducible order.
fn affine_forward(weights: &[f64], biases: &[f64], input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(biases);
    let n_out = biases.len();
    for (i, &x) in input.iter().enumerate() {
        let row = &weights[i * n_out..(i + 1) * n_out];
        for (acc, &w) in out.iter_mut().zip(row) {
            *acc += x * w;
        }
    }
}

fn relu_in_place(values: &mut [f64]) {
    for v in values {
        *v = v.max(0.0);
    }
}

/// Dot product with four independent accumulators (fixed combination order,
/// so results stay deterministic while the chains keep the pipeline full).
fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Adam optimizer state for a [`ParamSet`]-shaped set of parameters.
///
/// Holds first and second moment estimates plus the step count used for bias
/// correction. One `AdamState` belongs to one set of parameters; shapes are
/// rechecked on every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: ParamSet,
    v: ParamSet,
    step_count: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Fresh state (zero moments) for parameters shaped like `shape`, with
    /// the conventional defaults `beta1 = 0.9`, `beta2 = 0.999`,
    /// `epsilon = 1e-8`.
    pub fn new(shape: &ParamSet, learning_rate: f64) -> Result<Self> {
        Self::with_hyperparameters(shape, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(
        shape: &ParamSet,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and positive, got {learning_rate}"
            )));
        }
        for (name, beta) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        Ok(Self {
            m: shape.zeros_like(),
            v: shape.zeros_like(),
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Checks that this state is shaped for `params` and contains only
    /// finite values (for use after deserialization).
    pub fn validate_for(&self, params: &ParamSet) -> Result<()> {
        if !self.m.shape_matches(params) || !self.v.shape_matches(params) {
            return Err(Error::ShapeMismatch {
                context: "optimizer moment groups",
                expected: params.groups().len(),
                actual: self.m.groups().len(),
            });
        }
        if !(self.m.is_finite() && self.v.is_finite()) {
            return Err(Error::NonFinite {
                context: "optimizer moments",
            });
        }
        Ok(())
    }
}

/// Applies one Adam update with bias correction to `params`.
///
/// The update is staged and validated before anything is committed: if the
/// gradients contain a non-finite value, or the updated moments or parameters
/// would be non-finite, an error is returned and `params` and `state` are
/// left exactly as they were.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState, grads: &ParamSet) -> Result<()> {
    if !grads.shape_matches(params) {
        return Err(Error::ShapeMismatch {
            context: "gradient groups",
            expected: params.num_values(),
            actual: grads.num_values(),
        });
    }
    if !state.m.shape_matches(params) {
        return Err(Error::ShapeMismatch {
            context: "optimizer state groups",
            expected: params.num_values(),
            actual: state.m.num_values(),
        });
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            context: "gradients passed to Adam",
        });
    }

    let t = state.step_count + 1;
    let beta1 = state.beta1;
    let beta2 = state.beta2;
    let m_correction = 1.0 - beta1.powi(t.min(i32::MAX as u64) as i32);
    let v_correction = 1.0 - beta2.powi(t.min(i32::MAX as u64) as i32);

    let mut new_params = params.clone();
    let mut new_m = state.m.clone();
    let mut new_v = state.v.clone();
    for (((pg, mg), vg), gg) in new_params
        .groups_mut()
        .iter_mut()
        .zip(new_m.groups_mut())
        .zip(new_v.groups_mut())
        .zip(grads.groups())
    {
        for (((p, m), v), &g) in pg.iter_mut().zip(mg.iter_mut()).zip(vg.iter_mut()).zip(gg) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * (g * g);
            let m_hat = *m / m_correction;
            let v_hat = *v / v_correction;
            *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }

    if !(new_params.is_finite() && new_m.is_finite() && new_v.is_finite()) {
        return Err(Error::NonFinite {
            context: "staged Adam update",
        });
    }
    *params = new_params;
    state.m = new_m;
    state.v = new_v;
    state.step_count = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// 2-2-2 network small enough to evaluate by hand. With input (1, 0.5)
    /// the first hidden unit is active (2.5) and the second is clipped by
    /// ReLU, giving outputs (2.5, 6.0) exactly in f64 arithmetic.
    fn hand_network() -> ScoringModel {
        ScoringModel::from_parts(
            &[2, 2, 2],
            vec![
                // Layer 0 weights, input-major: unit o gets
                // [1, 2; -1, 0.5] * x in conventional row notation.
                vec![1.0, -1.0, 2.0, 0.5],
                vec![0.5, -1.0],
                // Layer 1 weights for [1, -1; 2, 1].
                vec![1.0, 2.0, -1.0, 1.0],
                vec![0.0, 1.0],
            ],
        )
        .unwrap()
    }

    fn random_model(layer_sizes: &[usize], seed: u64) -> ScoringModel {
        ScoringModel::init(layer_sizes, seed).unwrap()
    }

    #[test]
    fn forward_matches_hand_computed_network() {
        let model = hand_network();
        let out = model.forward(&[1.0, 0.5]).unwrap();
        // Exact: every intermediate value is representable.
        assert_eq!(out, vec![2.5, 6.0]);
    }

    #[test]
    fn score_is_bit_identical_to_forward_component() {
        let model = random_model(&[7, 13, 9, 4], 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let full = model.forward(&x).unwrap();
            for q in 0..4 {
                let s = model.score(&x, q).unwrap();
                assert_eq!(s.to_bits(), full[q].to_bits(), "query {q}");
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = random_model(&[16, 64, 64, 10], 42);
        let b = random_model(&[16, 64, 64, 10], 42);
        let c = random_model(&[16, 64, 64, 10], 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_statistics_match_fan_in_scaling() {
        let model = random_model(&[64, 64, 64, 8], 7);
        for layer in 0..3 {
            let w = model.weights(layer);
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let expected = 2.0 / model.layer_sizes()[layer] as f64;
            assert!(mean.abs() < 0.05, "layer {layer} mean {mean}");
            assert!(
                (var / expected - 1.0).abs() < 0.2,
                "layer {layer}: sample variance {var} vs expected {expected}"
            );
            assert!(model.biases(layer).iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn relu_blocks_gradients_of_inactive_units() {
        // 1-1-1 network whose single hidden unit is inactive for x = 1.
        let model = ScoringModel::from_parts(
            &[1, 1, 1],
            vec![vec![1.0], vec![-2.0], vec![1.0], vec![0.0]],
        )
        .unwrap();
        let grads = model
            .backward(&[BackwardExample {
                input: &[1.0],
                output_grad: &[1.0],
            }])
            .unwrap();
        let g = grads.groups();
        assert_eq!(g[0], vec![0.0], "first-layer weight grad");
        assert_eq!(g[1], vec![0.0], "first-layer bias grad");
        assert_eq!(g[2], vec![0.0], "second-layer weight grad (hidden output 0)");
        assert_eq!(g[3], vec![1.0], "second-layer bias grad");
    }

    /// Central-difference gradient of the scalar objective
    /// `J = (1/B) * sum_e dot(output_grad_e, forward(x_e))`
    /// with respect to every parameter, as an independent check on backward.
    fn finite_difference_grads(
        model: &ScoringModel,
        examples: &[(Vec<f64>, Vec<f64>)],
        h: f64,
    ) -> Vec<Vec<f64>> {
        let objective = |m: &ScoringModel| -> f64 {
            examples
                .iter()
                .map(|(x, g)| {
                    let out = m.forward(x).unwrap();
                    out.iter().zip(g).map(|(o, gg)| o * gg).sum::<f64>()
                })
                .sum::<f64>()
                / examples.len() as f64
        };
        let mut result = Vec::new();
        for gi in 0..model.params().groups().len() {
            let mut group_grads = Vec::new();
            for pi in 0..model.params().groups()[gi].len() {
                let mut plus = model.clone();
                plus.params.groups_mut()[gi][pi] += h;
                let mut minus = model.clone();
                minus.params.groups_mut()[gi][pi] -= h;
                group_grads.push((objective(&plus) - objective(&minus)) / (2.0 * h));
            }
            result.push(group_grads);
        }
        result
    }

    #[test]
    fn backward_matches_finite_differences() {
        let model = random_model(&[3, 5, 4], 21);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let examples: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
            .map(|_| {
                (
                    (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        let borrowed: Vec<BackwardExample<'_>> = examples
            .iter()
            .map(|(x, g)| BackwardExample {
                input: x,
                output_grad: g,
            })
            .collect();
        let analytic = model.backward(&borrowed).unwrap();
        let numeric = finite_difference_grads(&model, &examples, 1e-5);
        for (ga, gn) in analytic.groups().iter().zip(&numeric) {
            for (&a, &n) in ga.iter().zip(gn) {
                if n.abs() < 1e-7 {
                    assert!((a - n).abs() < 1e-9, "analytic {a} vs numeric {n}");
                } else {
                    assert_relative_eq!(a, n, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn single_output_backprop_equals_dense_one_hot() {
        let model = random_model(&[4, 6, 3], 5);
        let x = vec![0.3, -1.2, 0.7, 0.05];
        for query in 0..3 {
            let value = 1.7;
            let mut one_hot = vec![0.0; 3];
            one_hot[query] = value;
            let dense = model
                .backward(&[BackwardExample {
                    input: &x,
                    output_grad: &one_hot,
                }])
                .unwrap();
            let mut sparse = model.params().zeros_like();
            model
                .backprop_into(&x, OutputGrad::Single { query, value }, 1.0, &mut sparse)
                .unwrap();
            assert_eq!(dense, sparse, "query {query}");
        }
    }

    #[test]
    fn adam_matches_hand_rolled_scalar_reference() {
        // Independent scalar Adam, written straight from the update formulas.
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let g = 0.5f64;
        let mut reference = Vec::new();
        for t in 1..=5 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - f64::powi(b1, t));
            let v_hat = v / (1.0 - f64::powi(b2, t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
            reference.push(theta);
        }
        // Spot checks computed independently of this codebase.
        assert_relative_eq!(reference[0], 0.900000002, max_relative = 1e-12);
        assert_relative_eq!(reference[1], 0.8000000040000006, max_relative = 1e-12);

        let mut params = ParamSet::from_groups(vec![vec![1.0]]);
        let mut state = AdamState::new(&params, lr).unwrap();
        let grads = ParamSet::from_groups(vec![vec![g]]);
        for want in &reference {
            adam_step(&mut params, &mut state, &grads).unwrap();
            assert_relative_eq!(params.groups()[0][0], *want, max_relative = 1e-15);
        }
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn adam_rejects_nonfinite_gradients_without_side_effects() {
        let mut model = random_model(&[3, 4, 2], 9);
        let mut state = AdamState::new(model.params(), 1e-3).unwrap();
        let before_model = model.clone();
        let before_state = state.clone();
        let mut grads = model.params().zeros_like();
        grads.groups_mut()[0][0] = f64::NAN;
        let err = model.adam_step(&mut state, &grads).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(model, before_model);
        assert_eq!(state, before_state);
    }

    #[test]
    fn adam_rejects_updates_that_would_overflow_state() {
        // Finite but enormous gradient: g^2 overflows the second moment.
        let mut params = ParamSet::from_groups(vec![vec![1.0]]);
        let mut state = AdamState::new(&params, 0.1).unwrap();
        let before = (params.clone(), state.clone());
        let grads = ParamSet::from_groups(vec![vec![1e200]]);
        let err = adam_step(&mut params, &mut state, &grads).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!((params, state), before);
    }

    #[test]
    fn adam_steps_on_quadratic_objective_reduce_loss() {
        // Minimize J = 0.5 * ||forward(x) - y||^2 for a fixed example. The
        // learning rate is small enough that 100 steps stay in the descent
        // phase (no near-optimum oscillation), so after a short warmup the
        // loss should fall on every step.
        let mut model = random_model(&[3, 8, 2], 4);
        let mut state = AdamState::new(model.params(), 2e-3).unwrap();
        let x = vec![0.5, -0.25, 1.0];
        let y = vec![1.0, -2.0];
        let loss = |m: &ScoringModel| -> f64 {
            let out = m.forward(&x).unwrap();
            0.5 * out.iter().zip(&y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
        };
        let mut losses = Vec::new();
        for _ in 0..100 {
            let out = model.forward(&x).unwrap();
            let grad_out: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
            let grads = model
                .backward(&[BackwardExample {
                    input: &x,
                    output_grad: &grad_out,
                }])
                .unwrap();
            model.adam_step(&mut state, &grads).unwrap();
            losses.push(loss(&model));
        }
        for w in losses[10..].windows(2) {
            assert!(w[1] < w[0], "loss increased after warmup: {} -> {}", w[0], w[1]);
        }
        assert!(losses[99] < 0.5 * losses[0]);
    }

    #[test]
    fn shape_and_argument_validation() {
        assert!(ScoringModel::init(&[5], 0).is_err());
        assert!(ScoringModel::init(&[5, 0, 2], 0).is_err());
        let model = random_model(&[3, 4, 2], 1);
        assert!(model.forward(&[1.0, 2.0]).is_err());
        assert!(model.score(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(model.backward(&[]).is_err());
        assert!(model
            .backward(&[BackwardExample {
                input: &[1.0, 2.0, 3.0],
                output_grad: &[1.0],
            }])
            .is_err());
        assert!(FeatureVector::new(vec![]).is_err());
        assert!(FeatureVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(AdamState::new(&model.params().zeros_like(), 0.0).is_err());
        assert!(AdamState::new(&model.params().zeros_like(), f64::INFINITY).is_err());
    }

    #[test]
    fn model_and_state_roundtrip_through_json_bit_exactly() {
        let model = random_model(&[4, 7, 3], 77);
        let mut trained = model.clone();
        let mut state = AdamState::new(model.params(), 1e-3).unwrap();
        let grads = {
            let x = vec![0.1, 0.2, 0.3, 0.4];
            let out = trained.forward(&x).unwrap();
            trained
                .backward(&[BackwardExample {
                    input: &x,
                    output_grad: &out,
                }])
                .unwrap()
        };
        trained.adam_step(&mut state, &grads).unwrap();

        let model_json = serde_json::to_string(&trained).unwrap();
        let state_json = serde_json::to_string(&state).unwrap();
        let model2: ScoringModel = serde_json::from_str(&model_json).unwrap();
        let state2: AdamState = serde_json::from_str(&state_json).unwrap();
        assert_eq!(trained, model2);
        assert_eq!(state, state2);
        assert_eq!(serde_json::to_string(&model2).unwrap(), model_json);
        assert_eq!(serde_json::to_string(&state2).unwrap(), state_json);
        model2.validate().unwrap();
        state2.validate_for(model2.params()).unwrap();
    }
}
