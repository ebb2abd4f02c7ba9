//! Softmax policy over `(action type, grid cell)` outcomes.
//!
//! The logit of outcome `(a, i, j)` is
//!
//! ```text
//! alpha[a] + beta * h[i, j] + gamma[i, j]
//! ```
//!
//! where `h = H / (max H + eps)` is the normalized window entropy of the
//! current screenshot. A sampled outcome clicks at the center of its cell.
//! All gradients of the log-probability are closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actions::{Action, ActionType};
use crate::geometry::Point;
use crate::windowing::EntropyMap;

/// Epsilon used when normalizing the entropy feature.
pub const FEATURE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("choice ({kind}, {row}, {col}) out of range")]
    IndexOutOfRange { kind: usize, row: usize, col: usize },
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
}

/// Zero-based outcome index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Choice {
    pub kind: usize,
    pub row: usize,
    pub col: usize,
}

impl Choice {
    pub const fn new(kind: usize, row: usize, col: usize) -> Self {
        Self { kind, row, col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    action_types: Vec<ActionType>,
    rows: usize,
    cols: usize,
    pub alpha: Vec<f64>,
    pub beta: f64,
    /// Row-major `rows × cols` cell biases.
    pub gamma: Vec<f64>,
}

impl PolicyParams {
    /// Uniform policy: every parameter zero.
    pub fn zeros(action_types: Vec<ActionType>, rows: usize, cols: usize) -> Self {
        assert!(!action_types.is_empty() && rows > 0 && cols > 0, "policy needs at least one outcome");
        Self {
            alpha: vec![0.0; action_types.len()],
            action_types,
            rows,
            cols,
            beta: 0.0,
            gamma: vec![0.0; rows * cols],
        }
    }

    pub fn action_types(&self) -> &[ActionType] {
        &self.action_types
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn num_outcomes(&self) -> usize {
        self.action_types.len() * self.cells()
    }

    pub fn outcome_index(&self, c: Choice) -> usize {
        c.kind * self.cells() + c.row * self.cols + c.col
    }

    pub fn choice_of(&self, index: usize) -> Choice {
        let cell = index % self.cells();
        Choice::new(index / self.cells(), cell / self.cols, cell % self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.beta.is_finite() && self.alpha.iter().chain(&self.gamma).all(|v| v.is_finite())
    }

    pub fn check_map(&self, map: &EntropyMap) -> Result<(), PolicyError> {
        if map.rows() != self.rows || map.cols() != self.cols {
            return Err(PolicyError::DimensionMismatch(format!(
                "policy grid is {}x{}, entropy map is {}x{}",
                self.rows,
                self.cols,
                map.rows(),
                map.cols()
            )));
        }
        Ok(())
    }

    fn check_choice(&self, c: Choice) -> Result<(), PolicyError> {
        if c.kind >= self.action_types.len() || c.row >= self.rows || c.col >= self.cols {
            return Err(PolicyError::IndexOutOfRange {
                kind: c.kind,
                row: c.row,
                col: c.col,
            });
        }
        Ok(())
    }

    /// Parameters as one vector: `alpha`, then `beta`, then `gamma`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.alpha.clone();
        v.push(self.beta);
        v.extend_from_slice(&self.gamma);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let a = self.alpha.len();
        assert_eq!(flat.len(), a + 1 + self.gamma.len(), "flat parameter length");
        self.alpha.copy_from_slice(&flat[..a]);
        self.beta = flat[a];
        self.gamma.copy_from_slice(&flat[a + 1..]);
    }

    /// Gradient-ascent update `θ ← θ + step · grad`.
    pub fn ascend(&mut self, grad: &PolicyGradient, step: f64) {
        for (p, g) in self.alpha.iter_mut().zip(&grad.alpha) {
            *p += step * g;
        }
        self.beta += step * grad.beta;
        for (p, g) in self.gamma.iter_mut().zip(&grad.gamma) {
            *p += step * g;
        }
    }

    /// Hex SHA-256 over the grid shape, type names and parameter bit patterns.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        for t in &self.action_types {
            h.update(t.as_str().as_bytes());
            h.update([0]);
        }
        for v in self.to_flat() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Gradient with the same shape as [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub gamma: Vec<f64>,
}

impl PolicyGradient {
    pub fn zeros_like(params: &PolicyParams) -> Self {
        Self {
            alpha: vec![0.0; params.alpha.len()],
            beta: 0.0,
            gamma: vec![0.0; params.gamma.len()],
        }
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &PolicyGradient, scale: f64) {
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            *a += scale * b;
        }
        self.beta += scale * other.beta;
        for (a, b) in self.gamma.iter_mut().zip(&other.gamma) {
            *a += scale * b;
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.alpha.clone();
        v.push(self.beta);
        v.extend_from_slice(&self.gamma);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|g| g.is_finite())
    }
}

/// Normalized entropy feature of every cell.
pub fn entropy_features(map: &EntropyMap) -> Vec<f64> {
    map.normalized(FEATURE_EPSILON)
}

/// Logits of every outcome, indexed by [`PolicyParams::outcome_index`].
pub fn logits(params: &PolicyParams, map: &EntropyMap) -> Result<Vec<f64>, PolicyError> {
    params.check_map(map)?;
    let features = entropy_features(map);
    Ok(logits_from_features(params, &features))
}

fn logits_from_features(params: &PolicyParams, features: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.num_outcomes());
    for &a in &params.alpha {
        for (h, g) in features.iter().zip(&params.gamma) {
            out.push(a + params.beta * h + g);
        }
    }
    out
}

/// The full outcome distribution of a policy on one screenshot.
#[derive(Debug, Clone)]
pub struct Distribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    features: Vec<f64>,
    kinds: usize,
    cells: usize,
}

impl Distribution {
    pub fn new(params: &PolicyParams, map: &EntropyMap) -> Result<Self, PolicyError> {
        params.check_map(map)?;
        let features = entropy_features(map);
        let logits = logits_from_features(params, &features);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = shifted.iter().sum();
        let log_z = max + z.ln();
        Ok(Self {
            probs: shifted.iter().map(|e| e / z).collect(),
            log_probs: logits.iter().map(|l| l - log_z).collect(),
            features,
            kinds: params.alpha.len(),
            cells: params.gamma.len(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_prob(&self, index: usize) -> f64 {
        self.log_probs[index]
    }

    /// Inverse-CDF draw of an outcome index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = k;
                if u < acc {
                    return k;
                }
            }
        }
        last_positive
    }

    /// Probability mass of each action type.
    pub fn kind_marginals(&self) -> Vec<f64> {
        self.probs.chunks_exact(self.cells).map(|c| c.iter().sum()).collect()
    }

    /// Probability mass of each cell, summed over action types.
    pub fn cell_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cells];
        for chunk in self.probs.chunks_exact(self.cells) {
            for (m, p) in out.iter_mut().zip(chunk) {
                *m += p;
            }
        }
        out
    }

    /// `E_π[h]` of the entropy feature.
    pub fn expected_feature(&self) -> f64 {
        self.cell_marginals().iter().zip(&self.features).map(|(p, h)| p * h).sum()
    }

    pub fn feature(&self, cell: usize) -> f64 {
        self.features[cell]
    }

    /// Precomputed expectations for repeated score-function gradients.
    pub fn score_basis(&self) -> ScoreBasis {
        ScoreBasis {
            kind_marginals: self.kind_marginals(),
            cell_marginals: self.cell_marginals(),
            expected_feature: self.expected_feature(),
            features: self.features.clone(),
            kinds: self.kinds,
        }
    }
}

/// Expectations under `π` needed by `∇ log π(choice)`.
#[derive(Debug, Clone)]
pub struct ScoreBasis {
    kind_marginals: Vec<f64>,
    cell_marginals: Vec<f64>,
    expected_feature: f64,
    features: Vec<f64>,
    kinds: usize,
}

impl ScoreBasis {
    /// Add `scale · ∇ log π(kind, cell)` into `grad`.
    pub fn accumulate(&self, kind: usize, cell: usize, scale: f64, grad: &mut PolicyGradient) {
        debug_assert!(kind < self.kinds);
        for (a, (g, m)) in grad.alpha.iter_mut().zip(&self.kind_marginals).enumerate() {
            let ind = if a == kind { 1.0 } else { 0.0 };
            *g += scale * (ind - m);
        }
        grad.beta += scale * (self.features[cell] - self.expected_feature);
        for (c, (g, m)) in grad.gamma.iter_mut().zip(&self.cell_marginals).enumerate() {
            let ind = if c == cell { 1.0 } else { 0.0 };
            *g += scale * (ind - m);
        }
    }
}

pub fn log_prob(params: &PolicyParams, map: &EntropyMap, choice: Choice) -> Result<f64, PolicyError> {
    params.check_choice(choice)?;
    Ok(Distribution::new(params, map)?.log_prob(params.outcome_index(choice)))
}

/// `∇_θ log π_θ(choice)`:
///
/// * `∂/∂alpha[a] = 1[a = a*] - Σ_ij π(a, i, j)`
/// * `∂/∂beta = h[i*, j*] - E_π[h]`
/// * `∂/∂gamma[i, j] = 1[(i, j) = (i*, j*)] - Σ_a π(a, i, j)`
pub fn log_prob_grad(params: &PolicyParams, map: &EntropyMap, choice: Choice) -> Result<PolicyGradient, PolicyError> {
    params.check_choice(choice)?;
    let dist = Distribution::new(params, map)?;
    let mut grad = PolicyGradient::zeros_like(params);
    dist.score_basis()
        .accumulate(choice.kind, choice.row * params.cols + choice.col, 1.0, &mut grad);
    Ok(grad)
}

/// One sampled action with its log-probability under the sampling policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    pub kind: ActionType,
    pub choice: Choice,
    pub point: Point,
    pub log_prob: f64,
}

impl PolicySample {
    pub fn to_action(&self) -> Action {
        Action::new(self.kind.clone(), vec![self.point])
    }
}

/// Draw a full outcome from the joint softmax.
pub fn sample<R: Rng + ?Sized>(params: &PolicyParams, map: &EntropyMap, rng: &mut R) -> Result<PolicySample, PolicyError> {
    let dist = Distribution::new(params, map)?;
    Ok(sample_from(params, map, &dist, rng))
}

/// Draw from a prebuilt distribution of `params` on `map`.
pub fn sample_from<R: Rng + ?Sized>(params: &PolicyParams, map: &EntropyMap, dist: &Distribution, rng: &mut R) -> PolicySample {
    let index = dist.sample_index(rng);
    let choice = params.choice_of(index);
    PolicySample {
        kind: params.action_types[choice.kind].clone(),
        choice,
        point: map.cell_rect(choice.row, choice.col).center(),
        log_prob: dist.log_prob(index),
    }
}

/// On-disk policy snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub action_types: Vec<String>,
    pub rows: usize,
    pub cols: usize,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub gamma: Vec<Vec<f64>>,
    pub step: u64,
    pub seed: u64,
    pub config_digest: String,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn from_params(params: &PolicyParams, step: u64, seed: u64, config_digest: String) -> Self {
        Self {
            version: Self::VERSION,
            action_types: params.action_types.iter().map(|t| t.as_str().to_string()).collect(),
            rows: params.rows,
            cols: params.cols,
            alpha: params.alpha.clone(),
            beta: params.beta,
            gamma: params.gamma.chunks(params.cols).map(<[f64]>::to_vec).collect(),
            step,
            seed,
            config_digest,
        }
    }

    pub fn to_params(&self) -> Result<PolicyParams, PolicyError> {
        let bad = |m: String| Err(PolicyError::InvalidCheckpoint(m));
        if self.version != Self::VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let types = self
            .action_types
            .iter()
            .map(|s| ActionType::parse(s).ok_or_else(|| PolicyError::InvalidCheckpoint("empty action type".into())))
            .collect::<Result<Vec<_>, _>>()?;
        if types.is_empty() || self.rows == 0 || self.cols == 0 {
            return bad("empty policy".into());
        }
        if self.alpha.len() != types.len() {
            return bad(format!("{} action types but {} alpha entries", types.len(), self.alpha.len()));
        }
        if self.gamma.len() != self.rows || self.gamma.iter().any(|r| r.len() != self.cols) {
            return bad(format!("gamma is not {}x{}", self.rows, self.cols));
        }
        let mut params = PolicyParams::zeros(types, self.rows, self.cols);
        params.alpha.clone_from(&self.alpha);
        params.beta = self.beta;
        params.gamma = self.gamma.concat();
        if !params.is_finite() {
            return bad("non-finite parameters".into());
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        serde_json::from_str(text).map_err(|e| PolicyError::InvalidCheckpoint(e.to_string()))
    }
}
