//! Group-relative policy optimization with asymmetric clipping and a
//! per-sample KL penalty.
//!
//! For each state a group of `G` actions is drawn from the frozen sampling
//! policy `π_old`. Rewards are standardized within the group, and the policy
//! ascends
//!
//! ```text
//! J = 1/G Σ_g [ min(ρ_g A_g, clip(ρ_g, 1-ε₁, 1+ε₂) A_g) - β k3_g ]
//! ρ_g  = π(a_g) / π_old(a_g)
//! k3_g = π_ref(a_g)/π(a_g) - ln(π_ref(a_g)/π(a_g)) - 1
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::ActionType;
use crate::policy::{self, Distribution, PolicyError, PolicyGradient, PolicyParams, PolicySample};
use crate::reward::{self, RewardBreakdown, RewardConfig};
use crate::stats;
use crate::synthenv::PreparedTask;
use crate::windowing::{EntropyMap, WindowError};

#[derive(Debug, thiserror::Error)]
pub enum GrpoError {
    #[error("group size must be at least 2, got {0}")]
    GroupTooSmall(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("snapshot mismatch: group sampled under {found}, objective given {expected}")]
    SnapshotMismatch { expected: String, found: String },
    #[error("non-finite objective or gradient at iteration {}", .metrics.iter)]
    NonFinite { metrics: Box<IterMetrics> },
    #[error("no training tasks")]
    NoTasks,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Reward(#[from] WindowError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub group_size: usize,
    pub clip_low: f64,
    pub clip_high: f64,
    pub kl_beta: f64,
    pub learning_rate: f64,
    pub iterations: u64,
    pub states_per_iter: usize,
    pub std_floor: f64,
    pub seed: u64,
    /// Action types the policy chooses among.
    pub action_types: Vec<ActionType>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 16,
            clip_low: 0.2,
            clip_high: 0.28,
            kl_beta: 1e-4,
            learning_rate: 1e-2,
            iterations: 300,
            states_per_iter: 32,
            std_floor: 1e-8,
            seed: 0,
            action_types: vec![ActionType::Click, ActionType::Scroll],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::InvalidConfig(m.to_string()));
        if self.group_size < 2 {
            return Err(GrpoError::GroupTooSmall(self.group_size));
        }
        if !(self.clip_low > 0.0 && self.clip_low < 1.0) {
            return bad("clip_low must lie in (0, 1)");
        }
        if !(self.clip_high > 0.0 && self.clip_high.is_finite()) {
            return bad("clip_high must be positive");
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return bad("kl_beta must be non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.states_per_iter == 0 {
            return bad("states_per_iter must be positive");
        }
        if !(self.std_floor > 0.0) {
            return bad("std_floor must be positive");
        }
        if self.action_types.is_empty() {
            return bad("action_types must not be empty");
        }
        Ok(())
    }
}

/// Standardize rewards within a group with the population standard
/// deviation. Groups whose spread is below `std_floor` get all-zero
/// advantages.
pub fn advantages(rewards: &[f64], std_floor: f64) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    let mean = stats::mean(rewards);
    let std = stats::population_std(rewards);
    if !(std >= std_floor) {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// k3 estimator `ρ - ln ρ - 1` with `ρ = π_ref / π`; always non-negative.
pub fn kl_estimate(ref_log_prob: f64, cur_log_prob: f64) -> f64 {
    let log_ratio = ref_log_prob - cur_log_prob;
    // exp(x) - x - 1 can round below zero for tiny |x|
    (log_ratio.exp() - log_ratio - 1.0).max(0.0)
}

/// `min(ρA, clip(ρ, 1-ε₁, 1+ε₂)A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_low: f64, clip_high: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_low, 1.0 + clip_high);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the clipped branch is selected and flat in `ρ`.
pub fn clip_binding(ratio: f64, advantage: f64, clip_low: f64, clip_high: f64) -> bool {
    (advantage > 0.0 && ratio > 1.0 + clip_high) || (advantage < 0.0 && ratio < 1.0 - clip_low)
}

/// A frozen copy of the policy together with its digest.
#[derive(Debug, Clone)]
pub struct Snapshot {
    params: PolicyParams,
    digest: String,
}

impl Snapshot {
    pub fn of(params: &PolicyParams) -> Self {
        Self {
            digest: params.digest(),
            params: params.clone(),
        }
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEntry {
    pub action: PolicySample,
    pub reward: RewardBreakdown,
    pub old_log_prob: f64,
    pub ref_log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub state_id: String,
    pub samples: Vec<GroupEntry>,
    pub advantages: Vec<f64>,
    /// Digest of the policy the group was drawn from.
    pub old_digest: String,
}

/// Draw `group_size` actions from `old` on one task and score them.
pub fn sample_group(
    task: &PreparedTask,
    old: &Snapshot,
    reference: &PolicyParams,
    cfg: &TrainConfig,
    reward_cfg: &RewardConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GroupSample, GrpoError> {
    let old_dist = Distribution::new(old.params(), &task.map)?;
    let ref_dist = Distribution::new(reference, &task.map)?;
    let mut samples = Vec::with_capacity(cfg.group_size);
    for _ in 0..cfg.group_size {
        let action = policy::sample_from(old.params(), &task.map, &old_dist, rng);
        let reward = reward::score_action(&task.map, &action.to_action(), &task.target, reward_cfg)?;
        let index = old.params().outcome_index(action.choice);
        samples.push(GroupEntry {
            old_log_prob: action.log_prob,
            ref_log_prob: ref_dist.log_prob(index),
            action,
            reward,
        });
    }
    let rewards: Vec<f64> = samples.iter().map(|s| s.reward.combined).collect();
    Ok(GroupSample {
        state_id: task.task_id.clone(),
        advantages: advantages(&rewards, cfg.std_floor)?,
        samples,
        old_digest: old.digest().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub gradient: PolicyGradient,
    /// Mean per-sample KL estimate against the reference policy.
    pub mean_kl: f64,
}

/// Objective of one group at `params` and its exact gradient.
///
/// The surrogate term contributes `A ρ ∇log π` unless its clipped branch is
/// binding, where it is flat. The penalty contributes
/// `-β (1 - π_ref/π) ∇log π`.
pub fn objective(
    group: &GroupSample,
    old: &Snapshot,
    params: &PolicyParams,
    map: &EntropyMap,
    cfg: &TrainConfig,
) -> Result<ObjectiveValue, GrpoError> {
    if group.old_digest != old.digest() {
        return Err(GrpoError::SnapshotMismatch {
            expected: old.digest().to_string(),
            found: group.old_digest.clone(),
        });
    }
    let dist = Distribution::new(params, map)?;
    let basis = dist.score_basis();
    let g = group.samples.len() as f64;
    let mut gradient = PolicyGradient::zeros_like(params);
    let mut terms = Vec::with_capacity(group.samples.len());
    let mut kls = Vec::with_capacity(group.samples.len());
    for (entry, &adv) in group.samples.iter().zip(&group.advantages) {
        let c = entry.action.choice;
        let cur = dist.log_prob(params.outcome_index(c));
        let ratio = (cur - entry.old_log_prob).exp();
        let kl = kl_estimate(entry.ref_log_prob, cur);
        terms.push(clipped_surrogate(ratio, adv, cfg.clip_low, cfg.clip_high) - cfg.kl_beta * kl);
        kls.push(kl);

        let surrogate_slope = if clip_binding(ratio, adv, cfg.clip_low, cfg.clip_high) {
            0.0
        } else {
            adv * ratio
        };
        let ref_ratio = (entry.ref_log_prob - cur).exp();
        let kl_slope = -cfg.kl_beta * (1.0 - ref_ratio);
        let scale = (surrogate_slope + kl_slope) / g;
        if scale != 0.0 {
            basis.accumulate(c.kind, c.row * params.cols() + c.col, scale, &mut gradient);
        }
    }
    Ok(ObjectiveValue {
        value: stats::pairwise_sum(&terms) / g,
        gradient,
        mean_kl: stats::mean(&kls),
    })
}

/// Per-iteration training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterMetrics {
    pub iter: u64,
    pub mean_reward: f64,
    pub mean_r_w: f64,
    pub mean_r_d: f64,
    pub mean_distance_px: f64,
    pub kl: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub type_match_rate: f64,
}

/// Random stream for iteration `iter`; depends only on `(seed, iter)`, so a
/// resumed run replays exactly.
pub fn iteration_rng(seed: u64, iter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iter);
    rng
}

/// Stepwise trainer. The reference policy is the all-zero initialization.
pub struct Trainer<'a> {
    tasks: &'a [PreparedTask],
    cfg: TrainConfig,
    reward_cfg: RewardConfig,
    params: PolicyParams,
    reference: PolicyParams,
    iter: u64,
}

impl<'a> Trainer<'a> {
    /// Fresh trainer starting from the uniform policy.
    pub fn new(tasks: &'a [PreparedTask], cfg: TrainConfig, reward_cfg: RewardConfig) -> Result<Self, GrpoError> {
        let first = tasks.first().ok_or(GrpoError::NoTasks)?;
        let init = PolicyParams::zeros(cfg.action_types.clone(), first.map.rows(), first.map.cols());
        Self::resume(tasks, cfg, reward_cfg, init, 0)
    }

    /// Continue from `params` as of iteration `start_iter`.
    pub fn resume(
        tasks: &'a [PreparedTask],
        cfg: TrainConfig,
        reward_cfg: RewardConfig,
        params: PolicyParams,
        start_iter: u64,
    ) -> Result<Self, GrpoError> {
        cfg.validate()?;
        reward_cfg.validate().map_err(GrpoError::InvalidConfig)?;
        if tasks.is_empty() {
            return Err(GrpoError::NoTasks);
        }
        if params.action_types() != cfg.action_types.as_slice() {
            return Err(GrpoError::InvalidConfig("policy action types differ from config".into()));
        }
        for t in tasks {
            params.check_map(&t.map)?;
        }
        let reference = PolicyParams::zeros(cfg.action_types.clone(), params.rows(), params.cols());
        Ok(Self {
            tasks,
            cfg,
            reward_cfg,
            params,
            reference,
            iter: start_iter,
        })
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn into_params(self) -> PolicyParams {
        self.params
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// One outer iteration: snapshot, sample groups, ascend once.
    pub fn step(&mut self) -> Result<IterMetrics, GrpoError> {
        let t = self.iter;
        let mut rng = iteration_rng(self.cfg.seed, t);
        let old = Snapshot::of(&self.params);
        let mut grad = PolicyGradient::zeros_like(&self.params);
        let mut objectives = Vec::with_capacity(self.cfg.states_per_iter);
        let mut kls = Vec::with_capacity(self.cfg.states_per_iter);
        let mut rewards = Vec::new();
        let mut r_ws = Vec::new();
        let mut r_ds = Vec::new();
        let mut dists = Vec::new();
        let mut matches = Vec::new();
        let n = self.tasks.len() as u64;
        let per_iter = self.cfg.states_per_iter as u64;
        for s in 0..per_iter {
            let task = &self.tasks[((t * per_iter + s) % n) as usize];
            let group = sample_group(task, &old, &self.reference, &self.cfg, &self.reward_cfg, &mut rng)?;
            let out = objective(&group, &old, &self.params, &task.map, &self.cfg)?;
            grad.add_scaled(&out.gradient, 1.0);
            objectives.push(out.value);
            kls.push(out.mean_kl);
            for e in &group.samples {
                rewards.push(e.reward.combined);
                r_ws.push(e.reward.r_w);
                r_ds.push(e.reward.r_d);
                matches.push(if e.reward.type_matched { 1.0 } else { 0.0 });
                if let Some(goal) = task.target.primary_point() {
                    dists.push(e.action.point.distance(goal));
                }
            }
        }
        let metrics = IterMetrics {
            iter: t,
            mean_reward: stats::mean(&rewards),
            mean_r_w: stats::mean(&r_ws),
            mean_r_d: stats::mean(&r_ds),
            mean_distance_px: stats::mean(&dists),
            kl: stats::mean(&kls),
            objective: stats::pairwise_sum(&objectives),
            grad_norm: grad.norm(),
            type_match_rate: stats::mean(&matches),
        };
        if !metrics.objective.is_finite() || !grad.is_finite() {
            return Err(GrpoError::NonFinite {
                metrics: Box::new(metrics),
            });
        }
        self.params.ascend(&grad, self.cfg.learning_rate);
        self.iter += 1;
        Ok(metrics)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub metrics: Vec<IterMetrics>,
}

/// Run `cfg.iterations` iterations from the uniform policy.
pub fn train(tasks: &[PreparedTask], cfg: &TrainConfig, reward_cfg: &RewardConfig) -> Result<TrainOutcome, GrpoError> {
    let mut trainer = Trainer::new(tasks, cfg.clone(), *reward_cfg)?;
    let mut metrics = Vec::with_capacity(cfg.iterations as usize);
    for _ in 0..cfg.iterations {
        metrics.push(trainer.step()?);
    }
    Ok(TrainOutcome {
        params: trainer.into_params(),
        metrics,
    })
}
