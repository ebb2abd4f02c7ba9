#![allow(dead_code)]

use lpo::grpo::{self, GroupSample, Snapshot, TrainConfig};
use lpo::policy::{self, Choice, PolicyGradient};
use lpo::synthenv::PreparedTask;
use lpo::{Action, ActionType, EntropyMap, PolicyParams, Point, Rect, RewardConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const CELL_PX: usize = 10;

pub const TYPES: [ActionType; 3] = [ActionType::Click, ActionType::Scroll, ActionType::TypeText];

pub fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> EntropyMap {
    let entropies = (0..rows * cols).map(|_| rng.gen_range(0.0..8.0)).collect();
    EntropyMap::from_entropies(rows, cols, rows * CELL_PX, cols * CELL_PX, entropies).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, kinds: usize, rows: usize, cols: usize, scale: f64) -> PolicyParams {
    let mut p = PolicyParams::zeros(TYPES[..kinds].to_vec(), rows, cols);
    let flat: Vec<f64> = p.to_flat().iter().map(|_| rng.gen_range(-scale..scale)).collect();
    p.set_flat(&flat);
    p
}

pub fn perturbed(rng: &mut ChaCha8Rng, base: &PolicyParams, scale: f64) -> PolicyParams {
    let mut p = base.clone();
    let flat: Vec<f64> = base.to_flat().iter().map(|v| v + rng.gen_range(-scale..scale)).collect();
    p.set_flat(&flat);
    p
}

pub fn random_choice(rng: &mut ChaCha8Rng, p: &PolicyParams) -> Choice {
    Choice::new(
        rng.gen_range(0..p.action_types().len()),
        rng.gen_range(0..p.rows()),
        rng.gen_range(0..p.cols()),
    )
}

/// A task on `map` with a random single-point target of a random policy type.
pub fn random_task(rng: &mut ChaCha8Rng, map: EntropyMap, kinds: usize) -> PreparedTask {
    let (w, h) = (map.image_width() as f64, map.image_height() as f64);
    let target = Action::new(
        TYPES[rng.gen_range(0..kinds)].clone(),
        vec![Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h))],
    );
    PreparedTask {
        task_id: "t".into(),
        target_rect: Rect::new(0, 0, 1, 1),
        map,
        target,
    }
}

/// Central differences of `f` in every coordinate of `p`.
pub fn fd_gradient(p: &PolicyParams, f: impl Fn(&PolicyParams) -> f64) -> Vec<f64> {
    let base = p.to_flat();
    let mut q = p.clone();
    (0..base.len())
        .map(|k| {
            let mut v = base.clone();
            v[k] = base[k] + FD_STEP;
            q.set_flat(&v);
            let up = f(&q);
            v[k] = base[k] - FD_STEP;
            q.set_flat(&v);
            let down = f(&q);
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)` in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b))
}

pub fn log_prob_fd_error(rng: &mut ChaCha8Rng) -> f64 {
    let kinds = rng.gen_range(2..=3);
    let (rows, cols) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
    let map = random_map(rng, rows, cols);
    let p = random_params(rng, kinds, rows, cols, 2.0);
    let c = random_choice(rng, &p);
    let analytic = policy::log_prob_grad(&p, &map, c).unwrap().to_flat();
    let numeric = fd_gradient(&p, |q| policy::log_prob(q, &map, c).unwrap());
    relative_error(&analytic, &numeric)
}

pub struct ObjectiveInstance {
    pub group: GroupSample,
    pub old: Snapshot,
    pub params: PolicyParams,
    pub map: EntropyMap,
    pub cfg: TrainConfig,
}

impl ObjectiveInstance {
    pub fn value(&self, p: &PolicyParams) -> f64 {
        grpo::objective(&self.group, &self.old, p, &self.map, &self.cfg).unwrap().value
    }

    pub fn gradient(&self) -> PolicyGradient {
        grpo::objective(&self.group, &self.old, &self.params, &self.map, &self.cfg)
            .unwrap()
            .gradient
    }

    /// Ratios at the current parameters.
    pub fn ratios(&self) -> Vec<f64> {
        let dist = policy::Distribution::new(&self.params, &self.map).unwrap();
        self.group
            .samples
            .iter()
            .map(|e| (dist.log_prob(self.params.outcome_index(e.action.choice)) - e.old_log_prob).exp())
            .collect()
    }

    /// Whether some ratio sits within `margin` of a clip bound, where the
    /// objective has a kink and central differences are meaningless.
    pub fn near_kink(&self, margin: f64) -> bool {
        let (lo, hi) = (1.0 - self.cfg.clip_low, 1.0 + self.cfg.clip_high);
        self.ratios().iter().any(|r| (r - lo).abs() < margin || (r - hi).abs() < margin)
    }
}

/// Random objective instance: 2-3 types, grid up to 5x5, current params
/// perturbed away from the sampling snapshot so both clip branches occur.
pub fn random_objective(rng: &mut ChaCha8Rng, kl_beta: f64) -> ObjectiveInstance {
    let kinds = rng.gen_range(2..=3);
    let (rows, cols) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
    let map = random_map(rng, rows, cols);
    let task = random_task(rng, map.clone(), kinds);
    let old_params = random_params(rng, kinds, rows, cols, 1.0);
    let reference = random_params(rng, kinds, rows, cols, 1.0);
    let params = perturbed(rng, &old_params, 0.5);
    let cfg = TrainConfig {
        group_size: rng.gen_range(2..=12),
        kl_beta,
        action_types: TYPES[..kinds].to_vec(),
        ..TrainConfig::default()
    };
    let old = Snapshot::of(&old_params);
    let group = grpo::sample_group(&task, &old, &reference, &cfg, &RewardConfig::default(), rng).unwrap();
    ObjectiveInstance {
        group,
        old,
        params,
        map,
        cfg,
    }
}

/// Relative finite-difference error of the objective gradient, or `None` when
/// the instance is degenerate (zero gradient) or sits on a kink.
pub fn objective_fd_error(rng: &mut ChaCha8Rng, kl_beta: f64) -> Option<f64> {
    let inst = random_objective(rng, kl_beta);
    if inst.near_kink(1e-3) {
        return None;
    }
    let analytic = inst.gradient().to_flat();
    if norm(&analytic) < 1e-8 {
        return None;
    }
    let numeric = fd_gradient(&inst.params, |q| inst.value(q));
    Some(relative_error(&analytic, &numeric))
}

/// Exact expected combined reward by enumerating every outcome.
pub fn enumerate_expected_reward(p: &PolicyParams, task: &PreparedTask, cfg: &RewardConfig) -> f64 {
    let dist = policy::Distribution::new(p, &task.map).unwrap();
    (0..p.num_outcomes())
        .map(|k| {
            let c = p.choice_of(k);
            let point = task.map.cell_rect(c.row, c.col).center();
            let action = Action::new(p.action_types()[c.kind].clone(), vec![point]);
            let r = lpo::reward::score_action(&task.map, &action, &task.target, cfg).unwrap().combined;
            dist.probs()[k] * r
        })
        .sum()
}

pub fn random_grid_task(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kinds: usize) -> PreparedTask {
    let map = random_map(rng, rows, cols);
    random_task(rng, map, kinds)
}
