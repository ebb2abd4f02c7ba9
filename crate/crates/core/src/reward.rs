//! Location rewards for a (predicted, target) action pair.
//!
//! Two factors are combined multiplicatively:
//!
//! * the window reward `r_w`, the entropy of the window holding the predicted
//!   point relative to the screenshot's most informative window;
//! * the distance reward `r_d`, the mean over target points of
//!   `max(0, 1 - dist / d_max)`, zeroed when the action types differ.

use serde::{Deserialize, Serialize};

use crate::actions::Action;
use crate::geometry::Point;
use crate::imaging::GrayImage;
use crate::stats;
use crate::windowing::{entropy_map, EntropyMap, GridConfig, WindowError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Distance at which the per-point reward reaches zero.
    pub d_max: f64,
    /// Added to the maximum window entropy in the `r_w` denominator.
    pub epsilon: f64,
    pub use_rw: bool,
    pub use_rd: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            d_max: 1000.0,
            epsilon: 1e-6,
            use_rw: true,
            use_rd: true,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(format!("d_max must be positive, got {}", self.d_max));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Same distances, both factors enabled.
    pub fn full(&self) -> Self {
        Self {
            use_rw: true,
            use_rd: true,
            ..*self
        }
    }
}

/// Normalized entropy of the window containing `point`.
pub fn window_reward(map: &EntropyMap, point: &Point, epsilon: f64) -> Result<f64, WindowError> {
    let (i, j) = map.cell_of(point)?;
    Ok(map.get(i, j) / (map.max_entropy() + epsilon))
}

pub fn point_reward(pred: &Point, tgt: &Point, cfg: &RewardConfig) -> f64 {
    (1.0 - pred.distance(tgt) / cfg.d_max).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReward {
    pub r_d: f64,
    pub per_point: Vec<f64>,
    pub type_matched: bool,
}

/// Type-gated mean of per-point rewards over the target's points.
///
/// Missing predicted points score zero. A type match with no target points
/// scores one.
pub fn distance_reward(pred: &Action, tgt: &Action, cfg: &RewardConfig) -> DistanceReward {
    if pred.kind != tgt.kind {
        return DistanceReward {
            r_d: 0.0,
            per_point: Vec::new(),
            type_matched: false,
        };
    }
    let per_point: Vec<f64> = tgt
        .points
        .iter()
        .enumerate()
        .map(|(k, t)| pred.points.get(k).map_or(0.0, |p| point_reward(p, t, cfg)))
        .collect();
    let r_d = if per_point.is_empty() {
        1.0
    } else {
        stats::mean(&per_point)
    };
    DistanceReward {
        r_d,
        per_point,
        type_matched: true,
    }
}

/// Both reward factors and their product for one action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_w: f64,
    pub r_d: f64,
    /// Combined reward; a disabled factor contributes `1`.
    #[serde(rename = "r")]
    pub combined: f64,
    pub per_point: Vec<f64>,
    pub type_matched: bool,
}

/// Score an action pair against a precomputed entropy map.
///
/// Every coordinate of both actions must lie inside the image. `r_w` is read
/// at the first predicted point; a prediction without points scores `0` when
/// the target has points and `1` when neither does.
pub fn score_action(
    map: &EntropyMap,
    pred: &Action,
    tgt: &Action,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, WindowError> {
    for p in pred.points.iter().chain(&tgt.points) {
        map.cell_of(p)?;
    }
    let r_w = match pred.primary_point() {
        Some(p) => window_reward(map, p, cfg.epsilon)?,
        None if tgt.points.is_empty() => 1.0,
        None => 0.0,
    };
    let DistanceReward {
        r_d,
        per_point,
        type_matched,
    } = distance_reward(pred, tgt, cfg);
    let combined = match (cfg.use_rw, cfg.use_rd) {
        (true, true) => r_w * r_d,
        (true, false) => r_w,
        (false, true) => r_d,
        (false, false) => 1.0,
    };
    Ok(RewardBreakdown {
        r_w,
        r_d,
        combined,
        per_point,
        type_matched,
    })
}

/// Build the entropy map of `img` and score the pair on it.
pub fn combined_reward(
    img: &GrayImage,
    pred: &Action,
    tgt: &Action,
    grid: &GridConfig,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, WindowError> {
    score_action(&entropy_map(img, grid), pred, tgt, cfg)
}

/// Euclidean distance between the first predicted and first target points.
pub fn primary_distance(pred: &Action, tgt: &Action) -> Option<f64> {
    Some(pred.primary_point()?.distance(tgt.primary_point()?))
}

/// Dataset-level summary of scored records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreAggregate {
    pub count: usize,
    pub errors: usize,
    pub mean_r: Option<f64>,
    pub mean_r_w: Option<f64>,
    pub mean_r_d: Option<f64>,
    pub type_match_rate: Option<f64>,
    pub mean_distance_px: Option<f64>,
}

impl ScoreAggregate {
    /// `scored` holds each successful record's breakdown and primary distance
    /// in input order; `errors` counts records that failed.
    pub fn from_scored(scored: &[(RewardBreakdown, Option<f64>)], errors: usize) -> Self {
        let collect = |f: &dyn Fn(&(RewardBreakdown, Option<f64>)) -> Option<f64>| -> Option<f64> {
            let v: Vec<f64> = scored.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| stats::mean(&v))
        };
        Self {
            count: scored.len(),
            errors,
            mean_r: collect(&|(b, _)| Some(b.combined)),
            mean_r_w: collect(&|(b, _)| Some(b.r_w)),
            mean_r_d: collect(&|(b, _)| Some(b.r_d)),
            type_match_rate: collect(&|(b, _)| Some(if b.type_matched { 1.0 } else { 0.0 })),
            mean_distance_px: collect(&|(_, d)| *d),
        }
    }
}
