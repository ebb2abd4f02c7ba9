//! Seeded synthetic GUI screenshots with ground-truth click targets.
//!
//! Each task is a flat gray background holding a few rectangular widgets
//! with 2-px dark borders. The target widget is always filled with per-pixel
//! noise; distractors draw from [`EnvSpec::distractor_textures`], which by
//! default includes noise too, so high entropy alone does not identify the
//! target. The target action is a click at the target widget's center.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::Action;
use crate::geometry::{Point, Rect};
use crate::imaging::{self, GrayImage, ImageError, Screenshot};
use crate::policy::{self, Distribution, PolicyError, PolicyParams};
use crate::reward::{self, RewardConfig};
use crate::stats;
use crate::windowing::{entropy_map, EntropyMap, GridConfig};

const BORDER_WIDTH: usize = 2;
const BORDER_INTENSITY: u8 = 40;
const PLACEMENT_ATTEMPTS: usize = 1000;
/// Minimum gap kept between widgets.
const WIDGET_GAP: usize = 2;

pub const INDEX_FILE: &str = "index.jsonl";
pub const MANIFEST_FILE: &str = "suite.json";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("cannot place widgets (seed {seed}): spec too dense")]
    Placement { seed: u64 },
    #[error("empty suite")]
    EmptySuite,
    #[error("draws must be positive")]
    NoDraws,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{path}: {message}")]
    Index { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Texture {
    Noise,
    Checker,
    Stripes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSpec {
    pub width: usize,
    pub height: usize,
    /// Inclusive `[min, max]` widget count.
    pub widget_count: [usize; 2],
    /// Inclusive `[min, max]` widget side length in pixels.
    pub widget_size: [usize; 2],
    pub background: u8,
    pub distractor_textures: Vec<Texture>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            width: 500,
            height: 500,
            widget_count: [3, 6],
            widget_size: [40, 120],
            background: 200,
            distractor_textures: vec![Texture::Noise, Texture::Checker, Texture::Stripes],
        }
    }
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive".into());
        }
        let [cmin, cmax] = self.widget_count;
        if cmin == 0 || cmin > cmax {
            return bad(format!("widget_count range [{cmin}, {cmax}] is invalid"));
        }
        let [smin, smax] = self.widget_size;
        if smin <= 2 * BORDER_WIDTH || smin > smax {
            return bad(format!("widget_size range [{smin}, {smax}] is invalid"));
        }
        if smax > self.width || smax > self.height {
            return bad(format!("widgets up to {smax} px do not fit a {}x{} image", self.width, self.height));
        }
        if cmax > 1 && self.distractor_textures.is_empty() {
            return bad("distractor_textures must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub rect: Rect,
    pub texture: Texture,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTask {
    pub screenshot: Screenshot,
    pub target: Action,
    pub widgets: Vec<Widget>,
    pub task_id: String,
    pub seed: u64,
}

impl SynthTask {
    pub fn target_widget(&self) -> &Widget {
        self.widgets.iter().find(|w| w.is_target).expect("task has a target widget")
    }
}

pub fn task_id_for(seed: u64) -> String {
    format!("task_{seed:06}")
}

/// Generate one task. Identical `(seed, spec)` yields an identical task.
pub fn generate(seed: u64, spec: &EnvSpec) -> Result<SynthTask, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(spec.widget_count[0]..=spec.widget_count[1]);
    let target_slot = rng.gen_range(0..count);

    let mut rects: Vec<Rect> = Vec::with_capacity(count);
    for _ in 0..count {
        let placed = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let w = rng.gen_range(spec.widget_size[0]..=spec.widget_size[1]);
            let h = rng.gen_range(spec.widget_size[0]..=spec.widget_size[1]);
            let x0 = rng.gen_range(0..=spec.width - w);
            let y0 = rng.gen_range(0..=spec.height - h);
            let r = Rect::new(x0, y0, x0 + w, y0 + h);
            let padded = r.inflate(WIDGET_GAP);
            rects.iter().all(|o| !o.intersects(&padded)).then_some(r)
        });
        rects.push(placed.ok_or(SynthError::Placement { seed })?);
    }

    let widgets: Vec<Widget> = rects
        .into_iter()
        .enumerate()
        .map(|(k, rect)| {
            let is_target = k == target_slot;
            let texture = if is_target {
                Texture::Noise
            } else {
                spec.distractor_textures[rng.gen_range(0..spec.distractor_textures.len())]
            };
            Widget { rect, texture, is_target }
        })
        .collect();

    let mut pixels = vec![spec.background; spec.width * spec.height];
    for w in &widgets {
        paint(&mut pixels, spec.width, w, &mut rng);
    }
    let screenshot = Screenshot::new(spec.width, spec.height, 1, pixels)?;
    let center = widgets[target_slot].rect.center();
    Ok(SynthTask {
        screenshot,
        target: Action::click(center.x, center.y),
        widgets,
        task_id: task_id_for(seed),
        seed,
    })
}

fn paint(pixels: &mut [u8], stride: usize, w: &Widget, rng: &mut ChaCha8Rng) {
    let r = w.rect;
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            let (lx, ly) = (x - r.x0, y - r.y0);
            let border = lx < BORDER_WIDTH
                || ly < BORDER_WIDTH
                || lx >= r.width() - BORDER_WIDTH
                || ly >= r.height() - BORDER_WIDTH;
            pixels[y * stride + x] = if border {
                BORDER_INTENSITY
            } else {
                match w.texture {
                    Texture::Noise => rng.gen(),
                    Texture::Checker => {
                        if (lx / 6 + ly / 6) % 2 == 0 {
                            70
                        } else {
                            150
                        }
                    }
                    Texture::Stripes => {
                        if (ly / 3) % 2 == 0 {
                            90
                        } else {
                            160
                        }
                    }
                }
            };
        }
    }
}

/// Tasks for seeds `seed..seed + count`.
pub fn generate_suite(seed: u64, count: usize, spec: &EnvSpec) -> Result<Vec<SynthTask>, SynthError> {
    (0..count as u64).map(|k| generate(seed + k, spec)).collect()
}

/// A task in the canonical frame, ready for training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTask {
    pub task_id: String,
    pub map: EntropyMap,
    pub target: Action,
    pub target_rect: Rect,
}

impl PreparedTask {
    /// Resize to the canonical frame (a no-op for images within 1000 px),
    /// rescale the target and compute the entropy map.
    pub fn new(task_id: String, screenshot: &Screenshot, target: &Action, target_rect: Rect, grid: &GridConfig) -> Self {
        let (gray, scale) = imaging::preprocess(screenshot, true);
        Self::from_gray(task_id, &gray, target.scaled(scale), scale_rect(target_rect, scale), grid)
    }

    pub fn from_gray(task_id: String, gray: &GrayImage, target: Action, target_rect: Rect, grid: &GridConfig) -> Self {
        Self {
            task_id,
            map: entropy_map(gray, grid),
            target,
            target_rect,
        }
    }

    pub fn from_task(task: &SynthTask, grid: &GridConfig) -> Self {
        Self::new(task.task_id.clone(), &task.screenshot, &task.target, task.target_widget().rect, grid)
    }
}

fn scale_rect(r: Rect, scale: f64) -> Rect {
    if scale == 1.0 {
        return r;
    }
    Rect::new(
        (r.x0 as f64 * scale).floor() as usize,
        (r.y0 as f64 * scale).floor() as usize,
        (r.x1 as f64 * scale).ceil() as usize,
        (r.y1 as f64 * scale).ceil() as usize,
    )
}

pub fn prepare_suite(tasks: &[SynthTask], grid: &GridConfig) -> Vec<PreparedTask> {
    tasks.iter().map(|t| PreparedTask::from_task(t, grid)).collect()
}

/// One line of a suite index: a scorer-compatible record without a
/// prediction, plus the target widget rectangle `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteIndexLine {
    pub image: String,
    pub task_id: String,
    pub target: Action,
    pub target_rect: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub spec: EnvSpec,
    pub seed: u64,
    pub count: usize,
}

/// Write `{dir}/{task_id}.pgm` for every task plus the index and manifest.
pub fn write_suite(dir: &Path, tasks: &[SynthTask], manifest: &SuiteManifest) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut index = String::new();
    for t in tasks {
        let file = format!("{}.pgm", t.task_id);
        let path = dir.join(&file);
        fs::write(&path, imaging::encode_pnm(&t.screenshot)).map_err(io_err(&path))?;
        let r = t.target_widget().rect;
        let line = SuiteIndexLine {
            image: file,
            task_id: t.task_id.clone(),
            target: t.target.clone(),
            target_rect: [r.x0, r.y0, r.x1, r.y1],
        };
        index.push_str(&serde_json::to_string(&line).expect("index line serializes"));
        index.push('\n');
    }
    let path = dir.join(INDEX_FILE);
    fs::write(&path, index).map_err(io_err(&path))?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

/// Load a suite written by [`write_suite`] into the canonical frame.
pub fn load_suite(dir: &Path, grid: &GridConfig) -> Result<Vec<PreparedTask>, SynthError> {
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (n, line) in crate::actions::nonblank_lines(&text) {
        let entry: SuiteIndexLine = serde_json::from_str(line).map_err(|e| SynthError::Index {
            path: path.clone(),
            message: format!("line {n}: {e}"),
        })?;
        let img = imaging::load(&dir.join(&entry.image))?;
        let [x0, y0, x1, y1] = entry.target_rect;
        out.push(PreparedTask::new(entry.task_id, &img, &entry.target, Rect::new(x0, y0, x1, y1), grid));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_distance_px: f64,
    pub mean_reward: f64,
    pub hit_rate: f64,
}

/// Monte-Carlo evaluation of a policy over a suite.
///
/// Draws `draws_per_task` samples per task from one seeded stream, in suite
/// order. A hit is a sampled point inside the target widget rectangle;
/// rewards are scored with `reward_cfg`.
pub fn evaluate(
    params: &PolicyParams,
    suite: &[PreparedTask],
    draws_per_task: usize,
    seed: u64,
    reward_cfg: &RewardConfig,
) -> Result<EvalMetrics, SynthError> {
    if suite.is_empty() {
        return Err(SynthError::EmptySuite);
    }
    if draws_per_task == 0 {
        return Err(SynthError::NoDraws);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = suite.len() * draws_per_task;
    let (mut dists, mut rewards, mut hits) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for task in suite {
        let dist = Distribution::new(params, &task.map)?;
        let goal = *task.target.primary_point().unwrap_or(&Point::new(0.0, 0.0));
        for _ in 0..draws_per_task {
            let s = policy::sample_from(params, &task.map, &dist, &mut rng);
            dists.push(s.point.distance(&goal));
            let b = reward::score_action(&task.map, &s.to_action(), &task.target, reward_cfg)
                .expect("cell centers and targets lie inside the image");
            rewards.push(b.combined);
            hits.push(if task.target_rect.contains_point(&s.point) { 1.0 } else { 0.0 });
        }
    }
    Ok(EvalMetrics {
        mean_distance_px: stats::mean(&dists),
        mean_reward: stats::mean(&rewards),
        hit_rate: stats::mean(&hits),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ActionType;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let spec = EnvSpec::default();
        for seed in 0..40 {
            let a = generate(seed, &spec).unwrap();
            assert_eq!(a, generate(seed, &spec).unwrap());
            assert_eq!(a.widgets.iter().filter(|w| w.is_target).count(), 1);
            let t = a.target_widget();
            assert_eq!(a.target, Action::click(t.rect.center().x, t.rect.center().y));
            for (i, w) in a.widgets.iter().enumerate() {
                assert!(w.rect.x1 <= spec.width && w.rect.y1 <= spec.height);
                for o in &a.widgets[i + 1..] {
                    assert!(!w.rect.intersects(&o.rect));
                }
            }
            let n = a.widgets.len();
            assert!((3..=6).contains(&n));
        }
    }

    #[test]
    fn single_widget_target_is_its_center() {
        let spec = EnvSpec {
            widget_count: [1, 1],
            ..Default::default()
        };
        let t = generate(17, &spec).unwrap();
        assert_eq!(t.widgets.len(), 1);
        let c = t.widgets[0].rect.center();
        assert_eq!(t.target.points, vec![c]);
        assert_eq!(t.task_id, "task_000017");
    }

    #[test]
    fn blank_cells_have_zero_entropy() {
        let grid = GridConfig::default();
        let t = generate(3, &EnvSpec::default()).unwrap();
        let p = PreparedTask::from_task(&t, &grid);
        for (k, rect) in p.map.cell_rects().iter().enumerate() {
            if t.widgets.iter().all(|w| !w.rect.intersects(rect)) {
                assert_eq!(p.map.entropies()[k], 0.0);
            }
        }
    }

    #[test]
    fn dense_specs_fail_placement() {
        let spec = EnvSpec {
            width: 100,
            height: 100,
            widget_count: [20, 20],
            widget_size: [60, 60],
            ..Default::default()
        };
        assert!(matches!(generate(1, &spec), Err(SynthError::Placement { seed: 1 })));
        let bad = EnvSpec {
            widget_count: [0, 2],
            ..Default::default()
        };
        assert!(matches!(generate(1, &bad), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn eval_rejects_empty_inputs() {
        let grid = GridConfig::default();
        let suite = prepare_suite(&generate_suite(0, 1, &EnvSpec::default()).unwrap(), &grid);
        let p = PolicyParams::zeros(vec![ActionType::Click], 10, 10);
        assert!(matches!(evaluate(&p, &[], 1, 0, &RewardConfig::default()), Err(SynthError::EmptySuite)));
        assert!(matches!(evaluate(&p, &suite, 0, 0, &RewardConfig::default()), Err(SynthError::NoDraws)));
        let wrong = PolicyParams::zeros(vec![ActionType::Click], 5, 5);
        assert!(matches!(
            evaluate(&wrong, &suite, 1, 0, &RewardConfig::default()),
            Err(SynthError::Policy(PolicyError::DimensionMismatch(_)))
        ));
    }

    #[test]
    fn suite_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let spec = EnvSpec::default();
        let tasks = generate_suite(5, 3, &spec).unwrap();
        write_suite(dir.path(), &tasks, &SuiteManifest { spec, seed: 5, count: 3 }).unwrap();
        let grid = GridConfig::default();
        let loaded = load_suite(dir.path(), &grid).unwrap();
        assert_eq!(loaded, prepare_suite(&tasks, &grid));
        let index = fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        let records = crate::actions::parse_records(&index).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|(_, r)| r.predicted.is_none()));
    }
}
