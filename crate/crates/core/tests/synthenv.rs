use std::fs;
use std::path::Path;

use lpo::synthenv::{self, EnvSpec, PreparedTask, SuiteManifest, SynthError};
use lpo::windowing::entropy_map;
use lpo::{imaging, Action, ActionType, EntropyMap, GridConfig, PolicyParams, Rect, RewardConfig};

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/suite"))
}

#[test]
fn argmax_entropy_cell_lands_on_a_widget() {
    let spec = EnvSpec::default();
    let grid = GridConfig::default();
    let tasks = synthenv::generate_suite(0, 200, &spec).unwrap();
    let hits = tasks
        .iter()
        .filter(|t| {
            let gray = imaging::to_gray(&t.screenshot);
            let map = entropy_map(&gray, &grid);
            let (r, c) = map.argmax();
            let cell = map.cell_rect(r, c);
            t.widgets.iter().any(|w| w.rect.intersects(&cell))
        })
        .count();
    assert!(hits * 100 >= 95 * tasks.len(), "{hits} of {}", tasks.len());
}

#[test]
fn noise_widget_cells_beat_background_cells() {
    let spec = EnvSpec::default();
    let grid = GridConfig::default();
    for t in synthenv::generate_suite(1000, 100, &spec).unwrap() {
        let map = entropy_map(&imaging::to_gray(&t.screenshot), &grid);
        let rects = map.cell_rects();
        let background: Vec<f64> = rects
            .iter()
            .zip(map.entropies())
            .filter(|(r, _)| t.widgets.iter().all(|w| !w.rect.intersects(r)))
            .map(|(_, &h)| h)
            .collect();
        assert!(background.iter().all(|&h| h == 0.0), "{}", t.task_id);
        let (r, c) = map.cell_of(t.target.primary_point().unwrap()).unwrap();
        let target_h = map.get(r, c);
        assert!(background.iter().all(|&h| target_h > h), "{}", t.task_id);
    }
}

#[test]
fn committed_suite_matches_generator() {
    let manifest: SuiteManifest =
        serde_json::from_str(&fs::read_to_string(fixture_dir().join(synthenv::MANIFEST_FILE)).unwrap()).unwrap();
    let tasks = synthenv::generate_suite(manifest.seed, manifest.count, &manifest.spec).unwrap();
    let out = tempfile::tempdir().unwrap();
    synthenv::write_suite(out.path(), &tasks, &manifest).unwrap();
    let mut names: Vec<_> = fs::read_dir(fixture_dir()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), manifest.count + 2);
    for name in names {
        let want = fs::read(fixture_dir().join(&name)).unwrap();
        let got = fs::read(out.path().join(&name)).unwrap();
        assert!(want == got, "{name:?} differs");
    }

    let loaded = synthenv::load_suite(fixture_dir(), &GridConfig::default()).unwrap();
    assert_eq!(loaded.len(), manifest.count);
    for (l, t) in loaded.iter().zip(&tasks) {
        assert_eq!(l.target, t.target);
        assert_eq!(l.target_rect, t.target_widget().rect);
        assert_eq!((l.map.rows(), l.map.cols()), (10, 10));
    }
}

fn quarter_task() -> PreparedTask {
    let map = EntropyMap::from_entropies(2, 2, 100, 100, vec![3.0, 1.0, 2.0, 0.5]).unwrap();
    PreparedTask {
        task_id: "quarter".into(),
        map,
        target: Action::click(25.0, 25.0),
        target_rect: Rect::new(0, 0, 50, 50),
    }
}

#[test]
fn uniform_hit_rate_is_binomial() {
    let suite = vec![quarter_task()];
    let p = PolicyParams::zeros(vec![ActionType::Click], 2, 2);
    let n = 10_000;
    let m = synthenv::evaluate(&p, &suite, n, 3, &RewardConfig::default()).unwrap();
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    assert!((m.hit_rate - 0.25).abs() < 3.0 * sigma, "hit rate {}", m.hit_rate);
}

#[test]
fn concentrated_policy_always_hits() {
    let suite = vec![quarter_task()];
    let mut p = PolicyParams::zeros(vec![ActionType::Click], 2, 2);
    p.gamma[0] = 1e6;
    let m = synthenv::evaluate(&p, &suite, 500, 4, &RewardConfig::default()).unwrap();
    assert_eq!(m.hit_rate, 1.0);
    assert_eq!(m.mean_distance_px, 0.0);
}

#[test]
fn evaluation_errors() {
    let p = PolicyParams::zeros(vec![ActionType::Click], 2, 2);
    let rc = RewardConfig::default();
    let e = synthenv::evaluate(&p, &[], 10, 0, &rc).unwrap_err();
    assert_eq!(e.to_string(), "empty suite");
    let e = synthenv::evaluate(&p, &[quarter_task()], 0, 0, &rc).unwrap_err();
    assert_eq!(e.to_string(), "draws must be positive");
    let wrong = PolicyParams::zeros(vec![ActionType::Click], 3, 2);
    assert!(matches!(
        synthenv::evaluate(&wrong, &[quarter_task()], 10, 0, &rc),
        Err(SynthError::Policy(_))
    ));
}

#[test]
fn evaluation_is_deterministic() {
    let suite = synthenv::prepare_suite(
        &synthenv::generate_suite(5, 4, &EnvSpec::default()).unwrap(),
        &GridConfig::default(),
    );
    let p = PolicyParams::zeros(vec![ActionType::Click, ActionType::Scroll], 10, 10);
    let rc = RewardConfig::default();
    let a = synthenv::evaluate(&p, &suite, 50, 9, &rc).unwrap();
    assert_eq!(a, synthenv::evaluate(&p, &suite, 50, 9, &rc).unwrap());
}
