//! Parse a JSONL dataset of step records and score each prediction, the
//! in-process equivalent of `lpo score`.
//!
//! ```text
//! cargo run --example score_records [DATASET.jsonl]
//! ```
//! Defaults to the committed test fixture.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use lpo::actions;
use lpo::reward::{self, RewardConfig, ScoreAggregate};
use lpo::windowing::{entropy_map, GridConfig};
use lpo::imaging;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/records.jsonl"));
    let base = dataset.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(&dataset)?;
    let (grid, cfg) = (GridConfig::default(), RewardConfig::default());

    let mut maps = HashMap::new();
    let mut scored = Vec::new();
    let mut errors = 0;
    for (line, raw) in actions::nonblank_lines(&text) {
        let result = actions::parse_record_line(raw, line).map_err(|e| e.to_string()).and_then(|rec| {
            let path = base.join(&rec.image);
            if !maps.contains_key(&path) {
                let img = imaging::load(&path).map_err(|e| e.to_string())?;
                let (gray, _) = imaging::preprocess(&img, true);
                maps.insert(path.clone(), entropy_map(&gray, &grid));
            }
            let pred = rec.predicted.ok_or("no prediction")?;
            let b = reward::score_action(&maps[&path], &pred, &rec.target, &cfg).map_err(|e| e.to_string())?;
            Ok((b, reward::primary_distance(&pred, &rec.target)))
        });
        match result {
            Ok((b, d)) => {
                println!("line {line}: r = {:.4} (r_w {:.4}, r_d {:.4}, type match {})", b.combined, b.r_w, b.r_d, b.type_matched);
                scored.push((b, d));
            }
            Err(e) => {
                println!("line {line}: error: {e}");
                errors += 1;
            }
        }
    }
    println!("{}", serde_json::to_string_pretty(&ScoreAggregate::from_scored(&scored, errors))?);
    Ok(())
}
