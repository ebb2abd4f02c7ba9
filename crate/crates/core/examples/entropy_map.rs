//! Per-window entropy of a screenshot, printed as a coarse text heatmap.
//!
//! ```text
//! cargo run --example entropy_map [IMAGE.pgm|ppm]
//! ```
//! Without an argument a synthetic screenshot is generated.

use std::path::PathBuf;

use lpo::synthenv::{self, EnvSpec};
use lpo::windowing::{entropy_map, GridConfig};
use lpo::imaging;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let screenshot = match std::env::args().nth(1) {
        Some(path) => imaging::load(&PathBuf::from(path))?,
        None => synthenv::generate(7, &EnvSpec::default())?.screenshot,
    };
    let (gray, scale) = imaging::preprocess(&screenshot, true);
    let map = entropy_map(&gray, &GridConfig::default());
    println!(
        "{}x{} image (scale {scale:.3}), {}x{} windows, max entropy {:.3} bits",
        gray.width(),
        gray.height(),
        map.rows(),
        map.cols(),
        map.max_entropy()
    );
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for (r, row) in map.normalized(1e-6).chunks(map.cols()).enumerate() {
        let line: String = row.iter().map(|h| shades[((h * 9.0).round() as usize).min(9)]).collect();
        println!("{r:>3} |{line}|");
    }
    let (r, c) = map.argmax();
    println!("highest-entropy window: row {r}, col {c}, pixels {:?}", map.cell_rect(r, c));
    Ok(())
}
