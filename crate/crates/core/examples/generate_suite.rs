//! Generate a seeded synthetic suite and write it to disk in the layout
//! `lpo train --paths.dataset=DIR` and `lpo eval --suite DIR` read.
//!
//! ```text
//! cargo run --example generate_suite [OUT_DIR] [COUNT]
//! ```

use std::path::PathBuf;

use lpo::synthenv::{self, EnvSpec, SuiteManifest, Texture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/example-suite".into()));
    let count: usize = args.next().map(|c| c.parse()).transpose()?.unwrap_or(8);
    let spec = EnvSpec::default();
    let tasks = synthenv::generate_suite(0, count, &spec)?;
    for t in &tasks {
        let kinds: Vec<&str> = t
            .widgets
            .iter()
            .map(|w| match (w.is_target, w.texture) {
                (true, _) => "TARGET",
                (false, Texture::Noise) => "noise",
                (false, Texture::Checker) => "checker",
                (false, Texture::Stripes) => "stripes",
            })
            .collect();
        let goal = t.target.primary_point().expect("click target");
        println!("{}: target ({:.1}, {:.1}), widgets {kinds:?}", t.task_id, goal.x, goal.y);
    }
    synthenv::write_suite(&out, &tasks, &SuiteManifest { spec, seed: 0, count })?;
    println!("wrote {count} tasks to {}", out.display());
    Ok(())
}
