//! Train the click policy on the default synthetic suite and save a
//! checkpoint.
//!
//! ```text
//! cargo run --release --example train_synthetic [ITERATIONS]
//! ```

use lpo::grpo::{TrainConfig, Trainer};
use lpo::policy::Checkpoint;
use lpo::reward::RewardConfig;
use lpo::synthenv::{self, EnvSpec};
use lpo::GridConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    let tasks = synthenv::generate_suite(0, 32, &EnvSpec::default())?;
    let suite = synthenv::prepare_suite(&tasks, &GridConfig::default());
    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&suite, cfg.clone(), RewardConfig::default())?;
    println!("{:>5} {:>8} {:>8} {:>8} {:>10} {:>9}", "iter", "reward", "r_w", "r_d", "dist px", "kl");
    while trainer.iteration() < iterations {
        let m = trainer.step()?;
        if m.iter % 25 == 0 || m.iter + 1 == iterations {
            println!(
                "{:>5} {:>8.4} {:>8.4} {:>8.4} {:>10.1} {:>9.2e}",
                m.iter, m.mean_reward, m.mean_r_w, m.mean_r_d, m.mean_distance_px, m.kl
            );
        }
    }
    let p = trainer.params();
    println!("alpha {:.3?}, beta {:.3}", p.alpha, p.beta);
    let path = std::env::temp_dir().join("lpo-example-checkpoint.json");
    std::fs::write(&path, Checkpoint::from_params(p, iterations, cfg.seed, String::new()).to_json())?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
