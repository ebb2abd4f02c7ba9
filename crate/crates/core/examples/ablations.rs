//! Train with each reward factor disabled and compare against the full
//! product reward under one seed.

use lpo::grpo::{self, TrainConfig};
use lpo::reward::RewardConfig;
use lpo::synthenv::{self, EnvSpec};
use lpo::GridConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = synthenv::prepare_suite(&synthenv::generate_suite(0, 32, &EnvSpec::default())?, &GridConfig::default());
    let cfg = TrainConfig::default();
    let full = RewardConfig::default();
    let variants = [
        ("full", full),
        ("w/o r_w", RewardConfig { use_rw: false, ..full }),
        ("w/o r_d", RewardConfig { use_rd: false, ..full }),
    ];
    println!("{:<8} {:>10} {:>12} {:>9}", "reward", "dist px", "full reward", "hit rate");
    for (name, rc) in variants {
        let params = grpo::train(&suite, &cfg, &rc)?.params;
        // always judged by the full reward
        let m = synthenv::evaluate(&params, &suite, 200, 1, &full)?;
        println!("{name:<8} {:>10.1} {:>12.4} {:>9.3}", m.mean_distance_px, m.mean_reward, m.hit_rate);
    }
    Ok(())
}
