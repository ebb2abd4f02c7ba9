//! Monte-Carlo evaluation of the uniform policy against a trained one on a
//! held-out suite.

use lpo::grpo::{self, TrainConfig};
use lpo::reward::RewardConfig;
use lpo::synthenv::{self, EnvSpec};
use lpo::{GridConfig, PolicyParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (spec, grid, rc) = (EnvSpec::default(), GridConfig::default(), RewardConfig::default());
    let train = synthenv::prepare_suite(&synthenv::generate_suite(0, 32, &spec)?, &grid);
    let held_out = synthenv::prepare_suite(&synthenv::generate_suite(10_000, 32, &spec)?, &grid);
    let cfg = TrainConfig::default();
    let trained = grpo::train(&train, &cfg, &rc)?.params;
    let uniform = PolicyParams::zeros(cfg.action_types.clone(), 10, 10);
    for (name, suite) in [("training suite", &train), ("held-out suite", &held_out)] {
        for (label, p) in [("uniform", &uniform), ("trained", &trained)] {
            let m = synthenv::evaluate(p, suite, 200, 1, &rc)?;
            println!(
                "{name:<15} {label:<8} distance {:>6.1} px  reward {:.4}  hit rate {:.3}",
                m.mean_distance_px, m.mean_reward, m.hit_rate
            );
        }
    }
    Ok(())
}
