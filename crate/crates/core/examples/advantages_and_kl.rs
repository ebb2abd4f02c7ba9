//! Group-relative advantages, the asymmetric clipped surrogate and the k3
//! divergence estimate on hand-picked numbers.

use lpo::grpo;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rewards = [0.2, 0.4, 0.6, 0.8];
    let adv = grpo::advantages(&rewards, 1e-8)?;
    println!("rewards {rewards:?}\nadvantages {adv:.4?}");
    let shifted: Vec<f64> = rewards.iter().map(|r| 3.0 * r - 1.0).collect();
    println!("advantages of 3r - 1 {:.4?}", grpo::advantages(&shifted, 1e-8)?);
    println!("all-equal group {:?}", grpo::advantages(&[0.5; 4], 1e-8)?);

    let (lo, hi) = (0.2, 0.28);
    println!("\n{:>6} {:>6} {:>10} {:>8}", "ratio", "A", "surrogate", "binding");
    for &(ratio, a) in &[(1.0, 1.0), (1.2, 1.0), (1.5, 1.0), (0.5, 1.0), (0.5, -1.0), (0.9, -1.0), (1.5, -1.0)] {
        println!(
            "{ratio:>6} {a:>6} {:>10.4} {:>8}",
            grpo::clipped_surrogate(ratio, a, lo, hi),
            grpo::clip_binding(ratio, a, lo, hi)
        );
    }

    println!("\n{:>8} {:>10}", "pi_ref/pi", "k3");
    for ratio in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
        println!("{ratio:>8} {:>10.6}", grpo::kl_estimate(ratio.ln(), 0.0));
    }
    Ok(())
}
