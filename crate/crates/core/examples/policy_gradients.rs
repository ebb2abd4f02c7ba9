//! The softmax click policy: distribution, seeded sampling, and the
//! closed-form score function checked against central differences.

use lpo::policy::{self, Choice, Distribution};
use lpo::{ActionType, EntropyMap, PolicyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = EntropyMap::from_entropies(2, 3, 100, 150, vec![0.0, 1.0, 7.5, 2.0, 6.0, 0.5])?;
    let mut p = PolicyParams::zeros(vec![ActionType::Click, ActionType::Scroll], 2, 3);
    p.alpha = vec![0.8, -0.3];
    p.beta = 2.0;
    p.gamma[0] = 0.4;

    let dist = Distribution::new(&p, &map)?;
    println!("type marginals {:.4?}", dist.kind_marginals());
    println!("cell marginals {:.4?}", dist.cell_marginals());

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..5 {
        let s = policy::sample(&p, &map, &mut rng)?;
        println!("sampled {} at ({:.1}, {:.1}), log p = {:.4}", s.kind.as_str(), s.point.x, s.point.y, s.log_prob);
    }

    let choice = Choice::new(0, 0, 2);
    let analytic = policy::log_prob_grad(&p, &map, choice)?.to_flat();
    let h = 1e-5;
    let base = p.to_flat();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut q = p.clone();
        let mut v = base.clone();
        v[k] += h;
        q.set_flat(&v);
        let up = policy::log_prob(&q, &map, choice)?;
        v[k] -= 2.0 * h;
        q.set_flat(&v);
        let down = policy::log_prob(&q, &map, choice)?;
        worst = worst.max(((up - down) / (2.0 * h) - analytic[k]).abs());
    }
    println!("grad log p(click, cell 0,2) = {analytic:.4?}");
    println!("max deviation from central differences: {worst:.2e}");
    Ok(())
}
