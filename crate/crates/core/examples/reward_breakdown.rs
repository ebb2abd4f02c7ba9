//! Window, distance and combined rewards for a few predicted actions
//! against one ground-truth click.

use lpo::reward::{self, RewardConfig};
use lpo::synthenv::{self, EnvSpec};
use lpo::windowing::{entropy_map, GridConfig};
use lpo::{imaging, Action, ActionType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task = synthenv::generate(3, &EnvSpec::default())?;
    let map = entropy_map(&imaging::to_gray(&task.screenshot), &GridConfig::default());
    let goal = *task.target.primary_point().expect("click target");
    println!("target click at ({:.1}, {:.1})", goal.x, goal.y);

    let candidates = [
        ("exact click", task.target.clone()),
        ("30 px off", Action::click(goal.x + 30.0, goal.y)),
        ("background", Action::click(5.0, 5.0)),
        ("right place, wrong type", Action::new(ActionType::Scroll, vec![goal])),
        ("far corner", Action::click(499.0, 499.0)),
    ];
    let configs = [
        RewardConfig::default(),
        RewardConfig { use_rw: false, ..Default::default() },
        RewardConfig { use_rd: false, ..Default::default() },
    ];
    println!("{:<26} {:>7} {:>7} {:>7} {:>9} {:>9}", "prediction", "r_w", "r_d", "r", "r w/o r_w", "r w/o r_d");
    for (name, pred) in &candidates {
        let r: Vec<_> = configs
            .iter()
            .map(|c| reward::score_action(&map, pred, &task.target, c))
            .collect::<Result<_, _>>()?;
        println!(
            "{name:<26} {:>7.4} {:>7.4} {:>7.4} {:>9.4} {:>9.4}",
            r[0].r_w, r[0].r_d, r[0].combined, r[1].combined, r[2].combined
        );
    }
    Ok(())
}
