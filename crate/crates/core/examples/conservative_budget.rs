//! A tight checker time budget turns undecided checks into smaller budgets.
//!
//! `cargo run --release --example conservative_budget`

use std::time::Duration;

use priste::checker::Decision;
use priste::event::{Event, Region};
use priste::experiment::{run_experiment, ReleaseExperiment, World};
use priste::runtime::{mean_budget, Algorithm, MechanismLadder, SessionConfig};
use priste::simkit::SyntheticConfig;

fn main() -> priste::Result<()> {
    let world = World::synthetic(&SyntheticConfig::default())?;
    let region = Region::from_cells(world.map.m(), &(0..10).collect::<Vec<_>>())?;
    let event = Event::presence(region, 4, 8)?;
    for budget in [
        Duration::ZERO,
        Duration::from_micros(200),
        Duration::from_millis(10),
        Duration::from_secs(1),
    ] {
        let mut session = SessionConfig::new(0.5, 0.2);
        session.checker.time_budget = budget;
        let ladder = MechanismLadder::new(world.geometry.clone(), &session);
        let experiment = ReleaseExperiment {
            session,
            algorithm: Algorithm::GeoInd,
            events: vec![event.clone()],
            runs: 3,
            horizon: 20,
            seed: 4,
            replay: false,
            trajectory: None,
        };
        let records = run_experiment(&world, &ladder, &experiment)?.records();
        let unknown = records
            .iter()
            .flatten()
            .flat_map(|r| &r.decision_path)
            .filter(|d| **d == Decision::Unknown)
            .count();
        println!(
            "budget {budget:>8?}: {unknown:3} undecided checks, mean alpha {:.4}",
            mean_budget(&records)
        );
    }
    Ok(())
}
