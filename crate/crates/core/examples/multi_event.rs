//! Protecting two events at once costs more budget than protecting either
//! alone. All sessions share trajectories and mechanism randomness.
//!
//! `cargo run --release --example multi_event [runs]`

use priste::event::{Event, Region};
use priste::experiment::{run_experiment, ReleaseExperiment, World};
use priste::runtime::{mean_budget, window_mean, Algorithm, MechanismLadder, SessionConfig};
use priste::simkit::SyntheticConfig;

fn main() -> priste::Result<()> {
    let runs: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("runs"));
    let world = World::synthetic(&SyntheticConfig::default())?;
    let region = Region::from_cells(world.map.m(), &(0..10).collect::<Vec<_>>())?;
    let early = Event::presence(region.clone(), 4, 8)?;
    let late = Event::presence(region, 16, 20)?;
    let session = SessionConfig::new(0.5, 0.2);
    let ladder = MechanismLadder::new(world.geometry.clone(), &session);

    for (name, events) in [
        ("early only", vec![early.clone()]),
        ("late only", vec![late.clone()]),
        ("both", vec![early, late]),
    ] {
        let experiment = ReleaseExperiment {
            session: session.clone(),
            algorithm: Algorithm::GeoInd,
            events,
            runs,
            horizon: 50,
            seed: 3,
            replay: false,
            trajectory: None,
        };
        let records = run_experiment(&world, &ladder, &experiment)?.records();
        let window = |r: std::ops::RangeInclusive<u32>| {
            priste::stats::mean(
                &records
                    .iter()
                    .map(|run| window_mean(run, r.clone()))
                    .collect::<Vec<_>>(),
            )
        };
        println!(
            "{name:10}  overall {:.4}  t 4-8 {:.4}  t 16-20 {:.4}",
            mean_budget(&records),
            window(4..=8),
            window(16..=20)
        );
    }
    Ok(())
}
