//! Release restricted to the delta-location set of the predicted location
//! distribution, for several values of delta.
//!
//! `cargo run --release --example release_deltaloc [runs]`

use priste::event::{Event, Region};
use priste::experiment::{run_experiment, ReleaseExperiment, World};
use priste::runtime::{mean_budget, Algorithm, MechanismLadder, SessionConfig};
use priste::simkit::SyntheticConfig;

fn main() -> priste::Result<()> {
    let runs: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("runs"));
    let world = World::synthetic(&SyntheticConfig::default())?;
    let region = Region::from_cells(world.map.m(), &(0..10).collect::<Vec<_>>())?;
    let event = Event::presence(region, 4, 8)?;
    let session = SessionConfig::new(0.5, 0.5);
    let ladder = MechanismLadder::new(world.geometry.clone(), &session);

    println!("delta  mean alpha  mean error (km)  replay failures");
    for delta in [0.01, 0.1, 0.3] {
        let experiment = ReleaseExperiment {
            session: session.clone(),
            algorithm: Algorithm::DeltaLoc { delta },
            events: vec![event.clone()],
            runs,
            horizon: 50,
            seed: 1,
            replay: true,
            trajectory: None,
        };
        let result = run_experiment(&world, &ladder, &experiment)?;
        let records = result.records();
        let dist: Vec<f64> = records.iter().flatten().map(|r| r.euclid_km).collect();
        println!(
            "{delta:5}  {:.4}      {:.3}            {}",
            mean_budget(&records),
            priste::stats::mean(&dist),
            result.replay_failures.len()
        );
    }
    Ok(())
}
