//! Event-protecting release with Planar Laplace and budget halving on the
//! default synthetic world, averaged over seeded runs.
//!
//! `cargo run --release --example release_geoind [epsilon] [runs]`

use priste::event::{Event, Region};
use priste::experiment::{run_experiment, ReleaseExperiment, World};
use priste::runtime::{Algorithm, MechanismLadder, SessionConfig};
use priste::simkit::SyntheticConfig;

fn main() -> priste::Result<()> {
    let mut args = std::env::args().skip(1);
    let epsilon: f64 = args.next().map_or(0.5, |s| s.parse().expect("epsilon"));
    let runs: usize = args.next().map_or(10, |s| s.parse().expect("runs"));

    let world = World::synthetic(&SyntheticConfig::default())?;
    let region = Region::from_cells(world.map.m(), &(0..10).collect::<Vec<_>>())?;
    let event = Event::presence(region, 4, 8)?;
    println!("protecting {}", event.to_expression());

    let session = SessionConfig::new(epsilon, 0.2);
    let ladder = MechanismLadder::new(world.geometry.clone(), &session);
    let experiment = ReleaseExperiment {
        session,
        algorithm: Algorithm::GeoInd,
        events: vec![event],
        runs,
        horizon: 50,
        seed: 1,
        replay: true,
        trajectory: None,
    };
    let result = run_experiment(&world, &ladder, &experiment)?;
    println!("  t  mean alpha   mean error (km)");
    for row in result.summary().iter().take(20) {
        println!("  {:2}  {:.4}      {:.3}", row.t, row.mean_alpha, row.mean_dist);
    }
    println!(
        "first-draw commits {:.1}%, replay: {} checks, {} failures",
        100.0 * result.first_attempt_rate(),
        result.replay_checks,
        result.replay_failures.len()
    );
    Ok(())
}
