//! Checking a candidate release against every possible prior, and the prior
//! that comes closest to breaking the guarantee.
//!
//! `cargo run --example checker_worst_case`

use priste::checker::{check_candidate, CheckerConfig, EventTracker};
use priste::event::{Event, GridMap, Region};
use priste::lppm::PlanarLaplace;
use priste::markov::Mobility;
use priste::simkit::generate_transition;

fn main() -> priste::Result<()> {
    let map = GridMap::new(3, 3, 1.0)?;
    let mobility: Mobility = generate_transition(&map, 1.0)?.into();
    let event = Event::presence(Region::from_cells(map.m(), &[0, 1, 3])?, 2, 3)?;
    let mut tracker = EventTracker::new(event, &mobility)?;

    let plm = PlanarLaplace::new(1.0, map)?;
    tracker.commit(plm.column(4));
    for epsilon in [0.1, 0.5, 1.0, 2.0] {
        let config = CheckerConfig::new(epsilon);
        for (name, observed) in [("corner", 0), ("center", 4), ("far", 8)] {
            let report = check_candidate(&tracker, &mobility, &plm.column(observed), &config)?;
            let pi: Vec<String> = report.worst_pi.iter().map(|x| format!("{x:.2}")).collect();
            println!(
                "eps {epsilon:3}  release {name:6}  {:?}  max {:+.3e}  worst prior [{}]",
                report.decision,
                report.max_objective.unwrap_or(f64::NAN),
                pi.join(" ")
            );
        }
    }
    Ok(())
}
