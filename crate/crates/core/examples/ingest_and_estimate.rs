//! Snap GPS fixes to grid cells and estimate a transition matrix from the
//! resulting traces.
//!
//! `cargo run --example ingest_and_estimate`

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use priste::event::GridMap;
use priste::markov::InitialDistribution;
use priste::simkit::{estimate_transition, generate_transition, ingest_csv, sample_trajectory, BoundingBox};

fn main() -> priste::Result<()> {
    let map = GridMap::new(4, 4, 1.0)?;
    let bbox = BoundingBox {
        lat_min: 39.90,
        lat_max: 39.94,
        lon_min: 116.30,
        lon_max: 116.34,
    };
    let truth = generate_transition(&map, 0.9)?;
    let mobility = truth.clone().into();
    let pi = InitialDistribution::uniform(map.m());
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let dir = std::env::temp_dir().join("priste-ingest-example");
    std::fs::create_dir_all(&dir)?;
    let mut traces = Vec::new();
    for k in 0..40 {
        let cells = sample_trajectory(&mobility, &pi, 200, &mut rng)?;
        let path = dir.join(format!("user_{k}.csv"));
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "t,lat,lon")?;
        for (i, &c) in cells.iter().enumerate() {
            let (lat, lon) = bbox.cell_center(&map, c);
            writeln!(f, "{},{lat:.6},{lon:.6}", 1_700_000_000 + 60 * i as u64)?;
        }
        let ingested = ingest_csv(&path, &map, Some(&bbox))?;
        assert_eq!(ingested.cells, cells);
        traces.push(ingested.cells);
    }
    let estimate = estimate_transition(&traces, map.m())?;
    let gap = (&estimate.view() - &truth.view())
        .iter()
        .fold(0.0f64, |a, d| a.max(d.abs()));
    println!("{} traces of 200 fixes from {}", traces.len(), dir.display());
    println!("largest entry error of the estimated transition matrix: {gap:.3}");
    println!("row 0 true      {:.3}", truth.row(0));
    println!("row 0 estimated {:.3}", estimate.row(0));
    Ok(())
}
