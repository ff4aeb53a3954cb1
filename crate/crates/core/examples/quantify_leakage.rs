//! Prior, posterior and likelihood ratio of an event after each released
//! observation of a Planar Laplace protected trace.
//!
//! `cargo run --example quantify_leakage`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use priste::commands::quantify;
use priste::event::{Event, GridMap, Region};
use priste::lppm::PlanarLaplace;
use priste::markov::{InitialDistribution, Mobility};
use priste::simkit::{generate_transition, sample_trajectory};

fn main() -> priste::Result<()> {
    let map = GridMap::new(6, 6, 0.5)?;
    let mobility: Mobility = generate_transition(&map, 0.8)?.into();
    let pi = InitialDistribution::uniform(map.m());
    // Visiting the top-left 2x2 block at any time from 3 to 5.
    let block = [map.index(0, 0), map.index(0, 1), map.index(1, 0), map.index(1, 1)];
    let event = Event::presence(Region::from_cells(map.m(), &block)?, 3, 5)?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trajectory = sample_trajectory(&mobility, &pi, 8, &mut rng)?;
    for alpha in [0.5, 2.0, 8.0] {
        let plm = PlanarLaplace::new(alpha, map)?;
        let observed: Vec<usize> = trajectory.iter().map(|&c| plm.sample(c, &mut rng)).collect();
        let (rows, _) = quantify(
            &pi,
            &mobility,
            std::slice::from_ref(&event),
            plm.emission_matrix().view(),
            &observed,
        )?;
        println!("alpha = {alpha}/km, true trace {trajectory:?}, released {observed:?}");
        println!("   t  prior  posterior  ratio");
        for r in rows {
            println!(
                "  {:2}  {:.3}  {:.3}      {:.3}",
                r.t, r.prior, r.posterior, r.leakage_ratio
            );
        }
    }
    Ok(())
}
