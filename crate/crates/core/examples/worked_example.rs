//! Lifted transition matrices and the event prior on a three-state chain.
//!
//! `cargo run --example worked_example`

use priste::event::{Event, Region};
use priste::markov::{lift_transition, prior_probability, InitialDistribution, Mobility, TransitionMatrix};

fn main() -> priste::Result<()> {
    let mobility: Mobility =
        TransitionMatrix::from_rows(&[vec![0.1, 0.2, 0.7], vec![0.4, 0.1, 0.5], vec![0.0, 0.1, 0.9]])?.into();
    // Presence in {s1, s2} at time 3 or 4.
    let event = Event::presence(Region::from_mask(vec![true, true, false])?, 3, 4)?;
    println!("event: {}", event.to_expression());

    for t in 1..=5 {
        println!("\nlifted transition {t} -> {}:", t + 1);
        let dense = lift_transition(&mobility, &event, t)?.dense();
        for row in dense.rows() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:4.1}")).collect();
            println!("  [{}]", cells.join(" "));
        }
    }

    println!("\nPr(event) from each point prior:");
    for k in 0..3 {
        let p = prior_probability(&InitialDistribution::point(3, k), &event, &mobility)?;
        println!("  start at s{}: {p:.3}", k + 1);
    }
    let pi = InitialDistribution::new(vec![0.5, 0.3, 0.2])?;
    println!(
        "  pi = [0.5, 0.3, 0.2]: {:.4}",
        prior_probability(&pi, &event, &mobility)?
    );
    Ok(())
}
