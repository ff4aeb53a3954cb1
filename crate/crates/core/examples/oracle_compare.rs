//! Two-world probabilities against brute-force trajectory enumeration on
//! random small models.
//!
//! `cargo run --release --example oracle_compare [instances]`

use priste::commands::oracle_compare;

fn main() -> priste::Result<()> {
    let instances: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("instances"));
    let rows = oracle_compare(instances, 5)?;
    for r in rows.iter().take(5) {
        println!(
            "m = {}, horizon {}: prior {:.6} / {:.6}, joint {:.3e} / {:.3e}",
            r.m, r.horizon, r.prior_two_world, r.prior_naive, r.joint_two_world, r.joint_naive
        );
    }
    let worst = rows.iter().map(|r| r.max_abs_diff()).fold(0.0f64, f64::max);
    let worst_total = rows.iter().map(|r| r.total_rel_diff()).fold(0.0f64, f64::max);
    println!(
        "{} instances: largest absolute gap {worst:.2e}, largest relative likelihood gap {worst_total:.2e}",
        rows.len()
    );
    Ok(())
}
