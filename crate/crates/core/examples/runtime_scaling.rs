//! Enumeration cost grows exponentially with the pattern length while the
//! two-world recursion stays linear.
//!
//! `cargo run --release --example runtime_scaling`

use std::time::Duration;

use priste::bench::{length_sweep, series, width_sweep, BenchConfig, Method, Sweep};

fn main() -> priste::Result<()> {
    let config = BenchConfig {
        lengths: (3..=10).collect(),
        sides: (3..=8).collect(),
        events_per_point: 20,
        ceiling: Duration::from_secs(20),
        ..Default::default()
    };
    let mut points = length_sweep(&config)?;
    points.extend(width_sweep(&config)?);
    let oracle = series(&points, Sweep::Length, Method::Oracle);
    let two = series(&points, Sweep::Length, Method::TwoWorld);
    println!("length  enumeration (ms)  two-world (us)");
    for ((len, o), (_, t)) in oracle.iter().zip(&two) {
        println!("{len:6}  {:16.3}  {:14.2}", o * 1e3, t * 1e6);
    }
    let checker = series(&points, Sweep::Width, Method::Checker);
    println!("\n cells  checker (us)");
    for (m, s) in checker {
        println!("{m:6}  {:12.1}", s * 1e6);
    }
    Ok(())
}
