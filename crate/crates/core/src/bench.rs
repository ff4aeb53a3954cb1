//! Runtime scaling of brute-force enumeration against the two-world
//! recursion and the full checking path.

use std::hint::black_box;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checker::{check_candidate, CheckerConfig, EventTracker};
use crate::error::Result;
use crate::event::{Event, GridMap, Region};
use crate::lppm::{MapGeometry, PlanarLaplace};
use crate::markov::{joint_probability, EmissionColumn, InitialDistribution, Mobility};
use crate::oracle::naive_pattern_window_joint;
use crate::simkit::generate_transition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    Length,
    Width,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Oracle,
    TwoWorld,
    Checker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub sweep: Sweep,
    pub method: Method,
    pub size: usize,
    pub events: usize,
    pub mean_seconds: f64,
    /// Largest relative gap between the oracle and two-world values.
    pub max_rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Pattern lengths for the length sweep.
    pub lengths: Vec<usize>,
    /// Grid side of the length sweep map.
    pub length_side: usize,
    /// Cells per region in the length sweep.
    pub length_width: usize,
    /// Grid sides for the width sweep; the region width equals the side.
    pub sides: Vec<usize>,
    /// Pattern length in the width sweep.
    pub width_length: usize,
    pub events_per_point: usize,
    /// Minimum measured time per timing sample.
    pub min_sample: Duration,
    /// Wall-clock ceiling per sweep; points sample fewer events past it.
    pub ceiling: Duration,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lengths: (5..=12).collect(),
            length_side: 4,
            length_width: 3,
            sides: (3..=10).collect(),
            width_length: 4,
            events_per_point: 100,
            min_sample: Duration::from_micros(500),
            ceiling: Duration::from_secs(120),
            seed: 0,
        }
    }
}

/// Mean seconds per call, repeating until `min` has elapsed.
fn time_per_call<T>(min: Duration, mut f: impl FnMut() -> T) -> (f64, T) {
    let start = Instant::now();
    let mut out = black_box(f());
    let mut reps = 1u32;
    while start.elapsed() < min {
        out = black_box(f());
        reps += 1;
    }
    (start.elapsed().as_secs_f64() / reps as f64, out)
}

struct Instance {
    map: GridMap,
    mobility: Mobility,
    plm: PlanarLaplace,
}

impl Instance {
    fn new(side: usize) -> Result<Self> {
        let map = GridMap::new(side, side, 1.0)?;
        let mobility: Mobility = generate_transition(&map, 1.0)?.into();
        let plm = PlanarLaplace::with_geometry(1.0, Arc::new(MapGeometry::new(map)))?;
        Ok(Self { map, mobility, plm })
    }

    /// A Pattern from time 2 with `width` random cells per step, and random
    /// observations. The first observation is uninformative so the window
    /// enumeration sees `pi` as the distribution before the window.
    fn draw(&self, rng: &mut ChaCha8Rng, width: usize, length: usize) -> Result<(Event, Vec<EmissionColumn>)> {
        let m = self.map.m();
        let regions = (0..length)
            .map(|_| Region::from_cells(m, &sample(rng, m, width.min(m)).into_vec()))
            .collect::<Result<Vec<_>>>()?;
        let event = Event::pattern(regions, 2)?;
        let mut cols = vec![EmissionColumn::uninformative(m)];
        cols.extend((0..length).map(|_| self.plm.column(rng.random_range(0..m))));
        Ok((event, cols))
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Oracle against two-world joint probability for growing Pattern length.
pub fn length_sweep(config: &BenchConfig) -> Result<Vec<BenchPoint>> {
    let inst = Instance::new(config.length_side)?;
    let pi = InitialDistribution::uniform(inst.map.m());
    let transition = inst.mobility.at(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per_point = config.ceiling / config.lengths.len().max(1) as u32;
    let mut out = Vec::new();
    for &len in &config.lengths {
        let started = Instant::now();
        let (mut oracle, mut two, mut diff, mut n) = (0.0, 0.0, 0.0f64, 0);
        while n < config.events_per_point && (n < 3 || started.elapsed() < per_point) {
            let (event, cols) = inst.draw(&mut rng, config.length_width, len)?;
            let (to, vo) = time_per_call(config.min_sample, || {
                naive_pattern_window_joint(&pi, transition, &event, &cols[1..])
            });
            let (tt, vt) = time_per_call(config.min_sample, || {
                joint_probability(&pi, &event, &inst.mobility, &cols)
            });
            oracle += to;
            two += tt;
            diff = diff.max(rel_diff(vo?, vt?));
            n += 1;
        }
        for (method, total) in [(Method::Oracle, oracle), (Method::TwoWorld, two)] {
            out.push(BenchPoint {
                sweep: Sweep::Length,
                method,
                size: len,
                events: n,
                mean_seconds: total / n as f64,
                max_rel_diff: diff,
            });
        }
    }
    Ok(out)
}

/// Oracle, two-world and full checking path for growing maps with the region
/// width tied to the grid side.
pub fn width_sweep(config: &BenchConfig) -> Result<Vec<BenchPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let per_point = config.ceiling / config.sides.len().max(1) as u32;
    let checker = CheckerConfig::new(1.0);
    let mut out = Vec::new();
    for &side in &config.sides {
        let inst = Instance::new(side)?;
        let m = inst.map.m();
        let pi = InitialDistribution::uniform(m);
        let transition = inst.mobility.at(1)?;
        let started = Instant::now();
        let (mut oracle, mut two, mut check, mut diff, mut n) = (0.0, 0.0, 0.0, 0.0f64, 0);
        while n < config.events_per_point && (n < 3 || started.elapsed() < per_point) {
            let (event, cols) = inst.draw(&mut rng, side, config.width_length)?;
            let (to, vo) = time_per_call(config.min_sample, || {
                naive_pattern_window_joint(&pi, transition, &event, &cols[1..])
            });
            let (tt, vt) = time_per_call(config.min_sample, || {
                joint_probability(&pi, &event, &inst.mobility, &cols)
            });
            let (last, committed) = cols.split_last().expect("nonempty");
            let (tc, report) = time_per_call(config.min_sample, || -> Result<_> {
                let mut tracker = EventTracker::new(event.clone(), &inst.mobility)?;
                for c in committed {
                    tracker.commit(c.clone());
                }
                check_candidate(&tracker, &inst.mobility, last, &checker)
            });
            report?;
            oracle += to;
            two += tt;
            check += tc;
            diff = diff.max(rel_diff(vo?, vt?));
            n += 1;
        }
        for (method, total) in [
            (Method::Oracle, oracle),
            (Method::TwoWorld, two),
            (Method::Checker, check),
        ] {
            out.push(BenchPoint {
                sweep: Sweep::Width,
                method,
                size: m,
                events: n,
                mean_seconds: total / n as f64,
                max_rel_diff: diff,
            });
        }
    }
    Ok(out)
}

/// `(size, mean_seconds)` of one method in one sweep.
pub fn series(points: &[BenchPoint], sweep: Sweep, method: Method) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.sweep == sweep && p.method == method)
        .map(|p| (p.size as f64, p.mean_seconds))
        .collect()
}

pub fn write_bench_csv(path: impl AsRef<Path>, points: &[BenchPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bench_csv(path: impl AsRef<Path>) -> Result<Vec<BenchPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
