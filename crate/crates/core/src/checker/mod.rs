//! Prior-free privacy checking: maximize the two quadratic conditions over all
//! initial distributions and compare against zero.

mod conditions;
mod vectors;

use std::time::{Duration, Instant};

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{EmissionColumn, Mobility};

pub use conditions::{assemble_conditions, QuadraticCondition};
pub use vectors::{build_check_vectors, CheckVectors, EventTracker, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibleSet {
    /// Probability vectors.
    Simplex,
    /// `0 <= pi_i <= 1`, a superset of the simplex.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Holds,
    Violated,
    /// The time budget ran out before the conditions were verified.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerConfig {
    pub epsilon: f64,
    pub time_budget: Duration,
    pub feasible_set: FeasibleSet,
    pub restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub max_iterations: usize,
}

impl CheckerConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            time_budget: Duration::from_secs(1),
            feasible_set: FeasibleSet::Simplex,
            restarts: 1,
            tolerance: 1e-9,
            seed: 0,
            max_iterations: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be >= 0, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Outcome of one check with the largest objective value located and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub decision: Decision,
    /// `None` when the search was cut short.
    pub max_objective: Option<f64>,
    /// Index of the condition attaining `max_objective`.
    pub condition: usize,
    pub worst_pi: Vec<f64>,
}

impl CheckReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

struct Search<'a> {
    config: &'a CheckerConfig,
    deadline: Instant,
    best: f64,
    best_pi: Vec<f64>,
    best_condition: usize,
}

enum Stop {
    Expired,
}

impl Search<'_> {
    fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }

    fn offer(&mut self, value: f64, condition: usize, pi: impl FnOnce() -> Vec<f64>) {
        if value > self.best {
            self.best = value;
            self.best_pi = pi();
            self.best_condition = condition;
        }
    }

    fn violated(&self) -> bool {
        self.best > self.config.tolerance
    }

    /// Exact maximum over the simplex: the objective is a function of three
    /// linear forms with an indefinite product term, so some maximizer lies on
    /// an edge. Every vertex and the stationary point of every concave edge
    /// are evaluated.
    fn edge_scan(&mut self, q: &QuadraticCondition, idx: usize) -> std::result::Result<(), Stop> {
        let (a, w, l) = (q.a(), q.w(), q.linear());
        let m = q.m();
        for i in 0..m {
            self.offer(a[i] * w[i] + l[i], idx, || unit(m, i));
        }
        for i in 0..m {
            if i % 16 == 0 && self.expired() {
                return Err(Stop::Expired);
            }
            let (ai, wi, li) = (a[i], w[i], l[i]);
            for j in i + 1..m {
                let (da, dw) = (ai - a[j], wi - w[j]);
                let quad = da * dw;
                if quad >= 0.0 {
                    continue;
                }
                let lin = a[j] * dw + w[j] * da + (li - l[j]);
                let lam = -lin / (2.0 * quad);
                if lam <= 0.0 || lam >= 1.0 {
                    continue;
                }
                let value = a[j] * w[j] + l[j] - lin * lin / (4.0 * quad);
                if value > self.best {
                    self.offer(value, idx, || {
                        let mut pi = vec![0.0; m];
                        pi[i] = lam;
                        pi[j] = 1.0 - lam;
                        pi
                    });
                }
            }
        }
        Ok(())
    }

    fn simplex_ascent(
        &mut self,
        q: &QuadraticCondition,
        idx: usize,
        start: Array1<f64>,
    ) -> std::result::Result<(), Stop> {
        let mut pi = start;
        let mut f = q.objective(pi.view());
        let mut step = 1.0;
        for it in 0..self.config.max_iterations {
            if it % 8 == 0 && self.expired() {
                return Err(Stop::Expired);
            }
            let g = q.gradient(pi.view());
            let mut moved = false;
            while step > 1e-12 {
                let cand = project_simplex((&pi + &(&g * step)).view());
                let fc = q.objective(cand.view());
                if fc >= f {
                    let delta = (&cand - &pi).iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
                    let gain = fc - f;
                    pi = cand;
                    f = fc;
                    step *= 1.5;
                    moved = delta > 1e-12 && gain > 1e-15 * (1.0 + f.abs());
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        self.offer(f, idx, || pi.to_vec());
        Ok(())
    }

    /// Best-response sweeps over single coordinates in `[0, 1]`.
    fn box_ascent(&mut self, q: &QuadraticCondition, idx: usize, start: Vec<f64>) -> std::result::Result<(), Stop> {
        let (a, w, l) = (q.a(), q.w(), q.linear());
        let mut pi = start;
        let pv = ArrayView1::from(&pi[..]);
        let (mut x, mut y, mut z) = (pv.dot(&a), pv.dot(&w), pv.dot(&l));
        for _ in 0..self.config.max_iterations {
            if self.expired() {
                return Err(Stop::Expired);
            }
            let mut improved = false;
            for i in 0..pi.len() {
                let base = (x - a[i] * pi[i], y - w[i] * pi[i], z - l[i] * pi[i]);
                let value = |v: f64| (base.0 + a[i] * v) * (base.1 + w[i] * v) + base.2 + l[i] * v;
                let mut best_v = pi[i];
                let mut best_f = value(pi[i]);
                let quad = a[i] * w[i];
                let mut cands = vec![0.0, 1.0];
                if quad < 0.0 {
                    let lin = base.0 * w[i] + base.1 * a[i] + l[i];
                    cands.push((-lin / (2.0 * quad)).clamp(0.0, 1.0));
                }
                for v in cands {
                    let fv = value(v);
                    if fv > best_f + 1e-15 * (1.0 + best_f.abs()) {
                        best_f = fv;
                        best_v = v;
                    }
                }
                if best_v != pi[i] {
                    x = base.0 + a[i] * best_v;
                    y = base.1 + w[i] * best_v;
                    z = base.2 + l[i] * best_v;
                    pi[i] = best_v;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        let f = x * y + z;
        self.offer(f, idx, || pi);
        Ok(())
    }
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: ArrayView1<f64>) -> Array1<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.mapv(|x| (x - theta).max(0.0))
}

fn random_simplex_point(rng: &mut ChaCha8Rng, m: usize) -> Array1<f64> {
    let mut v = Array1::from_shape_fn(m, |_| -(1.0 - rng.random::<f64>()).ln());
    let s = v.sum();
    v /= s;
    v
}

fn search<'a>(conditions: &[QuadraticCondition], config: &'a CheckerConfig) -> std::result::Result<Search<'a>, Stop> {
    let start = Instant::now();
    let mut s = Search {
        config,
        deadline: start + config.time_budget,
        best: f64::NEG_INFINITY,
        best_pi: Vec::new(),
        best_condition: 0,
    };
    if config.time_budget.is_zero() {
        return Err(Stop::Expired);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (idx, q) in conditions.iter().enumerate() {
        s.edge_scan(q, idx)?;
        if s.violated() {
            return Ok(s);
        }
    }
    for (idx, q) in conditions.iter().enumerate() {
        let m = q.m();
        match config.feasible_set {
            FeasibleSet::Simplex => {
                for r in 0..config.restarts {
                    let start = if r == 0 {
                        Array1::from_elem(m, 1.0 / m as f64)
                    } else {
                        random_simplex_point(&mut rng, m)
                    };
                    s.simplex_ascent(q, idx, start)?;
                }
            }
            FeasibleSet::Box => {
                let mut starts = vec![vec![0.0; m], vec![1.0; m]];
                starts.push(q.linear().iter().map(|&x| (x > 0.0) as u8 as f64).collect());
                for _ in 0..config.restarts {
                    starts.push((0..m).map(|_| rng.random_bool(0.5) as u8 as f64).collect());
                }
                for st in starts {
                    s.box_ascent(q, idx, st)?;
                }
            }
        }
        if s.violated() {
            return Ok(s);
        }
    }
    if s.expired() {
        return Err(Stop::Expired);
    }
    Ok(s)
}

/// Maximizes every condition over the configured feasible set.
pub fn check_privacy(conditions: &[QuadraticCondition], config: &CheckerConfig) -> CheckReport {
    match search(conditions, config) {
        Ok(s) => CheckReport {
            decision: if s.violated() {
                Decision::Violated
            } else {
                Decision::Holds
            },
            max_objective: Some(s.best),
            condition: s.best_condition,
            worst_pi: s.best_pi,
        },
        Err(Stop::Expired) => CheckReport {
            decision: Decision::Unknown,
            max_objective: None,
            condition: 0,
            worst_pi: Vec::new(),
        },
    }
}

/// Builds and checks both conditions for one candidate observation.
pub fn check_candidate(
    tracker: &EventTracker,
    mobility: &Mobility,
    candidate: &EmissionColumn,
    config: &CheckerConfig,
) -> Result<CheckReport> {
    let v = tracker.candidate_vectors(mobility, candidate)?;
    Ok(check_privacy(&assemble_conditions(&v, config.epsilon), config))
}

/// Checks one candidate against every event. The combined decision is the
/// conjunction: any violation wins, then any timeout.
pub fn check_all_events(
    trackers: &[EventTracker],
    mobility: &Mobility,
    candidate: &EmissionColumn,
    config: &CheckerConfig,
) -> Result<(Decision, Vec<CheckReport>)> {
    let mut reports = Vec::with_capacity(trackers.len());
    let mut decision = Decision::Holds;
    for tracker in trackers {
        let report = check_candidate(tracker, mobility, candidate, config)?;
        match report.decision {
            Decision::Violated => {
                reports.push(report);
                return Ok((Decision::Violated, reports));
            }
            Decision::Unknown => decision = Decision::Unknown,
            Decision::Holds => {}
        }
        reports.push(report);
    }
    Ok((decision, reports))
}
