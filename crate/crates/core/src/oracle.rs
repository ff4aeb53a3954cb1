//! Brute-force reference computations by trajectory enumeration. Exponential
//! in the horizon and deliberately unoptimized.

use ndarray::Array2;
use rand::Rng;

use crate::checker::QuadraticCondition;
use crate::error::{Error, Result};
use crate::event::{Event, EventKind, Region};
use crate::markov::{EmissionColumn, InitialDistribution, Mobility, TransitionMatrix};

/// Default bound on the number of enumerated trajectories.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// All `m^T` cell sequences of length `T` in lexicographic order.
#[derive(Debug, Clone)]
pub struct TrajectoryEnumeration {
    m: usize,
    current: Option<Vec<usize>>,
}

impl TrajectoryEnumeration {
    pub fn new(m: usize, horizon: usize, cap: u64) -> Result<Self> {
        let count = (m as f64).powi(horizon as i32);
        if count > cap as f64 {
            return Err(Error::EnumerationTooLarge { requested: count, cap });
        }
        Ok(Self {
            m,
            current: (m > 0).then(|| vec![0; horizon]),
        })
    }
}

impl Iterator for TrajectoryEnumeration {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        for k in (0..next.len()).rev() {
            next[k] += 1;
            if next[k] < self.m {
                self.current = Some(next);
                break;
            }
            next[k] = 0;
        }
        Some(out)
    }
}

/// `pi[x_1] * prod M_t[x_t, x_{t+1}]`.
pub fn trajectory_probability(pi: &InitialDistribution, mobility: &Mobility, trajectory: &[usize]) -> Result<f64> {
    let Some(&first) = trajectory.first() else {
        return Ok(1.0);
    };
    let mut p = pi.as_slice()[first];
    for (i, w) in trajectory.windows(2).enumerate() {
        if p == 0.0 {
            break;
        }
        p *= mobility.at(i as u32 + 1)?.get(w[0], w[1]);
    }
    Ok(p)
}

fn emission_weight(emissions: &[EmissionColumn], trajectory: &[usize]) -> f64 {
    emissions
        .iter()
        .zip(trajectory)
        .map(|(e, &x)| e.as_slice()[x])
        .product()
}

/// `Pr(Event)` by summing over every trajectory up to the event end.
pub fn naive_prior(pi: &InitialDistribution, mobility: &Mobility, event: &Event) -> Result<f64> {
    naive_prior_with_cap(pi, mobility, event, ENUMERATION_CAP)
}

pub fn naive_prior_with_cap(pi: &InitialDistribution, mobility: &Mobility, event: &Event, cap: u64) -> Result<f64> {
    let mut total = 0.0;
    for traj in TrajectoryEnumeration::new(pi.m(), event.end() as usize, cap)? {
        if event.evaluate(&traj)? {
            total += trajectory_probability(pi, mobility, &traj)?;
        }
    }
    Ok(total)
}

/// `(Pr(Event, o_1 .. o_t), Pr(not Event, o_1 .. o_t))` by enumeration over the
/// horizon `max(t, end)`; timestamps after `t` are marginalized.
pub fn naive_joint_parts(
    pi: &InitialDistribution,
    mobility: &Mobility,
    event: &Event,
    emissions: &[EmissionColumn],
    cap: u64,
) -> Result<(f64, f64)> {
    let horizon = emissions.len().max(event.end() as usize);
    let (mut yes, mut no) = (0.0, 0.0);
    for traj in TrajectoryEnumeration::new(pi.m(), horizon, cap)? {
        let w = trajectory_probability(pi, mobility, &traj)? * emission_weight(emissions, &traj);
        if event.evaluate(&traj)? {
            yes += w;
        } else {
            no += w;
        }
    }
    Ok((yes, no))
}

/// `Pr(Event, o_1 .. o_t)` by enumeration.
pub fn naive_joint(
    pi: &InitialDistribution,
    mobility: &Mobility,
    event: &Event,
    emissions: &[EmissionColumn],
) -> Result<f64> {
    Ok(naive_joint_parts(pi, mobility, event, emissions, ENUMERATION_CAP)?.0)
}

/// `Pr(l_t = s_k | o_1 .. o_T)` by enumerating every trajectory.
pub fn naive_posterior(
    pi: &InitialDistribution,
    mobility: &Mobility,
    emissions: &[EmissionColumn],
) -> Result<Array2<f64>> {
    let m = pi.m();
    let n = emissions.len();
    let mut out = Array2::zeros((m, n));
    for traj in TrajectoryEnumeration::new(m, n, ENUMERATION_CAP)? {
        let w = trajectory_probability(pi, mobility, &traj)? * emission_weight(emissions, &traj);
        for (t, &x) in traj.iter().enumerate() {
            out[[x, t]] += w;
        }
    }
    for mut col in out.columns_mut() {
        let z = col.sum();
        if z <= 0.0 {
            return Err(Error::Inconsistent("observation sequence has zero likelihood".into()));
        }
        col /= z;
    }
    Ok(out)
}

/// Joint probability of a Pattern with the observations inside its window,
/// enumerating only the trajectories that satisfy it. `before` is the location
/// distribution at `start - 1` and `emissions[k]` belongs to time `start + k`.
pub fn naive_pattern_window_joint(
    before: &InitialDistribution,
    transition: &TransitionMatrix,
    event: &Event,
    emissions: &[EmissionColumn],
) -> Result<f64> {
    if event.kind() != EventKind::Pattern {
        return Err(Error::InvalidEvent("window enumeration needs a Pattern".into()));
    }
    if emissions.len() != event.len() {
        return Err(Error::DimensionMismatch {
            expected: event.len(),
            found: emissions.len(),
        });
    }
    let cells: Vec<Vec<usize>> = event.regions().iter().map(|r| r.cells().collect()).collect();
    let entry = transition.mul_row(before.view());
    let mut idx = vec![0usize; cells.len()];
    let mut total = 0.0;
    loop {
        let first = cells[0][idx[0]];
        let mut p = entry[first] * emissions[0].as_slice()[first];
        for k in 1..cells.len() {
            let (a, b) = (cells[k - 1][idx[k - 1]], cells[k][idx[k]]);
            p *= transition.get(a, b) * emissions[k].as_slice()[b];
        }
        total += p;
        let mut k = cells.len();
        loop {
            if k == 0 {
                return Ok(total);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < cells[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// A random small model for oracle comparisons.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub pi: InitialDistribution,
    pub mobility: Mobility,
    pub event: Event,
    pub emissions: Vec<EmissionColumn>,
}

impl RandomInstance {
    /// `m` in `2..=max_m`, event end and observation count in `1..=max_t`,
    /// with dense random rows, regions and emission entries.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, max_m: usize, max_t: usize) -> Result<Self> {
        let m = rng.random_range(2..=max_m.max(2));
        let dist = |rng: &mut R| -> Vec<f64> {
            let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        };
        let pi = InitialDistribution::new(dist(rng))?;
        let rows: Vec<Vec<f64>> = (0..m).map(|_| dist(rng)).collect();
        let mobility = TransitionMatrix::from_rows(&rows)?.into();
        let start = rng.random_range(1..=max_t as u32);
        let end = rng.random_range(start..=max_t as u32);
        let kind = if rng.random_bool(0.5) {
            EventKind::Presence
        } else {
            EventKind::Pattern
        };
        let regions = (start..=end)
            .map(|_| {
                let mut mask: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
                if !mask.iter().any(|&b| b) {
                    mask[rng.random_range(0..m)] = true;
                }
                Region::from_mask(mask)
            })
            .collect::<Result<Vec<_>>>()?;
        let times: Vec<u32> = (start..=end).collect();
        let event = Event::new(kind, regions, &times)?;
        let t = rng.random_range(1..=max_t);
        let emissions = (0..t)
            .map(|_| EmissionColumn::new((0..m).map(|_| rng.random::<f64>()).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pi,
            mobility,
            event,
            emissions,
        })
    }
}

/// Largest value of any condition over the simplex grid with coordinates in
/// multiples of `1 / steps`, and the grid point attaining it.
pub fn grid_search_max(conditions: &[QuadraticCondition], steps: usize) -> Result<(f64, Vec<f64>)> {
    let m = conditions.first().map_or(0, QuadraticCondition::m);
    if m == 0 || steps == 0 || conditions.iter().any(|q| q.m() != m) {
        return Err(Error::InvalidEmission(
            "grid search needs conditions of one positive size".into(),
        ));
    }
    let h = 1.0 / steps as f64;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for q in conditions {
        let (a, w, l) = (q.a(), q.w(), q.linear());
        let mut counts = vec![0usize; m];
        grid_walk(&mut counts, 0, steps, &mut |counts| {
            let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
            for (i, &k) in counts.iter().enumerate() {
                if k > 0 {
                    let p = k as f64 * h;
                    x += p * a[i];
                    y += p * w[i];
                    z += p * l[i];
                }
            }
            let f = x * y + z;
            if f > best.0 {
                best = (f, counts.iter().map(|&k| k as f64 * h).collect());
            }
        });
    }
    Ok(best)
}

fn grid_walk(counts: &mut [usize], i: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
    if i + 1 == counts.len() {
        counts[i] = left;
        visit(counts);
        return;
    }
    for k in 0..=left {
        counts[i] = k;
        grid_walk(counts, i + 1, left - k, visit);
    }
    counts[i] = 0;
}
