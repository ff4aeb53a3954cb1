use ndarray::{s, Array1, Array2, Zip};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::markov::{lift_at, EmissionColumn, LiftBlock, Mobility};

const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    AtOrBeforeEnd,
    AfterEnd,
}

/// The vectors of the privacy conditions, restricted to the false-world
/// coordinates that pair with an initial vector `[pi, 0]`.
///
/// For any prior `pi`: `pi . a = Pr(Event)`,
/// `pi . b * exp(log_scale) = Pr(Event, o_1 .. o_t)` and
/// `pi . c * exp(log_scale) = Pr(o_1 .. o_t)`. Both conditions are
/// homogeneous in `(b, c)`, so the common scale never changes a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckVectors {
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub c: Array1<f64>,
    pub log_scale: f64,
    pub t: u32,
    pub regime: Regime,
}

impl CheckVectors {
    pub fn m(&self) -> usize {
        self.a.len()
    }
}

/// Observation-free suffix columns `S_t = L_t .. L_{end-1} [0, 1]^T` for
/// `t = 1 ..= end`, and the prior vector `a`.
fn suffix_columns(event: &Event, mobility: &Mobility) -> Result<(Vec<Array1<f64>>, Array1<f64>)> {
    if mobility.m() != event.m() {
        return Err(Error::DimensionMismatch {
            expected: mobility.m(),
            found: event.m(),
        });
    }
    let m = event.m();
    let end = event.end();
    let mut col = Array1::zeros(2 * m);
    col.slice_mut(s![m..]).fill(1.0);
    let mut out = vec![col.clone(); end as usize];
    for t in (1..end).rev() {
        col = lift_at(mobility, event, t)?.apply_col(col.view());
        out[t as usize - 1] = col.clone();
    }
    let a = lift_at(mobility, event, 0)?.apply_col(col.view());
    Ok((out, a.slice(s![..m]).to_owned()))
}

fn normalize(v: &mut Array1<f64>, w: &mut Array1<f64>, log_scale: &mut f64) {
    let top = w.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if top > 0.0 && top.is_finite() {
        *v /= top;
        *w /= top;
        *log_scale += top.ln();
    }
}

/// Backward evaluation of `b` and `c` for the observation columns
/// `committed ++ [candidate]`.
fn backward_vectors(
    event: &Event,
    mobility: &Mobility,
    suffix: &[Array1<f64>],
    a: &Array1<f64>,
    committed: &[EmissionColumn],
    candidate: &EmissionColumn,
) -> Result<CheckVectors> {
    let m = event.m();
    if candidate.m() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: candidate.m(),
        });
    }
    let t = committed.len() as u32 + 1;
    let end = event.end();
    let column = |k: u32| -> &EmissionColumn {
        if k == t {
            candidate
        } else {
            &committed[k as usize - 1]
        }
    };
    let mut log_scale = 0.0;
    // The two halves of the total-probability vector always coincide, so it
    // is carried as a single m-vector next to the two halves of b.
    let (mut bf, mut bt, mut c, mut k);
    if t > end {
        // After the window the lifts are block diagonal, so both vectors
        // share one m-dimensional backward column u.
        let mut u = candidate.view().to_owned();
        let mut scratch = Array1::zeros(0);
        for i in (end + 1..t).rev() {
            u = mobility.at(i)?.mul_col(u.view());
            u *= &column(i).view();
            normalize(&mut scratch, &mut u, &mut log_scale);
        }
        u = mobility.at(end)?.mul_col(u.view());
        bf = Array1::zeros(m);
        bt = u.clone();
        c = u;
        k = end;
    } else {
        let sfx = &suffix[t as usize - 1];
        bf = sfx.slice(s![..m]).to_owned();
        bt = sfx.slice(s![m..]).to_owned();
        c = Array1::ones(m);
        k = t;
    }
    let mut stack = Array2::zeros((m, 3));
    loop {
        let p = column(k).view();
        bf *= &p;
        bt *= &p;
        c *= &p;
        let top = c.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
        if top > 0.0 && top.is_finite() {
            bf /= top;
            bt /= top;
            c /= top;
            log_scale += top.ln();
        }
        k -= 1;
        let lift = lift_at(mobility, event, k)?;
        let (top_in, bottom_in) = match lift.block() {
            LiftBlock::Diagonal => (bf.view(), bt.view()),
            LiftBlock::Split(r) => {
                Zip::indexed(&mut bf).for_each(|i, x| {
                    if r.contains(i) {
                        *x = bt[i];
                    }
                });
                (bf.view(), bt.view())
            }
            LiftBlock::Filter(r) => {
                Zip::indexed(&mut bt).for_each(|i, x| {
                    if !r.contains(i) {
                        *x = bf[i];
                    }
                });
                (bf.view(), bt.view())
            }
        };
        stack.column_mut(0).assign(&top_in);
        stack.column_mut(1).assign(&bottom_in);
        stack.column_mut(2).assign(&c);
        let out = match lift.base() {
            Some(base) => base.view().dot(&stack),
            None => stack.clone(),
        };
        bf = out.column(0).to_owned();
        bt = out.column(1).to_owned();
        c = out.column(2).to_owned();
        if k == 0 {
            break;
        }
    }
    Ok(CheckVectors {
        a: a.clone(),
        b: bf,
        c,
        log_scale,
        t,
        regime: if t <= end {
            Regime::AtOrBeforeEnd
        } else {
            Regime::AfterEnd
        },
    })
}

/// Condition vectors for the observation prefix `emissions` (`t = len`).
pub fn build_check_vectors(event: &Event, mobility: &Mobility, emissions: &[EmissionColumn]) -> Result<CheckVectors> {
    let (last, committed) = emissions
        .split_last()
        .ok_or_else(|| Error::InvalidEmission("need at least one observation".into()))?;
    let (suffix, a) = suffix_columns(event, mobility)?;
    backward_vectors(event, mobility, &suffix, &a, committed, last)
}

/// Per-event checking state for a streaming session: the observation-free
/// suffix columns and prior vector are computed once, and committed
/// observation columns are appended as releases happen.
#[derive(Debug, Clone)]
pub struct EventTracker {
    event: Event,
    suffix: Vec<Array1<f64>>,
    a: Array1<f64>,
    committed: Vec<EmissionColumn>,
}

impl EventTracker {
    /// Fails with [`Error::DegenerateEvent`] when the event is impossible or
    /// certain under every prior.
    pub fn new(event: Event, mobility: &Mobility) -> Result<Self> {
        let (suffix, a) = suffix_columns(&event, mobility)?;
        let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= DEGENERATE_TOL {
            return Err(Error::DegenerateEvent { prior: hi });
        }
        if lo >= 1.0 - DEGENERATE_TOL {
            return Err(Error::DegenerateEvent { prior: lo });
        }
        Ok(Self {
            event,
            suffix,
            a,
            committed: Vec::new(),
        })
    }

    pub fn event(&self) -> &Event {
        &self.event
    }

    /// `Pr(Event)` as a linear function of the prior.
    pub fn prior_vector(&self) -> &Array1<f64> {
        &self.a
    }

    /// The timestamp the next candidate is checked at.
    pub fn next_t(&self) -> u32 {
        self.committed.len() as u32 + 1
    }

    pub fn committed(&self) -> &[EmissionColumn] {
        &self.committed
    }

    pub fn candidate_vectors(&self, mobility: &Mobility, candidate: &EmissionColumn) -> Result<CheckVectors> {
        backward_vectors(&self.event, mobility, &self.suffix, &self.a, &self.committed, candidate)
    }

    pub fn commit(&mut self, column: EmissionColumn) {
        self.committed.push(column);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Region;
    use crate::markov::{joint_parts, prior_probability, InitialDistribution, TransitionMatrix};

    fn setup() -> (Mobility, Event) {
        let m = TransitionMatrix::from_rows(&[vec![0.1, 0.2, 0.7], vec![0.4, 0.1, 0.5], vec![0.0, 0.1, 0.9]]).unwrap();
        let r = Region::from_mask(vec![true, true, false]).unwrap();
        (m.into(), Event::presence(r, 3, 4).unwrap())
    }

    fn cols(n: usize) -> Vec<EmissionColumn> {
        (0..n)
            .map(|k| EmissionColumn::new(vec![0.2 + 0.1 * k as f64, 0.6, 0.9 - 0.1 * k as f64]).unwrap())
            .collect()
    }

    #[test]
    fn first_step_vectors() {
        let (mob, e) = setup();
        let em = cols(1);
        let v = build_check_vectors(&e, &mob, &em).unwrap();
        let scale = v.log_scale.exp();
        for i in 0..3 {
            assert!((v.b[i] * scale - em[0].as_slice()[i] * v.a[i]).abs() < 1e-12);
            assert!((v.c[i] * scale - em[0].as_slice()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn uninformative_vectors_reduce_to_prior() {
        let (mob, e) = setup();
        for t in 1..7 {
            let v = build_check_vectors(&e, &mob, &vec![EmissionColumn::uninformative(3); t]).unwrap();
            let scale = v.log_scale.exp();
            for i in 0..3 {
                assert!((v.b[i] * scale - v.a[i]).abs() < 1e-12);
                assert!((v.c[i] * scale - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vectors_reproduce_joint_probabilities() {
        let (mob, e) = setup();
        let pi = InitialDistribution::new(vec![0.5, 0.2, 0.3]).unwrap();
        let prior = prior_probability(&pi, &e, &mob).unwrap();
        let em = cols(7);
        for t in 1..=7 {
            let v = build_check_vectors(&e, &mob, &em[..t]).unwrap();
            let parts = joint_parts(&pi, &e, &mob, &em[..t]).unwrap();
            let scale = v.log_scale.exp();
            assert!((pi.view().dot(&v.a) - prior).abs() < 1e-12);
            assert!((pi.view().dot(&v.b) * scale - parts.event_probability()).abs() < 1e-12);
            assert!((pi.view().dot(&v.c) * scale - parts.total()).abs() < 1e-12);
            assert_eq!(v.regime == Regime::AfterEnd, t > 4);
        }
    }

    #[test]
    fn tracker_matches_batch_builder() {
        let (mob, e) = setup();
        let em = cols(6);
        let mut tracker = EventTracker::new(e.clone(), &mob).unwrap();
        for (k, col) in em.iter().enumerate() {
            assert_eq!(tracker.next_t(), k as u32 + 1);
            let inc = tracker.candidate_vectors(&mob, col).unwrap();
            let batch = build_check_vectors(&e, &mob, &em[..=k]).unwrap();
            assert_eq!(inc, batch);
            tracker.commit(col.clone());
        }
    }

    #[test]
    fn full_map_event_is_degenerate() {
        let (mob, _) = setup();
        let e = Event::presence(Region::full(3), 2, 3).unwrap();
        assert!(matches!(EventTracker::new(e, &mob), Err(Error::DegenerateEvent { .. })));
    }
}
