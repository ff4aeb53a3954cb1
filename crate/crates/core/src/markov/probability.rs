use ndarray::{s, Array1, Array2};

use super::{lift_at, EmissionColumn, InitialDistribution, Mobility};
use crate::error::{Error, Result};
use crate::event::Event;

/// Ratios above this (or below its inverse) are reported as this value.
pub const LEAKAGE_RATIO_CAP: f64 = 1e12;

const DEGENERATE_TOL: f64 = 1e-12;

/// Joint masses of the event and its complement with an observation prefix,
/// kept as scaled values: the true probability is `value * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointParts {
    pub event: f64,
    pub not_event: f64,
    pub log_scale: f64,
}

impl JointParts {
    pub fn event_probability(&self) -> f64 {
        self.event * self.log_scale.exp()
    }

    pub fn not_event_probability(&self) -> f64 {
        self.not_event * self.log_scale.exp()
    }

    /// `Pr(o_1 .. o_t)`.
    pub fn total(&self) -> f64 {
        (self.event + self.not_event) * self.log_scale.exp()
    }
}

fn check_inputs(pi: &InitialDistribution, event: &Event, mobility: &Mobility) -> Result<()> {
    for found in [pi.m(), event.m()] {
        if found != mobility.m() {
            return Err(Error::DimensionMismatch {
                expected: mobility.m(),
                found,
            });
        }
    }
    Ok(())
}

fn rescale(v: &mut Array1<f64>, log_scale: &mut f64) {
    let s = v.sum();
    if s > 0.0 && s.is_finite() {
        *v /= s;
        *log_scale += s.ln();
    }
}

/// `Pr(Event)` under the initial distribution: `[pi, 0] L_0 L_1 .. L_{end-1}`,
/// summed over the true world.
pub fn prior_probability(pi: &InitialDistribution, event: &Event, mobility: &Mobility) -> Result<f64> {
    check_inputs(pi, event, mobility)?;
    let m = pi.m();
    let mut x = Array1::zeros(2 * m);
    x.slice_mut(s![..m]).assign(&pi.view());
    for t in 0..event.end() {
        x = lift_at(mobility, event, t)?.apply_row(x.view());
    }
    Ok(x.slice(s![m..]).sum())
}

/// Joint masses of `(Event, o_1 .. o_t)` and `(not Event, o_1 .. o_t)` for
/// `t = emissions.len()`, via the forward recursion on the lifted chain.
pub fn joint_parts(
    pi: &InitialDistribution,
    event: &Event,
    mobility: &Mobility,
    emissions: &[EmissionColumn],
) -> Result<JointParts> {
    check_inputs(pi, event, mobility)?;
    let m = pi.m();
    if emissions.is_empty() {
        return Err(Error::InvalidEmission("need at least one observation".into()));
    }
    if let Some(bad) = emissions.iter().find(|e| e.m() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: bad.m(),
        });
    }
    let t = emissions.len() as u32;
    let mut log_scale = 0.0;
    let mut x = Array1::zeros(2 * m);
    x.slice_mut(s![..m]).assign(&pi.view());
    x = lift_at(mobility, event, 0)?.apply_row(x.view());
    x *= &emissions[0].lifted();
    rescale(&mut x, &mut log_scale);
    for i in 1..t {
        x = lift_at(mobility, event, i)?.apply_row(x.view());
        x *= &emissions[i as usize].lifted();
        rescale(&mut x, &mut log_scale);
    }
    for i in t..event.end() {
        x = lift_at(mobility, event, i)?.apply_row(x.view());
    }
    Ok(JointParts {
        event: x.slice(s![m..]).sum(),
        not_event: x.slice(s![..m]).sum(),
        log_scale,
    })
}

/// `Pr(Event, o_1 .. o_t)`.
pub fn joint_probability(
    pi: &InitialDistribution,
    event: &Event,
    mobility: &Mobility,
    emissions: &[EmissionColumn],
) -> Result<f64> {
    Ok(joint_parts(pi, event, mobility, emissions)?.event_probability())
}

/// `Pr(o_1 .. o_t)` from the plain forward algorithm on the unlifted chain.
pub fn forward_likelihood(pi: &InitialDistribution, mobility: &Mobility, emissions: &[EmissionColumn]) -> Result<f64> {
    let alphas = forward_pass(pi, mobility, emissions)?;
    Ok(alphas.1.exp())
}

/// Scaled forward vectors (each summing to one) and the total log likelihood.
fn forward_pass(
    pi: &InitialDistribution,
    mobility: &Mobility,
    emissions: &[EmissionColumn],
) -> Result<(Vec<Array1<f64>>, f64)> {
    let m = mobility.m();
    if pi.m() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: pi.m(),
        });
    }
    let mut out: Vec<Array1<f64>> = Vec::with_capacity(emissions.len());
    let mut log_lik = 0.0;
    for (i, e) in emissions.iter().enumerate() {
        if e.m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: e.m(),
            });
        }
        let mut a = match out.last() {
            None => pi.view().to_owned(),
            Some(prev) => mobility.at(i as u32)?.mul_row(prev.view()),
        };
        a *= &e.view();
        let s = a.sum();
        if s <= 0.0 {
            return Err(Error::Inconsistent(format!(
                "observation at t = {} has zero likelihood",
                i + 1
            )));
        }
        a /= s;
        log_lik += s.ln();
        out.push(a);
    }
    Ok((out, log_lik))
}

/// Smoothed marginals `Pr(l_t = s_k | o_1 .. o_T)` as an `m x T` matrix.
pub fn forward_backward_posterior(
    pi: &InitialDistribution,
    mobility: &Mobility,
    emissions: &[EmissionColumn],
) -> Result<Array2<f64>> {
    if emissions.is_empty() {
        return Err(Error::InvalidEmission("need at least one observation".into()));
    }
    let (alphas, _) = forward_pass(pi, mobility, emissions)?;
    let m = mobility.m();
    let n = emissions.len();
    let mut out = Array2::zeros((m, n));
    let mut beta = Array1::<f64>::ones(m);
    for t in (0..n).rev() {
        if t + 1 < n {
            let next = &beta * &emissions[t + 1].view();
            beta = mobility.at(t as u32 + 1)?.mul_col(next.view());
            let s = beta.sum();
            if s > 0.0 {
                beta /= s;
            }
        }
        let mut col = &alphas[t] * &beta;
        let z = col.sum();
        if !(z > 0.0) {
            return Err(Error::Inconsistent(format!(
                "zero posterior normalizer at t = {}",
                t + 1
            )));
        }
        col /= z;
        out.column_mut(t).assign(&col);
    }
    Ok(out)
}

/// The larger of `r` and `1 / r`, where `r` compares the observation
/// likelihood under the event with the likelihood under its complement.
/// Capped at [`LEAKAGE_RATIO_CAP`].
pub fn leakage_ratio(
    pi: &InitialDistribution,
    event: &Event,
    mobility: &Mobility,
    emissions: &[EmissionColumn],
) -> Result<f64> {
    let prior = prior_probability(pi, event, mobility)?;
    if prior <= DEGENERATE_TOL || prior >= 1.0 - DEGENERATE_TOL {
        return Err(Error::DegenerateEvent { prior });
    }
    let parts = joint_parts(pi, event, mobility, emissions)?;
    let num = parts.event * (1.0 - prior);
    let den = parts.not_event * prior;
    if num <= 0.0 && den <= 0.0 {
        return Err(Error::Inconsistent("observations have zero likelihood".into()));
    }
    if num <= 0.0 || den <= 0.0 {
        return Ok(LEAKAGE_RATIO_CAP);
    }
    let r = num / den;
    Ok(r.max(1.0 / r).min(LEAKAGE_RATIO_CAP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{EventKind, Region};
    use crate::markov::TransitionMatrix;

    fn example() -> (Mobility, Event) {
        let m = TransitionMatrix::from_rows(&[vec![0.1, 0.2, 0.7], vec![0.4, 0.1, 0.5], vec![0.0, 0.1, 0.9]]).unwrap();
        let r = Region::from_mask(vec![true, true, false]).unwrap();
        (m.into(), Event::presence(r, 3, 4).unwrap())
    }

    #[test]
    fn point_priors_give_worked_values() {
        let (mob, e) = example();
        for (k, want) in [0.28, 0.298, 0.226].into_iter().enumerate() {
            let p = prior_probability(&InitialDistribution::point(3, k), &e, &mob).unwrap();
            assert!((p - want).abs() < 1e-12, "{k}: {p}");
        }
    }

    #[test]
    fn uninformative_joint_is_prior() {
        let (mob, e) = example();
        let pi = InitialDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let prior = prior_probability(&pi, &e, &mob).unwrap();
        for t in 1..7 {
            let em = vec![EmissionColumn::uninformative(3); t];
            let j = joint_probability(&pi, &e, &mob, &em).unwrap();
            assert!((j - prior).abs() < 1e-12);
            assert!((leakage_ratio(&pi, &e, &mob, &em).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn certain_event_has_unit_prior() {
        let (mob, _) = example();
        let e = Event::presence(Region::full(3), 2, 2).unwrap();
        let p = prior_probability(&InitialDistribution::uniform(3), &e, &mob).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(matches!(
            leakage_ratio(
                &InitialDistribution::uniform(3),
                &e,
                &mob,
                &[EmissionColumn::uninformative(3)]
            ),
            Err(Error::DegenerateEvent { .. })
        ));
    }

    #[test]
    fn start_at_one_splits_the_initial_vector() {
        let (mob, _) = example();
        let r = Region::from_cells(3, &[2]).unwrap();
        let e = Event::new(EventKind::Pattern, vec![r], &[1]).unwrap();
        let pi = InitialDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert!((prior_probability(&pi, &e, &mob).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn revealing_emissions_hit_the_cap() {
        let (mob, e) = example();
        let pi = InitialDistribution::uniform(3);
        let reveal = |c: usize| EmissionColumn::new((0..3).map(|i| (i == c) as u8 as f64).collect()).unwrap();
        let em = vec![reveal(2), reveal(1), reveal(0)];
        assert_eq!(leakage_ratio(&pi, &e, &mob, &em).unwrap(), LEAKAGE_RATIO_CAP);
    }

    #[test]
    fn posterior_of_point_observation() {
        let (mob, _) = example();
        let em = [EmissionColumn::new(vec![0.0, 1.0, 0.0]).unwrap()];
        let post = forward_backward_posterior(&InitialDistribution::uniform(3), &mob, &em).unwrap();
        assert_eq!(post.column(0).to_vec(), vec![0.0, 1.0, 0.0]);
        let bad = [EmissionColumn::new(vec![1.0, 0.0, 0.0]).unwrap()];
        assert!(forward_backward_posterior(&InitialDistribution::point(3, 2), &mob, &bad).is_err());
    }

    #[test]
    fn uninformative_posterior_is_markov_marginal() {
        let (mob, _) = example();
        let pi = InitialDistribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let em = vec![EmissionColumn::uninformative(3); 4];
        let post = forward_backward_posterior(&pi, &mob, &em).unwrap();
        let mut x = pi.view().to_owned();
        for t in 0..4 {
            for k in 0..3 {
                assert!((post[[k, t]] - x[k]).abs() < 1e-12);
            }
            x = mob.at(1).unwrap().mul_row(x.view());
        }
    }
}
