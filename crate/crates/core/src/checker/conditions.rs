use ndarray::{Array1, Array2, ArrayView1};

use super::CheckVectors;

/// `f(pi) = (pi . a)(pi . w) + pi . linear`, i.e. `pi Q pi^T + pi . linear`
/// with the symmetric rank-two `Q = (a w^T + w a^T) / 2`. The condition holds
/// when `f <= 0` over the whole feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCondition {
    a: Array1<f64>,
    w: Array1<f64>,
    linear: Array1<f64>,
}

impl QuadraticCondition {
    pub fn new(a: Array1<f64>, w: Array1<f64>, linear: Array1<f64>) -> Self {
        assert!(a.len() == w.len() && a.len() == linear.len(), "factor lengths differ");
        Self { a, w, linear }
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> ArrayView1<'_, f64> {
        self.a.view()
    }

    pub fn w(&self) -> ArrayView1<'_, f64> {
        self.w.view()
    }

    pub fn linear(&self) -> ArrayView1<'_, f64> {
        self.linear.view()
    }

    /// The dense symmetric quadratic form.
    pub fn q_matrix(&self) -> Array2<f64> {
        let m = self.m();
        Array2::from_shape_fn((m, m), |(i, j)| 0.5 * (self.a[i] * self.w[j] + self.w[i] * self.a[j]))
    }

    pub fn objective(&self, pi: ArrayView1<f64>) -> f64 {
        pi.dot(&self.a) * pi.dot(&self.w) + pi.dot(&self.linear)
    }

    pub fn gradient(&self, pi: ArrayView1<f64>) -> Array1<f64> {
        let x = pi.dot(&self.a);
        let y = pi.dot(&self.w);
        &self.a * y + &self.w * x + &self.linear
    }
}

/// The two conditions bounding the likelihood ratio and its inverse by
/// `e^epsilon`, both divided by `e^epsilon` so large budgets stay well
/// conditioned.
pub fn assemble_conditions(v: &CheckVectors, epsilon: f64) -> [QuadraticCondition; 2] {
    let inv = (-epsilon).exp();
    let keep = -(-epsilon).exp_m1();
    let upper = QuadraticCondition::new(v.a.clone(), &v.b * keep - &v.c, &v.b * inv);
    let lower = QuadraticCondition::new(v.a.clone(), &v.b * keep + &v.c * inv, &v.b * -1.0);
    [upper, lower]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Regime;

    #[test]
    fn dense_form_matches_factored_objective() {
        let q = QuadraticCondition::new(
            Array1::from(vec![0.2, 0.9, 0.4]),
            Array1::from(vec![-1.0, 0.5, 0.3]),
            Array1::from(vec![0.1, -0.2, 0.05]),
        );
        let pi = Array1::from(vec![0.3, 0.3, 0.4]);
        let dense = pi.dot(&q.q_matrix().dot(&pi)) + pi.dot(&q.linear());
        assert!((dense - q.objective(pi.view())).abs() < 1e-15);
        let qm = q.q_matrix();
        assert_eq!(qm, qm.t());
        let g = q.gradient(pi.view());
        let want = qm.dot(&pi) * 2.0 + q.linear();
        assert!((&g - &want).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn uninformative_ratio_holds_with_equality_at_zero_epsilon() {
        let a = Array1::from(vec![0.2, 0.7, 0.5]);
        let v = CheckVectors {
            b: a.clone(),
            c: Array1::ones(3),
            a,
            log_scale: 0.0,
            t: 1,
            regime: Regime::AtOrBeforeEnd,
        };
        for pi in [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5], [0.0, 0.5, 0.5]] {
            let pi = Array1::from(pi.to_vec());
            for c in assemble_conditions(&v, 0.0) {
                assert!(c.objective(pi.view()).abs() < 1e-15);
            }
            for c in assemble_conditions(&v, 1.0) {
                assert!(c.objective(pi.view()) <= 1e-15);
            }
        }
    }
}
