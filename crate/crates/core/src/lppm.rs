//! Location perturbation mechanisms: a discrete Planar Laplace mechanism, its
//! restriction to a delta-location set, and Bayesian posterior tracking.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::event::GridMap;
use crate::markov::{validate_distribution, EmissionColumn, TransitionMatrix};

/// Distances between cell centers, plus for every ordered pair `(x, y)` the
/// largest distance gain `max_z d(y, z) - d(x, z)`.
#[derive(Debug, Clone)]
pub struct MapGeometry {
    map: GridMap,
    dist: Array2<f64>,
    gain: Array2<f64>,
}

impl MapGeometry {
    pub fn new(map: GridMap) -> Self {
        let m = map.m();
        let dist = Array2::from_shape_vec((m, m), map.distance_table()).expect("square table");
        let mut gain = Array2::zeros((m, m));
        for x in 0..m {
            let dx = dist.row(x);
            for y in 0..m {
                let dy = dist.row(y);
                gain[[x, y]] = dy
                    .iter()
                    .zip(dx.iter())
                    .fold(f64::NEG_INFINITY, |acc, (a, b)| acc.max(a - b));
            }
        }
        Self { map, dist, gain }
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn m(&self) -> usize {
        self.map.m()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[[a, b]]
    }

    fn kernel(&self, rate: f64) -> (Array2<f64>, Array1<f64>) {
        let kernel = self.dist.mapv(|d| (-rate * d).exp());
        let norm = kernel.sum_axis(ndarray::Axis(1));
        (kernel, norm)
    }

    /// Largest excess of `log Pr(z|x) - log Pr(z|y) - alpha d(x, y)` over all
    /// `x, y, z` for the row-normalized kernel with the given rate.
    fn excess(&self, rate: f64, alpha: f64) -> f64 {
        let (_, norm) = self.kernel(rate);
        let log_norm = norm.mapv(f64::ln);
        let m = self.m();
        let mut worst = f64::NEG_INFINITY;
        for x in 0..m {
            for y in 0..m {
                if x != y {
                    let e = rate * self.gain[[x, y]] + log_norm[y] - log_norm[x] - alpha * self.dist[[x, y]];
                    worst = worst.max(e);
                }
            }
        }
        worst
    }

    /// The largest kernel rate in `(0, alpha]` whose row-normalized matrix is
    /// exactly alpha-geo-indistinguishable on this map.
    pub fn calibrated_rate(&self, alpha: f64) -> f64 {
        const SLACK: f64 = 1e-13;
        if self.m() == 1 || self.excess(alpha, alpha) <= SLACK {
            return alpha;
        }
        const GRID: usize = 32;
        let mut lo = 0.0;
        let mut hi = alpha;
        for k in 1..=GRID {
            let r = alpha * k as f64 / GRID as f64;
            if self.excess(r, alpha) > SLACK {
                hi = r;
                break;
            }
            lo = r;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.excess(mid, alpha) > SLACK {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }
}

/// Discrete Planar Laplace mechanism on a grid: row `x` of the emission matrix
/// is proportional to `exp(-rate * d(x, z))` over output cells `z`, with the
/// rate calibrated so that `Pr(z|x) <= exp(alpha d(x, y)) Pr(z|y)` holds for
/// every pair of cells.
#[derive(Debug, Clone)]
pub struct PlanarLaplace {
    alpha: f64,
    rate: f64,
    geometry: Arc<MapGeometry>,
    kernel: Array2<f64>,
    norm: Array1<f64>,
}

impl PlanarLaplace {
    pub fn new(alpha: f64, map: GridMap) -> Result<Self> {
        Self::with_geometry(alpha, Arc::new(MapGeometry::new(map)))
    }

    pub fn with_geometry(alpha: f64, geometry: Arc<MapGeometry>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!("PLM budget must be positive, got {alpha}")));
        }
        let rate = geometry.calibrated_rate(alpha);
        let (kernel, norm) = geometry.kernel(rate);
        Ok(Self {
            alpha,
            rate,
            geometry,
            kernel,
            norm,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The kernel rate actually used, at most `alpha`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn geometry(&self) -> &Arc<MapGeometry> {
        &self.geometry
    }

    pub fn m(&self) -> usize {
        self.norm.len()
    }

    /// Row-stochastic `m x m` matrix, row = true cell, column = output cell.
    pub fn emission_matrix(&self) -> Array2<f64> {
        let mut e = self.kernel.clone();
        for (mut row, &z) in e.rows_mut().into_iter().zip(self.norm.iter()) {
            row /= z;
        }
        e
    }

    /// Likelihood column `Pr(o | l = s_i)` for output `o`.
    pub fn column(&self, o: usize) -> EmissionColumn {
        let col = Array1::from_shape_fn(self.m(), |i| (self.kernel[[i, o]] / self.norm[i]).min(1.0));
        EmissionColumn::new(col.to_vec()).expect("entries in [0, 1]")
    }

    pub fn sample<R: Rng + ?Sized>(&self, true_cell: usize, rng: &mut R) -> usize {
        sample_weights(self.kernel.row(true_cell), self.norm[true_cell], rng)
    }

    /// Restriction of the mechanism to the outputs in `set`.
    pub fn restrict<'a>(&'a self, set: &'a DeltaLocationSet) -> RestrictedPlm<'a> {
        let norm = Array1::from_shape_fn(self.m(), |i| {
            set.cells.iter().map(|&j| self.kernel[[i, j]]).sum::<f64>()
        });
        RestrictedPlm { base: self, set, norm }
    }
}

fn sample_weights<R: Rng + ?Sized>(weights: ArrayView1<f64>, total: f64, rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = j;
            if u < w {
                return j;
            }
            u -= w;
        }
    }
    last
}

/// The Planar Laplace mechanism with outputs confined to a delta-location set
/// and each row renormalized over it.
#[derive(Debug, Clone)]
pub struct RestrictedPlm<'a> {
    base: &'a PlanarLaplace,
    set: &'a DeltaLocationSet,
    norm: Array1<f64>,
}

impl RestrictedPlm<'_> {
    pub fn emission_matrix(&self) -> Array2<f64> {
        let m = self.base.m();
        Array2::from_shape_fn((m, m), |(i, j)| {
            if self.set.contains(j) {
                self.base.kernel[[i, j]] / self.norm[i]
            } else {
                0.0
            }
        })
    }

    pub fn column(&self, o: usize) -> EmissionColumn {
        let m = self.base.m();
        let inside = self.set.contains(o);
        let col = (0..m)
            .map(|i| {
                if inside {
                    (self.base.kernel[[i, o]] / self.norm[i]).min(1.0)
                } else {
                    0.0
                }
            })
            .collect();
        EmissionColumn::new(col).expect("entries in [0, 1]")
    }

    pub fn sample<R: Rng + ?Sized>(&self, true_cell: usize, rng: &mut R) -> usize {
        let row = self.base.kernel.row(true_cell);
        let mut u = rng.random::<f64>() * self.norm[true_cell];
        for &j in &self.set.cells {
            let w = row[j];
            if u < w {
                return j;
            }
            u -= w;
        }
        *self.set.cells.last().expect("nonempty set")
    }
}

/// The uniform release over a set of outputs: the budget-zero limit of the
/// mechanisms above. Its likelihood column is the same for every true cell.
pub fn uniform_column(m: usize, outputs: usize) -> EmissionColumn {
    EmissionColumn::new(vec![1.0 / outputs as f64; m]).expect("valid column")
}

/// The smallest set of cells carrying prior mass at least `1 - delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLocationSet {
    delta: f64,
    mask: Vec<bool>,
    /// Members in ascending index order.
    cells: Vec<usize>,
}

impl DeltaLocationSet {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    pub fn full(m: usize) -> Self {
        Self {
            delta: 0.0,
            mask: vec![true; m],
            cells: (0..m).collect(),
        }
    }
}

/// Mass comparisons against `1 - delta` allow this much rounding.
pub const DELTA_SET_TOL: f64 = 1e-12;

/// Greedy construction: cells by descending probability, ties by ascending
/// index, until the accumulated mass reaches `1 - delta`.
pub fn compute_delta_set(p_minus: ArrayView1<f64>, delta: f64) -> Result<DeltaLocationSet> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Config(format!("delta must lie in [0, 1), got {delta}")));
    }
    let m = p_minus.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_minus[j].total_cmp(&p_minus[i]).then(i.cmp(&j)));
    let target = 1.0 - delta - DELTA_SET_TOL;
    let mut mask = vec![false; m];
    let mut cum = 0.0;
    for &i in &order {
        if cum >= target || (p_minus[i] <= 0.0 && cum > 0.0) {
            break;
        }
        mask[i] = true;
        cum += p_minus[i];
    }
    let cells = (0..m).filter(|&i| mask[i]).collect();
    Ok(DeltaLocationSet { delta, mask, cells })
}

/// Bayes update `p+[i] ∝ Pr(o | l = s_i) p-[i]`.
pub fn posterior_update(p_minus: ArrayView1<f64>, column: &EmissionColumn) -> Result<Array1<f64>> {
    if column.m() != p_minus.len() {
        return Err(Error::DimensionMismatch {
            expected: p_minus.len(),
            found: column.m(),
        });
    }
    let mut post = &p_minus * &column.view();
    let z = post.sum();
    if !(z > 0.0) {
        return Err(Error::Inconsistent(
            "released observation is impossible under the prior".into(),
        ));
    }
    post /= z;
    Ok(post)
}

/// Predicted and filtered location distributions of the release loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub p_minus: Array1<f64>,
    pub p_plus: Array1<f64>,
    steps: u32,
}

impl PosteriorState {
    /// Starts from the distribution at time 1.
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        validate_distribution(&pi)?;
        let p = Array1::from(pi);
        Ok(Self {
            p_minus: p.clone(),
            p_plus: p,
            steps: 0,
        })
    }

    /// Prediction for the next timestamp; the first call keeps the initial
    /// distribution.
    pub fn predict(&mut self, transition: &TransitionMatrix) -> ArrayView1<'_, f64> {
        if self.steps > 0 {
            self.p_minus = transition.mul_row(self.p_plus.view());
        }
        self.p_minus.view()
    }

    pub fn update(&mut self, column: &EmissionColumn) -> Result<()> {
        self.p_plus = posterior_update(self.p_minus.view(), column)?;
        self.steps += 1;
        Ok(())
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }
}
