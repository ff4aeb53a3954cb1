//! Markov mobility model, emission columns, the two-world lifting, and
//! exact event probabilities.

mod lift;
mod probability;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub use lift::{initial_lift, lift_at, lift_transition, LiftBlock, LiftedTransition};
pub use probability::{
    forward_backward_posterior, forward_likelihood, joint_parts, joint_probability, leakage_ratio, prior_probability,
    JointParts, LEAKAGE_RATIO_CAP,
};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Row-stochastic `m x m` transition matrix. Keeps a contiguous transpose so
/// that both `M x` and `x M` run as cache-friendly matrix-vector products.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    forward: Array2<f64>,
    transposed: Array2<f64>,
}

impl TransitionMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::NotStochastic(format!("matrix is {r}x{c}, expected square")));
        }
        for (i, row) in entries.rows().into_iter().enumerate() {
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::NotStochastic(format!("row {i} has entry {x}")));
            }
            let s = row.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic(format!("row {i} sums to {s}")));
            }
        }
        let transposed = entries.t().as_standard_layout().into_owned();
        Ok(Self {
            forward: entries,
            transposed,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let mut a = Array2::zeros((m, m));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                a[[i, j]] = x;
            }
        }
        Self::new(a)
    }

    pub fn identity(m: usize) -> Self {
        Self::new(Array2::eye(m)).expect("identity is stochastic")
    }

    pub fn m(&self) -> usize {
        self.forward.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.forward[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.forward.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.forward.row(i)
    }

    /// `M x` for a column vector `x`.
    pub fn mul_col(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.forward.dot(&x)
    }

    /// `x M` for a row vector `x`.
    pub fn mul_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.transposed.dot(&x)
    }

    /// `X M` for a matrix `X` with `m` columns.
    pub fn right_mul(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.forward)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_rows(&read_matrix_csv(path.as_ref())?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for row in self.forward.rows() {
            w.write_record(row.iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: line as u64 + 1,
                    msg: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a headerless emission matrix; row `i` holds `Pr(. | l = s_i)`.
/// Entries must lie in `[0, 1]`; rows need not sum to one.
pub fn load_emission_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let rows = read_matrix_csv(path)?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidEmission(format!(
            "{}: expected a square matrix",
            path.display()
        )));
    }
    if let Some(x) = rows.iter().flatten().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidEmission(format!("entry {x} outside [0, 1]")));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

/// A homogeneous chain or one transition matrix per step.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    Homogeneous(TransitionMatrix),
    /// `steps[i]` drives the transition from time `i + 1` to `i + 2`.
    TimeVarying(Vec<TransitionMatrix>),
}

impl Mobility {
    pub fn time_varying(steps: Vec<TransitionMatrix>) -> Result<Self> {
        let m = steps
            .first()
            .ok_or_else(|| Error::Config("time-varying model needs at least one matrix".into()))?
            .m();
        if let Some(bad) = steps.iter().find(|s| s.m() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: bad.m(),
            });
        }
        Ok(Self::TimeVarying(steps))
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Homogeneous(t) => t.m(),
            Self::TimeVarying(v) => v[0].m(),
        }
    }

    /// The matrix for the transition from time `t` to `t + 1` (`t >= 1`).
    pub fn at(&self, t: u32) -> Result<&TransitionMatrix> {
        match self {
            Self::Homogeneous(m) => Ok(m),
            Self::TimeVarying(v) => t
                .checked_sub(1)
                .and_then(|i| v.get(i as usize))
                .ok_or(Error::MissingTransition(t)),
        }
    }
}

impl From<TransitionMatrix> for Mobility {
    fn from(m: TransitionMatrix) -> Self {
        Self::Homogeneous(m)
    }
}

/// Probability vector `pi` over the cells at time 1.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution(Array1<f64>);

impl InitialDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_distribution(&values)?;
        Ok(Self(Array1::from(values)))
    }

    pub fn uniform(m: usize) -> Self {
        Self(Array1::from_elem(m, 1.0 / m as f64))
    }

    pub fn point(m: usize, cell: usize) -> Self {
        let mut v = Array1::zeros(m);
        v[cell] = 1.0;
        Self(v)
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }
}

pub(crate) fn validate_distribution(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::NotDistribution("empty vector".into()));
    }
    if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::NotDistribution(format!("entry {x} outside [0, 1]")));
    }
    let s: f64 = values.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotDistribution(format!("sums to {s}")));
    }
    Ok(())
}

/// Likelihood column `Pr(o_t | l_t = s_i)` for one released observation.
/// Not normalized across cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionColumn(Array1<f64>);

impl EmissionColumn {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidEmission("empty column".into()));
        }
        if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidEmission(format!("entry {x} outside [0, 1]")));
        }
        Ok(Self(Array1::from(values)))
    }

    /// All-ones column: the observation carries no information.
    pub fn uninformative(m: usize) -> Self {
        Self(Array1::ones(m))
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }

    /// The column duplicated across both worlds, `[p, p]`.
    pub fn lifted(&self) -> Array1<f64> {
        let m = self.m();
        Array1::from_shape_fn(2 * m, |i| self.0[i % m])
    }

    /// Column `o` of an emission matrix whose row `i` is `Pr(. | l = s_i)`.
    pub fn from_matrix(emission: ArrayView2<f64>, o: usize) -> Result<Self> {
        if o >= emission.ncols() {
            return Err(Error::CellOutOfRange {
                cell: o,
                m: emission.ncols(),
            });
        }
        Self::new(emission.column(o).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![1.2, -0.2], vec![0.0, 1.0]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![1.0], vec![1.0]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![0.3, 0.7], vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn row_and_column_products_agree_with_definition() {
        let m = TransitionMatrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let x = Array1::from(vec![2.0, 5.0]);
        assert_eq!(
            m.mul_col(x.view()).to_vec(),
            vec![0.3 * 2.0 + 0.7 * 5.0, 0.6 * 2.0 + 0.4 * 5.0]
        );
        assert_eq!(
            m.mul_row(x.view()).to_vec(),
            vec![0.3 * 2.0 + 0.6 * 5.0, 0.7 * 2.0 + 0.4 * 5.0]
        );
    }

    #[test]
    fn time_varying_lookup() {
        let a = TransitionMatrix::identity(2);
        let b = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mob = Mobility::time_varying(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(mob.at(1).unwrap(), &a);
        assert_eq!(mob.at(2).unwrap(), &b);
        assert!(matches!(mob.at(3), Err(Error::MissingTransition(3))));
        assert!(Mobility::time_varying(vec![a, TransitionMatrix::identity(3)]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = TransitionMatrix::from_rows(&[vec![0.1, 0.9], vec![0.25, 0.75]]).unwrap();
        m.write_csv(&path).unwrap();
        assert_eq!(TransitionMatrix::load_csv(&path).unwrap(), m);
        std::fs::write(&path, "0.5,0.5\n0.5,zero\n").unwrap();
        let err = TransitionMatrix::load_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn distributions_and_columns_validate() {
        assert!(InitialDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(InitialDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(EmissionColumn::new(vec![1.5]).is_err());
        let c = EmissionColumn::new(vec![0.2, 0.9]).unwrap();
        assert_eq!(c.lifted().to_vec(), vec![0.2, 0.9, 0.2, 0.9]);
    }
}
