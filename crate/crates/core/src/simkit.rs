//! Synthetic maps, Gaussian-kernel mobility, trajectory sampling, transition
//! estimation and trajectory CSV ingestion.

use std::path::Path;

use log::warn;
use ndarray::Array2;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::GridMap;
use crate::markov::{InitialDistribution, Mobility, TransitionMatrix};

/// Smoothing mass added to every entry of a row that has unseen transitions.
pub const SMOOTHING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub width: usize,
    pub height: usize,
    /// Cell side in km.
    pub cell_size: f64,
    /// Gaussian kernel scale in km.
    pub sigma: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            cell_size: 0.4,
            sigma: 1.5,
            horizon: 50,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        self.map().map(|_| ())
    }

    pub fn map(&self) -> Result<GridMap> {
        GridMap::new(self.width, self.height, self.cell_size)
    }
}

/// `M[i][j]` proportional to `exp(-d(i,j)^2 / (2 sigma^2))`, rows normalized.
pub fn generate_transition(map: &GridMap, sigma: f64) -> Result<TransitionMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let m = map.m();
    let mut entries = Array2::zeros((m, m));
    for i in 0..m {
        // Shift by the smallest off-diagonal distance so tiny sigmas do not
        // underflow the whole row.
        let d2: Vec<f64> = (0..m).map(|j| map.distance(i, j).powi(2)).collect();
        let base = d2.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut row = entries.row_mut(i);
        for j in 0..m {
            row[j] = (-(d2[j] - base) / (2.0 * sigma * sigma)).exp();
        }
        let s = row.sum();
        row /= s;
    }
    TransitionMatrix::new(entries)
}

/// Samples `x_1 ~ pi`, then `x_{t+1} ~ M_t[x_t, .]`.
pub fn generate_trajectory(
    mobility: &Mobility,
    pi: &InitialDistribution,
    horizon: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trajectory(mobility, pi, horizon, &mut rng)
}

pub fn sample_trajectory<R: rand::Rng + ?Sized>(
    mobility: &Mobility,
    pi: &InitialDistribution,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if pi.m() != mobility.m() {
        return Err(Error::DimensionMismatch {
            expected: mobility.m(),
            found: pi.m(),
        });
    }
    let mut out = Vec::with_capacity(horizon);
    if horizon == 0 {
        return Ok(out);
    }
    let first = WeightedIndex::new(pi.as_slice()).map_err(|e| Error::NotDistribution(e.to_string()))?;
    out.push(first.sample(rng));
    for t in 1..horizon {
        let m = mobility.at(t as u32)?;
        let row = m.row(out[t - 1]);
        let next = WeightedIndex::new(row.iter()).map_err(|e| Error::NotStochastic(e.to_string()))?;
        out.push(next.sample(rng));
    }
    Ok(out)
}

/// Maximum-likelihood bigram estimate over `m` states. Rows with unseen
/// transitions receive [`SMOOTHING`] on every entry before renormalizing.
pub fn estimate_transition(traces: &[Vec<usize>], m: usize) -> Result<TransitionMatrix> {
    let mut counts = Array2::<f64>::zeros((m, m));
    let mut seen = 0usize;
    for trace in traces {
        for w in trace.windows(2) {
            for &c in w {
                if c >= m {
                    return Err(Error::CellOutOfRange { cell: c, m });
                }
            }
            counts[[w[0], w[1]]] += 1.0;
            seen += 1;
        }
    }
    if seen == 0 {
        return Err(Error::EmptyInput("no transitions observed".into()));
    }
    for mut row in counts.rows_mut() {
        let total = row.sum();
        if total > 0.0 {
            row /= total;
        }
        if row.iter().any(|&x| x == 0.0) {
            row += SMOOTHING;
            let s = row.sum();
            row /= s;
        }
    }
    TransitionMatrix::new(counts)
}

/// Geographic extent mapped onto the grid: latitude spans rows, longitude
/// spans columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(Error::Config(format!("degenerate bounding box {self:?}")));
        }
        Ok(())
    }

    /// The containing cell and whether the fix had to be clamped.
    pub fn snap(&self, map: &GridMap, lat: f64, lon: f64) -> (usize, bool) {
        let axis = |v: f64, lo: f64, hi: f64, n: usize| -> (usize, bool) {
            let k = ((v - lo) / (hi - lo) * n as f64).floor();
            if k < 0.0 || v < lo {
                (0, true)
            } else if k >= n as f64 {
                // The upper edge itself belongs to the last cell.
                (n - 1, v > hi)
            } else {
                (k as usize, false)
            }
        };
        let (row, r_out) = axis(lat, self.lat_min, self.lat_max, map.height());
        let (col, c_out) = axis(lon, self.lon_min, self.lon_max, map.width());
        (map.index(row, col), r_out || c_out)
    }

    /// Geographic center of a cell.
    pub fn cell_center(&self, map: &GridMap, cell: usize) -> (f64, f64) {
        let (row, col) = map.row_col(cell);
        let lat = self.lat_min + (row as f64 + 0.5) / map.height() as f64 * (self.lat_max - self.lat_min);
        let lon = self.lon_min + (col as f64 + 0.5) / map.width() as f64 * (self.lon_max - self.lon_min);
        (lat, lon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub times: Vec<u64>,
    pub cells: Vec<usize>,
    /// Fixes outside the bounding box that were moved to a boundary cell.
    pub clamped: usize,
}

/// Reads `t,cell` or `t,lat,lon` (chosen by header). Latitude/longitude files
/// need a bounding box. Timestamps must be strictly increasing.
pub fn ingest_csv(path: impl AsRef<Path>, map: &GridMap, bbox: Option<&BoundingBox>) -> Result<Ingested> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_ascii_lowercase).collect();
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let geo = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["t", "cell"] => false,
        ["t", "lat", "lon"] => true,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header t,cell or t,lat,lon, found {}", header.join(",")),
            ))
        }
    };
    if geo {
        bbox.ok_or_else(|| Error::Config("latitude/longitude input needs a bounding box".into()))?
            .validate()?;
    }
    let mut out = Ingested {
        times: Vec::new(),
        cells: Vec::new(),
        clamped: 0,
    };
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let want = if geo { 3 } else { 2 };
        if rec.len() != want {
            return Err(parse_err(line, format!("expected {want} fields, found {}", rec.len())));
        }
        let t: u64 = rec[0]
            .parse()
            .map_err(|e| parse_err(line, format!("timestamp {:?}: {e}", &rec[0])))?;
        if out.times.last().is_some_and(|&prev| t <= prev) {
            return Err(parse_err(line, format!("timestamp {t} does not increase")));
        }
        let cell = if geo {
            let num = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("bad coordinate {:?}", &rec[k])))
            };
            let (cell, clamped) = bbox.expect("checked above").snap(map, num(1)?, num(2)?);
            out.clamped += clamped as usize;
            cell
        } else {
            let c: usize = rec[1]
                .parse()
                .map_err(|e| parse_err(line, format!("cell {:?}: {e}", &rec[1])))?;
            if c >= map.m() {
                return Err(parse_err(line, format!("cell {c} outside a map of {} cells", map.m())));
            }
            c
        };
        out.times.push(t);
        out.cells.push(cell);
    }
    if out.clamped > 0 {
        warn!(
            "{}: {} fixes outside the bounding box were clamped",
            path.display(),
            out.clamped
        );
    }
    Ok(out)
}

/// Writes a `t,cell` trajectory with timestamps `1..=len`.
pub fn write_trajectory_csv(path: impl AsRef<Path>, cells: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "cell"])?;
    for (k, c) in cells.iter().enumerate() {
        w.write_record([(k + 1).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn row_sums_ok(m: &TransitionMatrix) -> bool {
        m.view().rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-12)
    }

    #[test]
    fn kernel_limits() {
        let map = GridMap::new(4, 4, 1.0).unwrap();
        let wide = generate_transition(&map, 1e6).unwrap();
        assert!(wide.view().iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-9));
        let narrow = generate_transition(&map, 0.05).unwrap();
        for i in 0..16 {
            assert!(narrow.get(i, i) > 0.999);
        }
        for sigma in [0.3, 1.0, 2.5, 7.0] {
            assert!(row_sums_ok(&generate_transition(&map, sigma).unwrap()));
        }
        assert!(generate_transition(&map, 0.0).is_err());
    }

    #[test]
    fn transposed_grid_permutes_consistently() {
        let a = GridMap::new(3, 5, 1.0).unwrap();
        let b = GridMap::new(5, 3, 1.0).unwrap();
        let ma = generate_transition(&a, 1.3).unwrap();
        let mb = generate_transition(&b, 1.3).unwrap();
        let tr = |cell: usize| {
            let (r, c) = a.row_col(cell);
            b.index(c, r)
        };
        for i in 0..15 {
            for j in 0..15 {
                assert!((ma.get(i, j) - mb.get(tr(i), tr(j))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn permutation_orbit_and_seed() {
        let perm = TransitionMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]])
            .unwrap()
            .into();
        let traj = generate_trajectory(&perm, &InitialDistribution::point(3, 1), 7, 3).unwrap();
        assert_eq!(traj, vec![1, 2, 0, 1, 2, 0, 1]);
        let map = GridMap::new(5, 5, 1.0).unwrap();
        let mob: Mobility = generate_transition(&map, 1.0).unwrap().into();
        let pi = InitialDistribution::uniform(25);
        assert_eq!(
            generate_trajectory(&mob, &pi, 50, 9).unwrap(),
            generate_trajectory(&mob, &pi, 50, 9).unwrap()
        );
    }

    #[test]
    fn estimation() {
        let est = estimate_transition(&[vec![0, 1, 0, 1, 0, 1]], 3).unwrap();
        assert!(est.get(0, 1) > 1.0 - 3e-6 && est.get(1, 0) > 1.0 - 3e-6);
        assert!(est.get(0, 0) <= 3e-6 && est.get(2, 2) > 0.3);
        assert!(row_sums_ok(&est));
        assert!(matches!(estimate_transition(&[], 3), Err(Error::EmptyInput(_))));
        assert!(matches!(estimate_transition(&[vec![2]], 3), Err(Error::EmptyInput(_))));

        let truth =
            TransitionMatrix::from_rows(&[vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.25, 0.25, 0.5]]).unwrap();
        let mob: Mobility = truth.clone().into();
        let traj = generate_trajectory(&mob, &InitialDistribution::uniform(3), 100_000, 1).unwrap();
        let est = estimate_transition(std::slice::from_ref(&traj), 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((est.get(i, j) - truth.get(i, j)).abs() < 0.05);
            }
        }
        // Bigram frequencies within three standard errors.
        let mut from = [0.0; 3];
        for w in traj.windows(2) {
            from[w[0]] += 1.0;
        }
        for i in 0..3 {
            for j in 0..3 {
                let p = truth.get(i, j);
                let se = (p * (1.0 - p) / from[i]).sqrt();
                assert!((est.get(i, j) - p).abs() < 3.0 * se + 1e-6);
            }
        }
    }

    #[test]
    fn ingestion() {
        let map = GridMap::new(4, 3, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cells = vec![0, 5, 11, 7, 7, 3];
        let p = dir.path().join("cells.csv");
        write_trajectory_csv(&p, &cells).unwrap();
        let back = ingest_csv(&p, &map, None).unwrap();
        assert_eq!(back.cells, cells);
        assert_eq!(back.times, vec![1, 2, 3, 4, 5, 6]);

        let bbox = BoundingBox {
            lat_min: 39.0,
            lat_max: 39.3,
            lon_min: 116.0,
            lon_max: 116.4,
        };
        let p = dir.path().join("geo.csv");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "t,lat,lon").unwrap();
        for (k, c) in (0..12).enumerate() {
            let (lat, lon) = bbox.cell_center(&map, c);
            writeln!(f, "{},{lat},{lon}", k * 10).unwrap();
        }
        writeln!(f, "500,45.0,100.0").unwrap();
        drop(f);
        let back = ingest_csv(&p, &map, Some(&bbox)).unwrap();
        assert_eq!(back.cells[..12], (0..12).collect::<Vec<_>>()[..]);
        assert_eq!(back.cells[12], map.index(2, 0));
        assert_eq!(back.clamped, 1);

        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t,cell\n1,0\n2,x\n").unwrap();
        match ingest_csv(&p, &map, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "t,cell\n2,0\n2,1\n").unwrap();
        assert!(matches!(ingest_csv(&p, &map, None), Err(Error::Parse { line: 3, .. })));
    }
}
