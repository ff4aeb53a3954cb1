//! Streaming release loops: draw a perturbed location, check every protected
//! event, and halve the mechanism budget until the check passes.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use log::{debug, warn};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checker::{check_all_events, check_candidate, CheckerConfig, Decision, EventTracker};
use crate::error::{Error, Result};
use crate::event::Event;
use crate::lppm::{compute_delta_set, uniform_column, MapGeometry, PlanarLaplace, PosteriorState};
use crate::markov::{EmissionColumn, Mobility};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    GeoInd,
    DeltaLoc { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub initial_alpha: f64,
    pub decay: f64,
    /// Below this budget the uniform release is emitted directly.
    pub alpha_floor: f64,
    pub checker: CheckerConfig,
}

impl SessionConfig {
    pub fn new(epsilon: f64, initial_alpha: f64) -> Self {
        Self {
            initial_alpha,
            decay: 0.5,
            alpha_floor: initial_alpha * 2f64.powi(-20),
            checker: CheckerConfig::new(epsilon),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.checker.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_alpha.is_finite() && self.initial_alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.initial_alpha
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!("decay must lie in (0, 1), got {}", self.decay)));
        }
        if !(self.alpha_floor > 0.0 && self.alpha_floor <= self.initial_alpha) {
            return Err(Error::Config(format!("alpha floor {} out of range", self.alpha_floor)));
        }
        self.checker.validate()
    }
}

/// Planar Laplace mechanisms for the budgets `initial * decay^k`, built on
/// first use and shared between sessions and threads.
#[derive(Debug)]
pub struct MechanismLadder {
    geometry: Arc<MapGeometry>,
    initial_alpha: f64,
    decay: f64,
    levels: Vec<OnceLock<Arc<PlanarLaplace>>>,
}

impl MechanismLadder {
    pub fn new(geometry: Arc<MapGeometry>, config: &SessionConfig) -> Self {
        let mut n = 0;
        while config.initial_alpha * config.decay.powi(n) >= config.alpha_floor {
            n += 1;
        }
        Self {
            geometry,
            initial_alpha: config.initial_alpha,
            decay: config.decay,
            levels: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn geometry(&self) -> &Arc<MapGeometry> {
        &self.geometry
    }

    /// Number of budgets above the floor.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn alpha(&self, level: usize) -> f64 {
        self.initial_alpha * self.decay.powi(level as i32)
    }

    pub fn level(&self, level: usize) -> Result<Arc<PlanarLaplace>> {
        let slot = &self.levels[level];
        if let Some(p) = slot.get() {
            return Ok(p.clone());
        }
        let p = Arc::new(PlanarLaplace::with_geometry(self.alpha(level), self.geometry.clone())?);
        Ok(slot.get_or_init(|| p).clone())
    }
}

/// One committed release. `final_alpha` is 0 for the uniform fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub t: u32,
    pub true_cell: usize,
    pub released_cell: usize,
    pub final_alpha: f64,
    pub attempts: u32,
    pub decision_path: Vec<Decision>,
    pub euclid_km: f64,
}

/// Release state for one user: per-event trackers, committed observations and
/// (for the delta-location variant) the posterior over locations.
#[derive(Debug)]
pub struct PrivacySession<'a> {
    config: SessionConfig,
    mobility: &'a Mobility,
    ladder: &'a MechanismLadder,
    trackers: Vec<EventTracker>,
    dropped: Vec<Event>,
    columns: Vec<EmissionColumn>,
    released: Vec<usize>,
    posterior: PosteriorState,
}

impl<'a> PrivacySession<'a> {
    /// Events that are impossible or certain under every prior cannot be
    /// protected as stated; they are dropped with a warning.
    pub fn new(
        config: SessionConfig,
        mobility: &'a Mobility,
        ladder: &'a MechanismLadder,
        events: &[Event],
    ) -> Result<Self> {
        config.validate()?;
        let m = mobility.m();
        if ladder.geometry().m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: ladder.geometry().m(),
            });
        }
        let mut trackers = Vec::new();
        let mut dropped = Vec::new();
        for e in events {
            match EventTracker::new(e.clone(), mobility) {
                Ok(t) => trackers.push(t),
                Err(Error::DegenerateEvent { prior }) => {
                    warn!(
                        "dropping event {}: prior is {prior} for every initial distribution",
                        e.to_expression()
                    );
                    dropped.push(e.clone());
                }
                Err(err) => return Err(err),
            }
        }
        Ok(Self {
            config,
            mobility,
            ladder,
            trackers,
            dropped,
            columns: Vec::new(),
            released: Vec::new(),
            posterior: PosteriorState::new(vec![1.0 / m as f64; m])?,
        })
    }

    /// The timestamp of the next release.
    pub fn clock(&self) -> u32 {
        self.columns.len() as u32 + 1
    }

    pub fn trackers(&self) -> &[EventTracker] {
        &self.trackers
    }

    pub fn dropped_events(&self) -> &[Event] {
        &self.dropped
    }

    pub fn committed_columns(&self) -> &[EmissionColumn] {
        &self.columns
    }

    pub fn released(&self) -> &[usize] {
        &self.released
    }

    pub fn posterior(&self) -> &PosteriorState {
        &self.posterior
    }

    fn check(&self, column: &EmissionColumn) -> Result<Decision> {
        if self.trackers.is_empty() {
            return Ok(Decision::Holds);
        }
        Ok(check_all_events(&self.trackers, self.mobility, column, &self.config.checker)?.0)
    }

    fn commit(&mut self, released: usize, column: EmissionColumn) {
        for tr in &mut self.trackers {
            tr.commit(column.clone());
        }
        self.columns.push(column);
        self.released.push(released);
    }

    fn record(&self, true_cell: usize, released: usize, final_alpha: f64, path: Vec<Decision>) -> ReleaseRecord {
        ReleaseRecord {
            t: self.clock(),
            true_cell,
            released_cell: released,
            final_alpha,
            attempts: path.len().max(1) as u32,
            decision_path: path,
            euclid_km: self.ladder.geometry().distance(true_cell, released),
        }
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        let m = self.mobility.m();
        if cell >= m {
            return Err(Error::CellOutOfRange { cell, m });
        }
        Ok(())
    }

    /// Planar Laplace release with budget halving.
    pub fn release_geoind<R: Rng + ?Sized>(&mut self, true_cell: usize, rng: &mut R) -> Result<ReleaseRecord> {
        self.check_cell(true_cell)?;
        let mut path = Vec::new();
        for level in 0..self.ladder.len() {
            let plm = self.ladder.level(level)?;
            let o = plm.sample(true_cell, rng);
            let column = plm.column(o);
            let decision = self.check(&column)?;
            path.push(decision);
            if decision == Decision::Holds {
                let rec = self.record(true_cell, o, plm.alpha(), path);
                self.commit(o, column);
                return Ok(rec);
            }
        }
        let m = self.mobility.m();
        let o = rng.random_range(0..m);
        debug!("t = {}: budget floor reached, releasing uniformly", self.clock());
        let rec = self.record(true_cell, o, 0.0, path);
        self.commit(o, uniform_column(m, m));
        Ok(rec)
    }

    /// Release confined to the delta-location set of the current prediction,
    /// followed by the posterior update.
    pub fn release_deltaloc<R: Rng + ?Sized>(
        &mut self,
        true_cell: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<ReleaseRecord> {
        self.check_cell(true_cell)?;
        let t = self.clock();
        let p_minus = self
            .posterior
            .predict(self.mobility.at(t.saturating_sub(1).max(1))?)
            .to_owned();
        let set = compute_delta_set(p_minus.view(), delta)?;
        let mut path = Vec::new();
        let mut chosen = None;
        for level in 0..self.ladder.len() {
            let plm = self.ladder.level(level)?;
            let restricted = plm.restrict(&set);
            let o = restricted.sample(true_cell, rng);
            let column = restricted.column(o);
            let decision = self.check(&column)?;
            path.push(decision);
            if decision == Decision::Holds {
                chosen = Some((o, column, plm.alpha()));
                break;
            }
        }
        let (o, column, alpha) = match chosen {
            Some(c) => c,
            None => {
                let o = set.cells()[rng.random_range(0..set.len())];
                (o, uniform_column(self.mobility.m(), set.len()), 0.0)
            }
        };
        self.posterior.update(&column)?;
        let rec = self.record(true_cell, o, alpha, path);
        self.commit(o, column);
        Ok(rec)
    }

    pub fn release<R: Rng + ?Sized>(
        &mut self,
        algorithm: Algorithm,
        true_cell: usize,
        rng: &mut R,
    ) -> Result<ReleaseRecord> {
        match algorithm {
            Algorithm::GeoInd => self.release_geoind(true_cell, rng),
            Algorithm::DeltaLoc { delta } => self.release_deltaloc(true_cell, delta, rng),
        }
    }
}

/// The outcome of one session over a whole trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRun {
    pub records: Vec<ReleaseRecord>,
    pub columns: Vec<EmissionColumn>,
    pub dropped_events: usize,
}

impl SessionRun {
    pub fn released(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.released_cell).collect()
    }
}

pub fn run_session<R: Rng + ?Sized>(
    config: &SessionConfig,
    algorithm: Algorithm,
    trajectory: &[usize],
    mobility: &Mobility,
    ladder: &MechanismLadder,
    events: &[Event],
    rng: &mut R,
) -> Result<SessionRun> {
    let mut session = PrivacySession::new(config.clone(), mobility, ladder, events)?;
    let mut records = Vec::with_capacity(trajectory.len());
    for &cell in trajectory {
        records.push(session.release(algorithm, cell, rng)?);
    }
    Ok(SessionRun {
        records,
        columns: session.columns,
        dropped_events: session.dropped.len(),
    })
}

/// Generator for run `index` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A failed timestamp found by [`replay_verify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayFailure {
    pub event: usize,
    pub t: u32,
    pub decision: Decision,
}

/// Re-checks every committed observation against every protectable event.
/// Returns the number of checks performed and the failures.
pub fn replay_verify(
    events: &[Event],
    mobility: &Mobility,
    columns: &[EmissionColumn],
    checker: &CheckerConfig,
) -> Result<(usize, Vec<ReplayFailure>)> {
    let mut checks = 0;
    let mut failures = Vec::new();
    for (idx, e) in events.iter().enumerate() {
        let mut tracker = match EventTracker::new(e.clone(), mobility) {
            Ok(t) => t,
            Err(Error::DegenerateEvent { .. }) => continue,
            Err(err) => return Err(err),
        };
        for col in columns {
            let report = check_candidate(&tracker, mobility, col, checker)?;
            checks += 1;
            if report.decision != Decision::Holds {
                failures.push(ReplayFailure {
                    event: idx,
                    t: tracker.next_t(),
                    decision: report.decision,
                });
            }
            tracker.commit(col.clone());
        }
    }
    Ok((checks, failures))
}

/// Per-timestamp mean and sample standard deviation across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: u32,
    pub mean_alpha: f64,
    pub sd_alpha: f64,
    pub mean_dist: f64,
    pub sd_dist: f64,
}

pub fn summarize(runs: &[Vec<ReleaseRecord>]) -> Vec<SummaryRow> {
    let horizon = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..horizon)
        .map(|k| {
            let alphas: Vec<f64> = runs.iter().filter_map(|r| r.get(k)).map(|r| r.final_alpha).collect();
            let dists: Vec<f64> = runs.iter().filter_map(|r| r.get(k)).map(|r| r.euclid_km).collect();
            SummaryRow {
                t: k as u32 + 1,
                mean_alpha: crate::stats::mean(&alphas),
                sd_alpha: crate::stats::sample_sd(&alphas),
                mean_dist: crate::stats::mean(&dists),
                sd_dist: crate::stats::sample_sd(&dists),
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LogRow {
    t: u32,
    true_cell: usize,
    released_cell: usize,
    final_alpha: f64,
    attempts: u32,
    euclid_km: f64,
}

/// Writes the internal run log. Contains attempt counts, so it is not part of
/// the released output.
pub fn write_run_log(path: impl AsRef<Path>, records: &[ReleaseRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(LogRow {
            t: r.t,
            true_cell: r.true_cell,
            released_cell: r.released_cell,
            final_alpha: r.final_alpha,
            attempts: r.attempts,
            euclid_km: r.euclid_km,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a run log back; decision paths are not stored and come back empty.
pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<ReleaseRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<LogRow>()
        .map(|row| {
            let row = row?;
            Ok(ReleaseRecord {
                t: row.t,
                true_cell: row.true_cell,
                released_cell: row.released_cell,
                final_alpha: row.final_alpha,
                attempts: row.attempts,
                decision_path: Vec::new(),
                euclid_km: row.euclid_km,
            })
        })
        .collect()
}

/// The externally visible channel: timestamps and released cells only.
pub fn write_released(path: impl AsRef<Path>, records: &[ReleaseRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "cell"])?;
    for r in records {
        w.write_record([r.t.to_string(), r.released_cell.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean committed budget over every record of every run.
pub fn mean_budget(runs: &[Vec<ReleaseRecord>]) -> f64 {
    let all: Vec<f64> = runs.iter().flatten().map(|r| r.final_alpha).collect();
    crate::stats::mean(&all)
}

/// Mean committed budget of one run restricted to timestamps in `window`.
pub fn window_mean(records: &[ReleaseRecord], window: std::ops::RangeInclusive<u32>) -> f64 {
    let v: Vec<f64> = records
        .iter()
        .filter(|r| window.contains(&r.t))
        .map(|r| r.final_alpha)
        .collect();
    crate::stats::mean(&v)
}

/// Uniform prior used for delta-location sets.
pub fn uniform_prior(m: usize) -> Array1<f64> {
    Array1::from_elem(m, 1.0 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{GridMap, Region};
    use crate::markov::TransitionMatrix;

    fn small_world() -> (Mobility, Arc<MapGeometry>, Vec<Event>) {
        let map = GridMap::new(3, 3, 1.0).unwrap();
        let m = map.m();
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let w: Vec<f64> = (0..m).map(|j| (-map.distance(i, j).powi(2)).exp()).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let mob = TransitionMatrix::from_rows(&rows).unwrap().into();
        let e = Event::presence(Region::from_cells(m, &[0, 1, 3]).unwrap(), 3, 5).unwrap();
        (mob, Arc::new(MapGeometry::new(map)), vec![e])
    }

    #[test]
    fn vacuous_epsilon_commits_first_draw() {
        let (mob, geo, events) = small_world();
        let config = SessionConfig::new(100.0, 1.0);
        let ladder = MechanismLadder::new(geo, &config);
        let mut rng = run_rng(7, 0);
        let traj = [0, 1, 4, 4, 8, 7, 6, 3];
        let run = run_session(&config, Algorithm::GeoInd, &traj, &mob, &ladder, &events, &mut rng).unwrap();
        assert!(run.records.iter().all(|r| r.final_alpha == 1.0 && r.attempts == 1));
    }

    #[test]
    fn committed_traces_replay_cleanly() {
        let (mob, geo, events) = small_world();
        for algorithm in [Algorithm::GeoInd, Algorithm::DeltaLoc { delta: 0.2 }] {
            let config = SessionConfig::new(0.2, 5.0);
            let ladder = MechanismLadder::new(geo.clone(), &config);
            for seed in 0..5 {
                let mut rng = run_rng(seed, 1);
                let traj = [0, 1, 0, 3, 4, 5, 8, 7];
                let run = run_session(&config, algorithm, &traj, &mob, &ladder, &events, &mut rng).unwrap();
                assert!(run.records.iter().any(|r| r.attempts > 1));
                let (checks, failures) = replay_verify(&events, &mob, &run.columns, &config.checker).unwrap();
                assert_eq!(checks, traj.len());
                assert!(failures.is_empty(), "{failures:?}");
            }
        }
    }

    #[test]
    fn degenerate_events_are_dropped() {
        let (mob, geo, _) = small_world();
        let config = SessionConfig::new(0.5, 1.0);
        let ladder = MechanismLadder::new(geo, &config);
        let e = Event::presence(Region::full(9), 2, 2).unwrap();
        let s = PrivacySession::new(config, &mob, &ladder, &[e]).unwrap();
        assert_eq!(s.dropped_events().len(), 1);
        assert!(s.trackers().is_empty());
    }

    #[test]
    fn logs_roundtrip_and_summaries_recompute() {
        let (mob, geo, events) = small_world();
        let config = SessionConfig::new(0.5, 2.0);
        let ladder = MechanismLadder::new(geo, &config);
        let dir = tempfile::tempdir().unwrap();
        let mut runs = Vec::new();
        for k in 0..3 {
            let mut rng = run_rng(11, k);
            let run = run_session(
                &config,
                Algorithm::GeoInd,
                &[4, 4, 1, 0, 3, 6],
                &mob,
                &ladder,
                &events,
                &mut rng,
            )
            .unwrap();
            let path = dir.path().join(format!("run_{k}.csv"));
            write_run_log(&path, &run.records).unwrap();
            let mut back = read_run_log(&path).unwrap();
            for (b, r) in back.iter_mut().zip(&run.records) {
                b.decision_path = r.decision_path.clone();
            }
            assert_eq!(back, run.records);
            runs.push(back);
        }
        let summary = summarize(&runs);
        let path = dir.path().join("summary.csv");
        write_summary(&path, &summary).unwrap();
        assert_eq!(read_summary(&path).unwrap(), summary);
    }
}
