//! Repeated seeded release sessions on a synthetic or supplied world.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::event::{Event, GridMap};
use crate::lppm::MapGeometry;
use crate::markov::{InitialDistribution, Mobility};
use crate::runtime::{
    replay_verify, run_rng, run_session, summarize, Algorithm, MechanismLadder, ReleaseRecord, ReplayFailure,
    SessionConfig, SessionRun, SummaryRow,
};
use crate::simkit::{generate_transition, sample_trajectory, SyntheticConfig};

/// A map with its geometry cache, mobility model and the prior used to draw
/// trajectories.
#[derive(Debug, Clone)]
pub struct World {
    pub map: GridMap,
    pub geometry: Arc<MapGeometry>,
    pub mobility: Mobility,
    pub pi: InitialDistribution,
}

impl World {
    pub fn new(map: GridMap, mobility: Mobility, pi: InitialDistribution) -> Self {
        Self {
            geometry: Arc::new(MapGeometry::new(map)),
            map,
            mobility,
            pi,
        }
    }

    pub fn synthetic(config: &SyntheticConfig) -> Result<Self> {
        config.validate()?;
        let map = config.map()?;
        let mobility = generate_transition(&map, config.sigma)?.into();
        Ok(Self::new(map, mobility, InitialDistribution::uniform(map.m())))
    }
}

#[derive(Debug, Clone)]
pub struct ReleaseExperiment {
    pub session: SessionConfig,
    pub algorithm: Algorithm,
    pub events: Vec<Event>,
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub replay: bool,
    /// Replayed by every run instead of sampling a synthetic trajectory.
    pub trajectory: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<SessionRun>,
    pub replay_checks: usize,
    pub replay_failures: Vec<(usize, ReplayFailure)>,
}

impl ExperimentResult {
    pub fn records(&self) -> Vec<Vec<ReleaseRecord>> {
        self.runs.iter().map(|r| r.records.clone()).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.records())
    }

    /// Fraction of releases that committed on the first draw.
    pub fn first_attempt_rate(&self) -> f64 {
        let all: Vec<_> = self.runs.iter().flat_map(|r| &r.records).collect();
        all.iter().filter(|r| r.attempts == 1 && r.final_alpha > 0.0).count() as f64 / all.len() as f64
    }
}

/// Runs `experiment.runs` sessions in parallel. Run `k` draws its trajectory
/// and its mechanism randomness from stream `k` of `seed`, so experiments that
/// differ only in privacy settings see identical trajectories.
pub fn run_experiment(
    world: &World,
    ladder: &MechanismLadder,
    experiment: &ReleaseExperiment,
) -> Result<ExperimentResult> {
    let outcomes: Vec<Result<(SessionRun, usize, Vec<ReplayFailure>)>> = (0..experiment.runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = run_rng(experiment.seed, k as u64);
            let traj = match &experiment.trajectory {
                Some(t) => t.clone(),
                None => sample_trajectory(&world.mobility, &world.pi, experiment.horizon, &mut rng)?,
            };
            let run = run_session(
                &experiment.session,
                experiment.algorithm,
                &traj,
                &world.mobility,
                ladder,
                &experiment.events,
                &mut rng,
            )?;
            let (checks, failures) = if experiment.replay {
                replay_verify(
                    &experiment.events,
                    &world.mobility,
                    &run.columns,
                    &experiment.session.checker,
                )?
            } else {
                (0, Vec::new())
            };
            Ok((run, checks, failures))
        })
        .collect();
    let mut result = ExperimentResult {
        runs: Vec::with_capacity(experiment.runs),
        replay_checks: 0,
        replay_failures: Vec::new(),
    };
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let (run, checks, failures) = outcome?;
        result.runs.push(run);
        result.replay_checks += checks;
        result.replay_failures.extend(failures.into_iter().map(|f| (k, f)));
    }
    Ok(result)
}
