//! The driver behind each run mode. Every command writes CSV files under the
//! configured output directory and returns what the caller needs for the exit
//! status.

use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{length_sweep, series, width_sweep, write_bench_csv, BenchConfig, BenchPoint, Method, Sweep};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::event::{load_events, Event, GridMap};
use crate::experiment::{run_experiment, ExperimentResult, ReleaseExperiment, World};
use crate::markov::{
    forward_likelihood, joint_parts, load_emission_matrix, prior_probability, EmissionColumn, InitialDistribution,
    Mobility, TransitionMatrix, LEAKAGE_RATIO_CAP,
};
use crate::oracle::{naive_joint_parts, naive_prior, RandomInstance, ENUMERATION_CAP};
use crate::runtime::{write_released, write_run_log, write_summary, Algorithm, MechanismLadder, SessionConfig};
use crate::simkit::{generate_transition, ingest_csv};
use crate::stats::linear_fit;

/// Result of one command: a printable report and the number of failed
/// verifications (nonzero means a nonzero exit status).
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub report: String,
    pub failures: usize,
}

/// Caps the worker pool at `PRISTE_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PRISTE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("PRISTE_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config("PRISTE_THREADS must be at least 1".into()));
        }
        // A pool may already exist when called twice in one process.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("worker pool already initialized; PRISTE_THREADS ignored");
        }
    }
    Ok(())
}

pub fn run(config: &RunConfig) -> Result<CommandOutcome> {
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    match config.mode {
        Mode::Quantify => cmd_quantify(config),
        Mode::ReleaseGeoind | Mode::ReleaseDeltaloc => cmd_release(config),
        Mode::OracleCompare => cmd_oracle_compare(config),
        Mode::Bench => cmd_bench(config),
    }
}

pub fn load_map(config: &RunConfig) -> Result<GridMap> {
    GridMap::new(config.width, config.height, config.cell_size)
}

pub fn load_world(config: &RunConfig) -> Result<World> {
    let map = load_map(config)?;
    let mobility: Mobility = match &config.transition {
        Some(path) => TransitionMatrix::load_csv(path)?.into(),
        None => generate_transition(&map, config.sigma)?.into(),
    };
    if mobility.m() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            found: mobility.m(),
        });
    }
    let pi = load_prior(config, map.m())?;
    Ok(World::new(map, mobility, pi))
}

fn load_prior(config: &RunConfig, m: usize) -> Result<InitialDistribution> {
    let Some(path) = &config.prior else {
        return Ok(InitialDistribution::uniform(m));
    };
    let text = fs::read_to_string(path)?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: {s:?}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: values.len(),
        });
    }
    InitialDistribution::new(values)
}

fn load_config_events(config: &RunConfig, m: usize) -> Result<Vec<Event>> {
    let path = config
        .events
        .as_ref()
        .ok_or_else(|| Error::Config("no events file".into()))?;
    let events = load_events(path, m)?;
    if events.is_empty() {
        return Err(Error::Config(format!("{}: no events", path.display())));
    }
    Ok(events)
}

/// One row of the leakage report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageRow {
    pub event: usize,
    pub t: u32,
    pub observed_cell: usize,
    pub prior: f64,
    pub posterior: f64,
    pub leakage_ratio: f64,
}

/// Prior, posterior and likelihood ratio of every event after each released
/// observation, under the configured prior.
pub fn quantify(
    pi: &InitialDistribution,
    mobility: &Mobility,
    events: &[Event],
    emission: ndarray::ArrayView2<f64>,
    observed: &[usize],
) -> Result<(Vec<LeakageRow>, usize)> {
    let columns = observed
        .iter()
        .map(|&o| EmissionColumn::from_matrix(emission, o))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut degenerate = 0;
    for (idx, event) in events.iter().enumerate() {
        let prior = prior_probability(pi, event, mobility)?;
        if prior <= 1e-12 || prior >= 1.0 - 1e-12 {
            warn!("event {idx} ({}) has prior {prior}; skipped", event.to_expression());
            degenerate += 1;
            continue;
        }
        for t in 1..=columns.len() {
            let parts = joint_parts(pi, event, mobility, &columns[..t])?;
            let total = parts.event + parts.not_event;
            if !(total > 0.0) {
                return Err(Error::Inconsistent(format!(
                    "observations up to t = {t} have zero likelihood"
                )));
            }
            let (num, den) = (parts.event * (1.0 - prior), parts.not_event * prior);
            let ratio = if num > 0.0 && den > 0.0 {
                (num / den).max(den / num).min(LEAKAGE_RATIO_CAP)
            } else {
                LEAKAGE_RATIO_CAP
            };
            rows.push(LeakageRow {
                event: idx,
                t: t as u32,
                observed_cell: observed[t - 1],
                prior,
                posterior: parts.event / total,
                leakage_ratio: ratio,
            });
        }
    }
    Ok((rows, degenerate))
}

pub fn cmd_quantify(config: &RunConfig) -> Result<CommandOutcome> {
    let world = load_world(config)?;
    let m = world.map.m();
    let events = load_config_events(config, m)?;
    let emission = load_emission_matrix(config.emissions.as_ref().expect("validated"))?;
    if emission.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: emission.nrows(),
        });
    }
    let observed = ingest_csv(config.observations.as_ref().expect("validated"), &world.map, None)?.cells;
    let (rows, degenerate) = quantify(&world.pi, &world.mobility, &events, emission.view(), &observed)?;
    let path = config.out.join("leakage.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let worst = rows.iter().map(|r| r.leakage_ratio).fold(1.0f64, f64::max);
    Ok(CommandOutcome {
        report: format!(
            "{} rows written to {}; largest ratio {worst:.6}; {degenerate} degenerate events skipped",
            rows.len(),
            path.display()
        ),
        failures: 0,
    })
}

/// Writes run logs, released traces and the summary for an experiment.
pub fn write_experiment(out: &Path, result: &ExperimentResult) -> Result<()> {
    let internal = out.join("internal");
    let released = out.join("released");
    fs::create_dir_all(&internal)?;
    fs::create_dir_all(&released)?;
    for (k, run) in result.runs.iter().enumerate() {
        write_run_log(internal.join(format!("run_{k:03}.csv")), &run.records)?;
        write_released(released.join(format!("run_{k:03}.csv")), &run.records)?;
    }
    write_summary(out.join("summary.csv"), &result.summary())?;
    let replay = serde_json::json!({
        "checks": result.replay_checks,
        "failures": result.replay_failures.iter().map(|(run, f)| serde_json::json!({
            "run": run, "event": f.event, "t": f.t, "decision": f.decision,
        })).collect::<Vec<_>>(),
    });
    fs::write(out.join("replay.json"), serde_json::to_string_pretty(&replay)?)?;
    Ok(())
}

pub fn cmd_release(config: &RunConfig) -> Result<CommandOutcome> {
    let world = load_world(config)?;
    let events = load_config_events(config, world.map.m())?;
    let mut session = SessionConfig::new(config.epsilon, config.alpha);
    session.decay = config.decay;
    session.checker.time_budget = config.time_budget();
    session.checker.seed = config.seed;
    let algorithm = match config.mode {
        Mode::ReleaseDeltaloc => Algorithm::DeltaLoc { delta: config.delta },
        _ => Algorithm::GeoInd,
    };
    let trajectory = match &config.trajectory {
        Some(path) => Some(ingest_csv(path, &world.map, config.bounding_box()?.as_ref())?.cells),
        None => None,
    };
    let ladder = MechanismLadder::new(world.geometry.clone(), &session);
    let experiment = ReleaseExperiment {
        session,
        algorithm,
        events,
        runs: config.runs,
        horizon: config.horizon,
        seed: config.seed,
        replay: true,
        trajectory,
    };
    info!("running {} sessions", experiment.runs);
    let result = run_experiment(&world, &ladder, &experiment)?;
    write_experiment(&config.out, &result)?;
    let summary = result.summary();
    let mean_alpha = crate::stats::mean(&summary.iter().map(|r| r.mean_alpha).collect::<Vec<_>>());
    let mean_dist = crate::stats::mean(&summary.iter().map(|r| r.mean_dist).collect::<Vec<_>>());
    for (run, f) in &result.replay_failures {
        warn!(
            "replay failure: run {run} event {} t {} ({:?})",
            f.event, f.t, f.decision
        );
    }
    Ok(CommandOutcome {
        report: format!(
            "{} runs, mean budget {mean_alpha:.4}, mean distance {mean_dist:.4} km, {} replay checks, {} failures; output in {}",
            result.runs.len(),
            result.replay_checks,
            result.replay_failures.len(),
            config.out.display()
        ),
        failures: result.replay_failures.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub instance: usize,
    pub m: usize,
    pub horizon: usize,
    pub prior_two_world: f64,
    pub prior_naive: f64,
    pub joint_two_world: f64,
    pub joint_naive: f64,
    pub total_two_world: f64,
    pub total_forward: f64,
}

impl OracleRow {
    pub fn max_abs_diff(&self) -> f64 {
        (self.prior_two_world - self.prior_naive)
            .abs()
            .max((self.joint_two_world - self.joint_naive).abs())
    }

    pub fn total_rel_diff(&self) -> f64 {
        (self.total_two_world - self.total_forward).abs() / self.total_forward.abs().max(f64::MIN_POSITIVE)
    }
}

/// Compares the two-world computations with enumeration on random models.
pub fn oracle_compare(instances: usize, seed: u64) -> Result<Vec<OracleRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|k| {
            let inst = RandomInstance::draw(&mut rng, 4, 6)?;
            let parts = joint_parts(&inst.pi, &inst.event, &inst.mobility, &inst.emissions)?;
            let (yes, _) = naive_joint_parts(&inst.pi, &inst.mobility, &inst.event, &inst.emissions, ENUMERATION_CAP)?;
            Ok(OracleRow {
                instance: k,
                m: inst.pi.m(),
                horizon: inst.emissions.len().max(inst.event.end() as usize),
                prior_two_world: prior_probability(&inst.pi, &inst.event, &inst.mobility)?,
                prior_naive: naive_prior(&inst.pi, &inst.mobility, &inst.event)?,
                joint_two_world: parts.event_probability(),
                joint_naive: yes,
                total_two_world: parts.total(),
                total_forward: forward_likelihood(&inst.pi, &inst.mobility, &inst.emissions)?,
            })
        })
        .collect()
}

pub fn cmd_oracle_compare(config: &RunConfig) -> Result<CommandOutcome> {
    let rows = oracle_compare(config.instances, config.seed)?;
    let path = config.out.join("oracle.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let failures = rows
        .iter()
        .filter(|r| r.max_abs_diff() > 1e-9 || r.total_rel_diff() > 1e-9)
        .count();
    let worst = rows.iter().map(OracleRow::max_abs_diff).fold(0.0f64, f64::max);
    Ok(CommandOutcome {
        report: format!(
            "{} instances, largest absolute gap {worst:.3e}, {failures} mismatches; rows in {}",
            rows.len(),
            path.display()
        ),
        failures,
    })
}

/// Slope and R² of log runtime against size, and of log runtime against log
/// size, for one method.
pub fn fit_points(points: &[BenchPoint], sweep: Sweep, method: Method, log_x: bool) -> (f64, f64) {
    let s = series(points, sweep, method);
    let x: Vec<f64> = s.iter().map(|p| if log_x { p.0.ln() } else { p.0 }).collect();
    let y: Vec<f64> = s.iter().map(|p| p.1.ln()).collect();
    let (slope, _, r2) = linear_fit(&x, &y);
    (slope, r2)
}

pub fn cmd_bench(config: &RunConfig) -> Result<CommandOutcome> {
    let bench = BenchConfig {
        events_per_point: config.bench_events,
        ceiling: std::time::Duration::from_secs_f64(config.bench_ceiling),
        seed: config.seed,
        ..Default::default()
    };
    let mut points = length_sweep(&bench)?;
    points.extend(width_sweep(&bench)?);
    let path = config.out.join("bench.csv");
    write_bench_csv(&path, &points)?;
    let (oracle_slope, oracle_r2) = fit_points(&points, Sweep::Length, Method::Oracle, false);
    let two = series(&points, Sweep::Length, Method::TwoWorld);
    let ratio = two.last().map_or(f64::NAN, |l| l.1) / two.first().map_or(f64::NAN, |f| f.1);
    let (check_slope, _) = fit_points(&points, Sweep::Width, Method::Checker, true);
    let disagreements = points.iter().filter(|p| p.max_rel_diff > 1e-9).count();
    Ok(CommandOutcome {
        report: format!(
            "length sweep: oracle log-runtime slope {oracle_slope:.3} (R^2 {oracle_r2:.3}), two-world runtime ratio {ratio:.2}; \
             width sweep: checker log-log slope {check_slope:.2}; results in {}",
            path.display()
        ),
        failures: disagreements,
    })
}
