use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use priste::commands::{configure_threads, run};
use priste::config::{Mode, RunConfig};

/// Event-level privacy quantification and protected location release.
#[derive(Debug, Parser)]
#[command(name = "priste", version)]
struct Cli {
    /// quantify, release-geoind, release-deltaloc, oracle-compare or bench
    #[arg(long)]
    mode: Option<Mode>,
    /// TOML manifest; flags given here override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Initial planar Laplace budget (1/km)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checker time budget in seconds
    #[arg(long)]
    time_budget: Option<f64>,
    /// JSON event list
    #[arg(long)]
    events: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> priste::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.runs {
            c.runs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.out {
            c.out = v;
        }
        if let Some(v) = self.time_budget {
            c.time_budget = v;
        }
        if let Some(v) = self.events {
            c.events = Some(v);
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let outcome = Cli::parse().into_config().and_then(|c| {
        configure_threads()?;
        run(&c)
    });
    match outcome {
        Ok(o) => {
            println!("{}", o.report);
            if o.failures > 0 {
                error!("{} verification failures", o.failures);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}
