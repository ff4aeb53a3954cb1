//! Flat key-value run manifests for the command-line driver.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Quantify,
    ReleaseGeoind,
    ReleaseDeltaloc,
    OracleCompare,
    Bench,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "quantify" => Mode::Quantify,
            "release-geoind" => Mode::ReleaseGeoind,
            "release-deltaloc" => Mode::ReleaseDeltaloc,
            "oracle-compare" => Mode::OracleCompare,
            "bench" => Mode::Bench,
            other => return Err(Error::Config(format!("unknown mode {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub width: usize,
    pub height: usize,
    /// Cell side in km.
    pub cell_size: f64,
    /// Gaussian kernel scale in km for synthetic mobility.
    pub sigma: f64,
    /// Headerless CSV transition matrix; overrides `sigma`.
    pub transition: Option<PathBuf>,
    /// `t,cell` or `t,lat,lon` trajectory; synthetic trajectories otherwise.
    pub trajectory: Option<PathBuf>,
    pub lat_min: Option<f64>,
    pub lat_max: Option<f64>,
    pub lon_min: Option<f64>,
    pub lon_max: Option<f64>,
    pub horizon: usize,
    pub events: Option<PathBuf>,
    pub epsilon: f64,
    pub alpha: f64,
    pub delta: f64,
    pub decay: f64,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Checker time budget in seconds.
    pub time_budget: f64,
    /// Emission matrix for quantification.
    pub emissions: Option<PathBuf>,
    /// Released cells (`t,cell`) for quantification.
    pub observations: Option<PathBuf>,
    /// Headerless single-row CSV prior; uniform when absent.
    pub prior: Option<PathBuf>,
    /// Random instances for the oracle comparison.
    pub instances: usize,
    pub bench_events: usize,
    /// Wall-clock ceiling per benchmark sweep in seconds.
    pub bench_ceiling: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::ReleaseGeoind,
            width: 20,
            height: 20,
            cell_size: 0.4,
            sigma: 1.5,
            transition: None,
            trajectory: None,
            lat_min: None,
            lat_max: None,
            lon_min: None,
            lon_max: None,
            horizon: 50,
            events: None,
            epsilon: 0.5,
            alpha: 0.2,
            delta: 0.1,
            decay: 0.5,
            runs: 100,
            seed: 0,
            out: PathBuf::from("out"),
            time_budget: 1.0,
            emissions: None,
            observations: None,
            prior: None,
            instances: 500,
            bench_events: 100,
            bench_ceiling: 120.0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn time_budget(&self) -> Duration {
        Duration::from_secs_f64(self.time_budget)
    }

    /// The bounding box, if every edge is set.
    pub fn bounding_box(&self) -> Result<Option<BoundingBox>> {
        match (self.lat_min, self.lat_max, self.lon_min, self.lon_max) {
            (Some(lat_min), Some(lat_max), Some(lon_min), Some(lon_max)) => {
                let b = BoundingBox {
                    lat_min,
                    lat_max,
                    lon_min,
                    lon_max,
                };
                b.validate()?;
                Ok(Some(b))
            }
            (None, None, None, None) => Ok(None),
            _ => Err(Error::Config(
                "bounding box needs lat_min, lat_max, lon_min and lon_max".into(),
            )),
        }
    }

    /// Checks the fields the selected mode needs.
    pub fn validate(&self) -> Result<()> {
        let need = |field: &Option<PathBuf>, name: &str| -> Result<()> {
            if field.is_none() {
                return Err(Error::Config(format!("mode {:?} needs `{name}`", self.mode)));
            }
            Ok(())
        };
        if self.width == 0 || self.height == 0 || !(self.cell_size > 0.0) {
            return Err(Error::Config("map dimensions and cell size must be positive".into()));
        }
        self.bounding_box()?;
        match self.mode {
            Mode::Quantify => {
                need(&self.events, "events")?;
                need(&self.emissions, "emissions")?;
                need(&self.observations, "observations")?;
            }
            Mode::ReleaseGeoind | Mode::ReleaseDeltaloc => {
                need(&self.events, "events")?;
                if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
                    return Err(Error::Config(format!(
                        "epsilon must be finite and >= 0, got {}",
                        self.epsilon
                    )));
                }
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
                }
                if !(self.decay > 0.0 && self.decay < 1.0) {
                    return Err(Error::Config(format!("decay must lie in (0, 1), got {}", self.decay)));
                }
                if self.mode == Mode::ReleaseDeltaloc && !(0.0..1.0).contains(&self.delta) {
                    return Err(Error::Config(format!("delta must lie in [0, 1), got {}", self.delta)));
                }
                if self.runs == 0 {
                    return Err(Error::Config("runs must be at least 1".into()));
                }
                if self.trajectory.is_none() && (self.horizon == 0 || !(self.sigma > 0.0)) {
                    return Err(Error::Config(
                        "synthetic trajectories need horizon > 0 and sigma > 0".into(),
                    ));
                }
                if !(self.time_budget >= 0.0 && self.time_budget.is_finite()) {
                    return Err(Error::Config(format!(
                        "time budget must be >= 0, got {}",
                        self.time_budget
                    )));
                }
            }
            Mode::OracleCompare | Mode::Bench => {}
        }
        Ok(())
    }
}
