//! Scenario files: strict JSON with SI units throughout.
//!
//! ```json
//! {
//!   "medium":   { "permeability": 1.2566e-6, "carrier_frequency_hz": 13.56e6 },
//!   "reader":   { "coil": { "radius_m": 0.04, "turns": 5, "quality_factor": 8 },
//!                 "transmit_power_w": 0.01 },
//!   "sensors":  { "generator": { "coil": { … }, "count": 8, "interval_m": 0.15 } },
//!   "thresholds": { "v_threshold": 4.83, "alpha_threshold": 1.3e-5, "v_max": 20 },
//!   "coupling": { "model": "auto", "threshold": 10 },
//!   "coupling_range": "all",
//!   "sweep":    { "q_values": [8, 16, 24, 32], "range": [0.02, 0.2], "steps": 19 },
//!   "search":   { "total_depth_m": 1.2, "interval_m": 0.15 },
//!   "output":   { "format": "csv", "path": "out.csv" }
//! }
//! ```
//!
//! Every section is optional; omitted values take the calibrated defaults.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::coil::{CoilSpec, MediumConstants};
use crate::error::{ensure, Error, Result};
use crate::mutual::CouplingModel;
use crate::network::{ArrayScenario, CouplingRange, NodePlacement, ReaderConfig, Thresholds};
use crate::optimizer::{PowerCriterion, SearchSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub medium: MediumConstants,
    #[serde(default = "calibration::default_reader")]
    pub reader: ReaderConfig,
    #[serde(default)]
    pub sensors: Option<SensorsSection>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub coupling: CouplingModel,
    #[serde(default)]
    pub coupling_range: CouplingRange,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub search: Option<SearchSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Sensor layout: an explicit list or a uniform generator, not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorsSection {
    #[serde(default)]
    pub list: Option<Vec<NodePlacement>>,
    #[serde(default)]
    pub generator: Option<SensorGenerator>,
}

/// `count` identical coaxial sensors at `interval_m, 2·interval_m, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorGenerator {
    pub coil: CoilSpec,
    pub count: usize,
    pub interval_m: f64,
}

impl SensorsSection {
    pub fn placements(&self) -> Result<Vec<NodePlacement>> {
        match (&self.list, &self.generator) {
            (Some(_), Some(_)) => Err(Error::Config(
                "`sensors.list` and `sensors.generator` are mutually exclusive".to_string(),
            )),
            (None, None) => Err(Error::Config(
                "`sensors` needs either `list` or `generator`".to_string(),
            )),
            (Some(list), None) => Ok(list.clone()),
            (None, Some(g)) => {
                ensure(g.count >= 1, || "sensor generator count must be at least 1".to_string())?;
                NodePlacement::uniform(g.coil, g.count, g.interval_m)
            }
        }
    }
}

/// Independent-variable grid and per-command options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Optional name of the swept variable, checked against the command.
    #[serde(default)]
    pub variable: Option<String>,
    #[serde(default = "default_q_values")]
    pub q_values: Vec<f64>,
    /// Inclusive `[start, stop]` of the swept variable.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub steps: Option<usize>,
    /// Sensors in the interval sweep.
    #[serde(default = "default_sensor_count")]
    pub sensor_count: usize,
    /// Depth the power requirement must reach, m.
    #[serde(default = "default_target_depth")]
    pub target_depth_m: f64,
    /// Interval as a multiple of a·Q^{1/3} in the power requirement.
    #[serde(default = "default_interval_factor")]
    pub interval_factor: f64,
    #[serde(default = "default_power_range")]
    pub power_range_w: [f64; 2],
    #[serde(default = "default_power_step")]
    pub power_step_w: f64,
    #[serde(default = "default_criterion")]
    pub power_criterion: PowerCriterion,
}

fn default_q_values() -> Vec<f64> {
    vec![8.0, 16.0, 24.0, 32.0]
}

fn default_sensor_count() -> usize {
    10
}

fn default_target_depth() -> f64 {
    0.8
}

fn default_interval_factor() -> f64 {
    0.8
}

fn default_power_range() -> [f64; 2] {
    [0.01, 1.0]
}

fn default_power_step() -> f64 {
    0.05
}

fn default_criterion() -> PowerCriterion {
    PowerCriterion::Deepest
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            variable: None,
            q_values: default_q_values(),
            range: None,
            steps: None,
            sensor_count: default_sensor_count(),
            target_depth_m: default_target_depth(),
            interval_factor: default_interval_factor(),
            power_range_w: default_power_range(),
            power_step_w: default_power_step(),
            power_criterion: default_criterion(),
        }
    }
}

impl SweepSection {
    /// Evenly spaced values over `range` (or `fallback`) with `steps` points.
    pub fn grid(&self, variable: &str, fallback: [f64; 2], fallback_steps: usize) -> Result<Vec<f64>> {
        if let Some(v) = &self.variable {
            if v != variable {
                return Err(Error::Config(format!(
                    "`sweep.variable` is `{v}` but this command sweeps `{variable}`"
                )));
            }
        }
        let [start, stop] = self.range.unwrap_or(fallback);
        let steps = self.steps.unwrap_or(fallback_steps);
        if !(start.is_finite() && stop.is_finite()) || stop <= start {
            return Err(Error::Config(format!(
                "`sweep.range` must satisfy start < stop, got [{start}, {stop}]"
            )));
        }
        if steps < 2 {
            return Err(Error::Config(format!("`sweep.steps` must be at least 2, got {steps}")));
        }
        Ok((0..steps)
            .map(|k| {
                if k + 1 == steps {
                    stop
                } else {
                    let m = (steps - 1) as f64;
                    (start * (m - k as f64) + stop * k as f64) / m
                }
            })
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.q_values.is_empty(), || "`sweep.q_values` is empty".to_string())?;
        for &q in &self.q_values {
            ensure(q.is_finite() && q > 0.0, || format!("quality factor must be positive, got {q}"))?;
        }
        ensure(self.sensor_count >= 1, || "`sweep.sensor_count` must be at least 1".to_string())?;
        ensure(self.target_depth_m > 0.0, || "`sweep.target_depth_m` must be positive".to_string())?;
        ensure(self.interval_factor > 0.0, || "`sweep.interval_factor` must be positive".to_string())?;
        let [lo, hi] = self.power_range_w;
        ensure(lo > 0.0 && hi >= lo && self.power_step_w > 0.0, || {
            format!("invalid power range [{lo}, {hi}] with step {}", self.power_step_w)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: Option<OutputFormat>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let location = format!("line {} column {}", inner.line(), inner.column());
            if path == "." || path.is_empty() {
                Error::Config(format!("{inner} ({location})"))
            } else {
                Error::Config(format!("at `{path}`: {inner}"))
            }
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let tag = |e: Error| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        };
        self.thresholds.validate().map_err(tag)?;
        self.coupling.validate().map_err(tag)?;
        self.sweep.validate().map_err(tag)?;
        if let Some(s) = &self.sensors {
            s.placements().map_err(tag)?;
        }
        if let Some(search) = &self.search {
            search.validate().map_err(tag)?;
        }
        self.scenario().and_then(|s| s.validate()).map_err(tag)
    }

    /// Scenario with the file's sensors (empty when none are given).
    pub fn scenario(&self) -> Result<ArrayScenario> {
        let sensors = match &self.sensors {
            Some(s) => s.placements()?,
            None => Vec::new(),
        };
        Ok(self.scenario_with(sensors))
    }

    /// The file's medium, reader, limits and coupling with other sensors.
    pub fn scenario_with(&self, sensors: Vec<NodePlacement>) -> ArrayScenario {
        ArrayScenario {
            medium: self.medium,
            reader: self.reader,
            sensors,
            thresholds: self.thresholds,
            coupling: self.coupling,
            range: self.coupling_range,
        }
    }

    /// Coil used when a command varies Q or spacing: the first listed
    /// sensor's coil, or the default sensor coil.
    pub fn base_sensor_coil(&self) -> Result<CoilSpec> {
        match &self.sensors {
            Some(s) => Ok(*s.placements()?[0].coil()),
            None => Ok(calibration::default_sensor_coil()),
        }
    }
}
