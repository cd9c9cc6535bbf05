//! Tabular results for the command-line tool, plus CSV and JSON writers.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::calibration;
use crate::coil::CoilSpec;
use crate::config::ScenarioFile;
use crate::error::{Error, Result};
use crate::network::{
    max_range_single, single_sensor_voltage, single_sensor_voltage_with_mutual, solve_exact, uplink_ratio_single,
    NodePlacement,
};
use crate::optimizer::{self, minimal_power, search, SearchOutcome};

/// Relative tolerance of the power bisection.
const POWER_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    /// Written as an empty CSV field and as JSON `null`.
    Missing,
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    /// SI unit, empty for dimensionless values.
    pub unit: &'static str,
}

const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

/// A table of rows in a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub command: &'static str,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("cannot write CSV: {e}"));
        w.write_record(self.columns.iter().map(|c| c.name)).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field)).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Config(format!("cannot write CSV: {e}")))
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.name.to_string(), serde_json::to_value(v).expect("cells serialize")))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({
            "metadata": metadata(self.command, &self.columns),
            "rows": rows,
        })
    }
}

fn metadata(command: &str, columns: &[Column]) -> Value {
    let units: Map<String, Value> = columns
        .iter()
        .map(|c| (c.name.to_string(), Value::String(c.unit.to_string())))
        .collect();
    json!({
        "tool": "miwg",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "units": units,
    })
}

fn q_coil(base: &CoilSpec, q: f64) -> Result<CoilSpec> {
    base.with_quality_factor(q)
}

/// Single reader–sensor link over distance for each Q: the exact solve next
/// to the closed forms and the range limit.
pub fn single_range(file: &ScenarioFile) -> Result<SweepResult> {
    let base = file.base_sensor_coil()?;
    let distances = file.sweep.grid("distance_m", [0.02, 0.2], 19)?;
    let th = file.thresholds;
    let points: Vec<(f64, f64)> = file
        .sweep
        .q_values
        .iter()
        .flat_map(|&q| distances.iter().map(move |&d| (q, d)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(q, d)| -> Result<Vec<Cell>> {
            let coil = q_coil(&base, q)?;
            let scenario = file.scenario_with(vec![NodePlacement::new(coil, d, 0.0)?]);
            let sol = solve_exact(&scenario)?;
            let reader = &scenario.reader;
            let medium = &scenario.medium;
            let limit = max_range_single(reader, &coil, th.v_threshold, th.alpha_threshold, medium)?;
            let v = sol.load_voltages[0];
            let alpha = sol.uplink_ratios[0];
            Ok(vec![
                Cell::Num(q),
                Cell::Num(d),
                Cell::Num(v),
                Cell::Num(alpha),
                Cell::Bool(v >= th.v_threshold),
                Cell::Bool(alpha >= th.alpha_threshold),
                Cell::Text(limit.binding.as_str().to_string()),
                Cell::Num(single_sensor_voltage(reader, &coil, d, medium)?),
                Cell::Num(single_sensor_voltage_with_mutual(reader, &coil, sol.reader_couplings_h[0], medium)),
                Cell::Num(uplink_ratio_single(reader, &coil, d)?),
                Cell::Num(limit.distance_m),
                Cell::Num(limit.downlink_m),
                Cell::Num(limit.uplink_m),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        command: "single-range",
        columns: vec![
            col("q_factor", ""),
            col("distance_m", "m"),
            col("v_load_v", "V"),
            col("alpha", ""),
            col("powered", ""),
            col("detectable", ""),
            col("limit", ""),
            col("v_closed_form_v", "V"),
            col("v_coupled_form_v", "V"),
            col("alpha_closed_form", ""),
            col("d_max_m", "m"),
            col("d_max_downlink_m", "m"),
            col("d_max_uplink_m", "m"),
        ],
        rows,
    })
}

/// Deepest-sensor voltage of a uniform array as the interval scale factor
/// c (interval = c·a·Q^{1/3}) varies, for each Q.
pub fn interval_sweep(file: &ScenarioFile) -> Result<SweepResult> {
    let base = file.base_sensor_coil()?;
    let scales = file.sweep.grid("scale_factor", [0.5, 4.0], 36)?;
    let count = file.sweep.sensor_count;
    let th = file.thresholds;
    let points: Vec<(f64, f64)> = file
        .sweep
        .q_values
        .iter()
        .flat_map(|&q| scales.iter().map(move |&c| (q, c)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(q, c)| -> Result<Vec<Cell>> {
            let coil = q_coil(&base, q)?;
            let interval = c * coil.radius_m() * q.cbrt();
            let scenario = file.scenario_with(NodePlacement::uniform(coil, count, interval)?);
            let sol = solve_exact(&scenario)?;
            let deepest = *sol.load_voltages.last().expect("at least one sensor");
            Ok(vec![
                Cell::Num(q),
                Cell::Num(c),
                Cell::Num(interval),
                Cell::Num(interval * count as f64),
                Cell::Num(deepest),
                Cell::Num(sol.min_load_voltage()),
                Cell::Bool(deepest >= th.v_threshold),
                Cell::Bool(sol.all_powered()),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        command: "interval-sweep",
        columns: vec![
            col("q_factor", ""),
            col("scale_factor", ""),
            col("interval_m", "m"),
            col("deepest_depth_m", "m"),
            col("v_deepest_v", "V"),
            col("v_min_v", "V"),
            col("deepest_powered", ""),
            col("all_powered", ""),
        ],
        rows,
    })
}

/// Sensors needed to span `target` at `interval`, the last one at or just
/// beyond the target.
pub fn sensors_to_reach(target_m: f64, interval_m: f64) -> usize {
    ((target_m / interval_m) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Minimal transmit power per Q for a uniform array reaching the target
/// depth at interval = factor·a·Q^{1/3}.
pub fn power_requirement(file: &ScenarioFile) -> Result<SweepResult> {
    let base = file.base_sensor_coil()?;
    let sw = &file.sweep;
    let rows = sw
        .q_values
        .par_iter()
        .map(|&q| -> Result<Vec<Cell>> {
            let coil = q_coil(&base, q)?;
            let interval = sw.interval_factor * coil.radius_m() * q.cbrt();
            let count = sensors_to_reach(sw.target_depth_m, interval);
            let scenario = file.scenario_with(NodePlacement::uniform(coil, count, interval)?);
            let [p_lo, p_hi] = sw.power_range_w;
            let req = minimal_power(&scenario, p_lo, sw.power_step_w, p_hi, sw.power_criterion, POWER_REL_TOL)?;
            Ok(vec![
                Cell::Num(q),
                Cell::Num(interval),
                Cell::Int(count as u64),
                Cell::Num(interval * count as f64),
                req.power_w.map_or(Cell::Missing, Cell::Num),
                Cell::Bool(req.reachable()),
                Cell::Num(req.unbounded_power_w),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        command: "power-requirement",
        columns: vec![
            col("q_factor", ""),
            col("interval_m", "m"),
            col("sensor_count", ""),
            col("deepest_depth_m", "m"),
            col("p_min_w", "W"),
            col("reachable", ""),
            col("p_unbounded_w", "W"),
        ],
        rows,
    })
}

/// Uplink ratio of each sensor of the file's array next to the ratio the
/// same coil would have alone at that depth.
pub fn uplink_compare(file: &ScenarioFile) -> Result<SweepResult> {
    let scenario = file.scenario()?;
    if scenario.sensors.is_empty() {
        return Err(Error::Config("uplink-compare needs a `sensors` section".to_string()));
    }
    let sol = solve_exact(&scenario)?;
    let th = scenario.thresholds;
    let rows = scenario
        .sensors
        .iter()
        .enumerate()
        .map(|(k, s)| -> Result<Vec<Cell>> {
            let single = uplink_ratio_single(&scenario.reader, s.coil(), s.depth_m())?;
            let array = sol.uplink_ratios[k];
            Ok(vec![
                Cell::Int(k as u64 + 1),
                Cell::Num(s.depth_m()),
                Cell::Num(sol.load_voltages[k]),
                Cell::Num(single),
                Cell::Num(array),
                Cell::Num(th.alpha_threshold),
                Cell::Bool(single >= th.alpha_threshold),
                Cell::Bool(array >= th.alpha_threshold),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        command: "uplink-compare",
        columns: vec![
            col("location", ""),
            col("depth_m", "m"),
            col("v_load_v", "V"),
            col("alpha_single", ""),
            col("alpha_array", ""),
            col("alpha_threshold", ""),
            col("single_detectable", ""),
            col("array_detectable", ""),
        ],
        rows,
    })
}

pub fn design(file: &ScenarioFile) -> Result<SearchOutcome> {
    let spec = file
        .search
        .as_ref()
        .ok_or_else(|| Error::Config("design needs a `search` section".to_string()))?;
    search(spec, &file.scenario_with(Vec::new()))
}

/// Per-sensor view of a search outcome.
pub fn design_table(outcome: &SearchOutcome) -> SweepResult {
    let p = outcome.reported;
    let rows = (0..outcome.sensor_depths_m.len())
        .map(|k| {
            vec![
                Cell::Int(k as u64 + 1),
                Cell::Num(outcome.sensor_depths_m[k]),
                Cell::Num(outcome.per_sensor_voltages[k]),
                Cell::Num(outcome.uplink_ratios[k]),
                Cell::Bool(outcome.overvoltage_flags[k]),
                Cell::Bool(outcome.feasible),
                Cell::Num(p.quality_factor),
                Cell::Num(p.transmit_power_w),
                Cell::Num(p.radius_m),
            ]
        })
        .collect();
    SweepResult {
        command: "design",
        columns: design_columns(),
        rows,
    }
}

fn design_columns() -> Vec<Column> {
    vec![
        col("sensor", ""),
        col("depth_m", "m"),
        col("v_load_v", "V"),
        col("alpha", ""),
        col("overvoltage", ""),
        col("feasible", ""),
        col("q_factor", ""),
        col("transmit_power_w", "W"),
        col("radius_m", "m"),
    ]
}

pub fn design_json(outcome: &SearchOutcome) -> Value {
    json!({
        "metadata": metadata("design", &design_columns()),
        "outcome": outcome,
    })
}

/// The calibrated defaults, one per row.
pub fn defaults() -> SweepResult {
    let reader = calibration::default_reader();
    let sensor = calibration::default_sensor_coil();
    let medium = crate::coil::MediumConstants::default();
    let step = optimizer::default_step();
    let max = optimizer::default_max();
    let init = optimizer::default_initial();
    let entries: Vec<(&str, f64, &str)> = vec![
        ("permeability", medium.permeability(), "H/m"),
        ("carrier_frequency_hz", medium.carrier_frequency_hz(), "Hz"),
        ("reader_radius_m", reader.coil().radius_m(), "m"),
        ("reader_turns", f64::from(reader.coil().turns()), ""),
        ("reader_quality_factor", reader.coil().quality_factor(), ""),
        ("transmit_power_w", reader.transmit_power_w(), "W"),
        ("sensor_radius_m", sensor.radius_m(), "m"),
        ("sensor_turns", f64::from(sensor.turns()), ""),
        ("sensor_quality_factor", sensor.quality_factor(), ""),
        ("v_threshold_v", calibration::default_v_threshold(), "V"),
        ("alpha_threshold", calibration::default_alpha_threshold(), ""),
        ("v_max_v", calibration::DEFAULT_V_MAX, "V"),
        ("coupling_auto_threshold", crate::mutual::DEFAULT_CONWAY_THRESHOLD, ""),
        ("search_initial_quality_factor", init.quality_factor, ""),
        ("search_step_quality_factor", step.quality_factor, ""),
        ("search_max_quality_factor", max.quality_factor, ""),
        ("search_initial_power_w", init.transmit_power_w, "W"),
        ("search_step_power_w", step.transmit_power_w, "W"),
        ("search_max_power_w", max.transmit_power_w, "W"),
        ("search_initial_radius_m", init.radius_m, "m"),
        ("search_step_radius_m", step.radius_m, "m"),
        ("search_max_radius_m", max.radius_m, "m"),
    ];
    SweepResult {
        command: "defaults",
        columns: vec![col("name", ""), col("value", ""), col("unit", "")],
        rows: entries
            .into_iter()
            .map(|(n, v, u)| vec![Cell::Text(n.to_string()), Cell::Num(v), Cell::Text(u.to_string())])
            .collect(),
    }
}
