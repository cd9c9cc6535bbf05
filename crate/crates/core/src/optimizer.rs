//! Grid search for a sensor coil, quality factor and transmit power that
//! power every sensor of a uniformly spaced deployment.
//!
//! The three parameters are stepped in nested loops, quality factor
//! innermost and coil radius outermost by default: each inner parameter
//! runs through its whole grid before the next outer one advances. The first
//! configuration whose exact solution powers every sensor is returned.

use serde::{Deserialize, Serialize};

use crate::coil::CoilSpec;
use crate::error::{ensure, Result};
use crate::network::{coupling_matrix, solve_exact, solve_with_couplings, ArrayScenario, LinkSolution, NodePlacement};

/// Relative slack when checking that the depth is a whole number of intervals.
const DEPTH_TOL: f64 = 1e-9;

/// A searched parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchParam {
    QualityFactor,
    TransmitPower,
    Radius,
}

/// Quality factor, transmit power and sensor coil radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub quality_factor: f64,
    pub transmit_power_w: f64,
    pub radius_m: f64,
}

impl DesignPoint {
    fn get(&self, p: SearchParam) -> f64 {
        match p {
            SearchParam::QualityFactor => self.quality_factor,
            SearchParam::TransmitPower => self.transmit_power_w,
            SearchParam::Radius => self.radius_m,
        }
    }

    fn set(&mut self, p: SearchParam, v: f64) {
        match p {
            SearchParam::QualityFactor => self.quality_factor = v,
            SearchParam::TransmitPower => self.transmit_power_w = v,
            SearchParam::Radius => self.radius_m = v,
        }
    }
}

/// Deployment target and search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub total_depth_m: f64,
    pub interval_m: f64,
    #[serde(default = "default_step")]
    pub step: DesignPoint,
    #[serde(default = "default_max")]
    pub max: DesignPoint,
    #[serde(default = "default_initial")]
    pub initial: DesignPoint,
    /// Loop nesting, innermost first.
    #[serde(default = "default_order")]
    pub loop_order: [SearchParam; 3],
    /// Also require every uplink ratio to reach the threshold.
    #[serde(default)]
    pub uplink_gate: bool,
    #[serde(default = "default_turns")]
    pub sensor_turns: u32,
}

pub fn default_step() -> DesignPoint {
    DesignPoint {
        quality_factor: 4.0,
        transmit_power_w: 0.05,
        radius_m: 0.005,
    }
}

pub fn default_max() -> DesignPoint {
    DesignPoint {
        quality_factor: 32.0,
        transmit_power_w: 1.0,
        radius_m: 0.05,
    }
}

pub fn default_initial() -> DesignPoint {
    DesignPoint {
        quality_factor: crate::calibration::SENSOR_Q,
        transmit_power_w: crate::calibration::TRANSMIT_POWER_W,
        radius_m: crate::calibration::SENSOR_RADIUS_M,
    }
}

fn default_order() -> [SearchParam; 3] {
    [SearchParam::QualityFactor, SearchParam::TransmitPower, SearchParam::Radius]
}

fn default_turns() -> u32 {
    crate::calibration::SENSOR_TURNS
}

impl SearchSpec {
    /// Default grid for a target depth and interval.
    pub fn new(total_depth_m: f64, interval_m: f64) -> Result<Self> {
        let spec = Self {
            total_depth_m,
            interval_m,
            step: default_step(),
            max: default_max(),
            initial: default_initial(),
            loop_order: default_order(),
            uplink_gate: false,
            sensor_turns: default_turns(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.interval_m.is_finite() && self.interval_m > 0.0, || {
            format!("interval must be positive, got {}", self.interval_m)
        })?;
        ensure(self.total_depth_m.is_finite() && self.total_depth_m > 0.0, || {
            format!("total depth must be positive, got {}", self.total_depth_m)
        })?;
        let k = (self.total_depth_m / self.interval_m).round();
        ensure(
            k >= 1.0 && (k * self.interval_m - self.total_depth_m).abs() <= DEPTH_TOL * self.total_depth_m,
            || {
                format!(
                    "total depth {} m is not a whole number of {} m intervals",
                    self.total_depth_m, self.interval_m
                )
            },
        )?;
        for p in [SearchParam::QualityFactor, SearchParam::TransmitPower, SearchParam::Radius] {
            let (init, step, max) = (self.initial.get(p), self.step.get(p), self.max.get(p));
            ensure(step.is_finite() && step > 0.0, || format!("{p:?} step must be positive, got {step}"))?;
            ensure(init.is_finite() && init > 0.0, || format!("{p:?} initial value must be positive, got {init}"))?;
            ensure(max.is_finite() && max >= init, || {
                format!("{p:?} maximum {max} is below the initial value {init}")
            })?;
        }
        let mut seen = self.loop_order.to_vec();
        seen.sort_by_key(|p| *p as u8);
        seen.dedup();
        ensure(seen.len() == 3, || "loop order must name each parameter once".to_string())?;
        ensure(self.sensor_turns >= 1, || "sensor coils need at least one turn".to_string())
    }

    pub fn sensor_count(&self) -> usize {
        (self.total_depth_m / self.interval_m).round() as usize
    }

    /// Grid values of one parameter: initial, initial + step, …, with the
    /// last step clamped to the maximum so the maximum is always tried.
    pub fn grid(&self, p: SearchParam) -> Vec<f64> {
        value_grid(self.initial.get(p), self.step.get(p), self.max.get(p))
    }
}

pub(crate) fn value_grid(initial: f64, step: f64, max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let v = initial + f64::from(k) * step;
        if v >= max - 1e-9 * step {
            out.push(max);
            return out;
        }
        out.push(v);
        k += 1;
    }
}

/// Sensors above `v_max`, and the spread of sensor voltages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearFarReport {
    pub overvoltage: Vec<OvervoltageEntry>,
    pub max_voltage_v: f64,
    pub min_voltage_v: f64,
    /// max/min sensor voltage.
    pub max_min_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OvervoltageEntry {
    /// 0-based sensor index, shallowest first.
    pub sensor: usize,
    pub depth_m: f64,
    pub voltage_v: f64,
}

pub fn near_far_report(solution: &LinkSolution, scenario: &ArrayScenario) -> NearFarReport {
    let overvoltage = scenario
        .sensors
        .iter()
        .zip(&solution.load_voltages)
        .enumerate()
        .filter(|(_, (_, &v))| v > scenario.thresholds.v_max)
        .map(|(k, (s, &v))| OvervoltageEntry {
            sensor: k,
            depth_m: s.depth_m(),
            voltage_v: v,
        })
        .collect();
    let max_voltage_v = solution.load_voltages.iter().copied().fold(0.0, f64::max);
    let min_voltage_v = solution.min_load_voltage();
    NearFarReport {
        overvoltage,
        max_voltage_v,
        min_voltage_v,
        max_min_ratio: if solution.load_voltages.is_empty() {
            1.0
        } else {
            max_voltage_v / min_voltage_v
        },
    }
}

/// Solves the scenario and reports whether every sensor is powered.
pub fn feasibility_check(scenario: &ArrayScenario) -> Result<(bool, LinkSolution)> {
    let solution = solve_exact(scenario)?;
    Ok((solution.all_powered(), solution))
}

/// Result of [`search`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub feasible: bool,
    /// The first feasible configuration, if any.
    pub params: Option<DesignPoint>,
    /// The reported configuration: `params` when feasible, otherwise the
    /// one with the highest minimum sensor voltage.
    pub reported: DesignPoint,
    /// Configurations evaluated.
    pub iterations: usize,
    pub sensor_depths_m: Vec<f64>,
    pub per_sensor_voltages: Vec<f64>,
    pub uplink_ratios: Vec<f64>,
    pub overvoltage_flags: Vec<bool>,
    pub near_far: NearFarReport,
}

/// Scenario for one design point, keeping medium, reader coil, thresholds
/// and coupling policy from the template.
pub fn design_scenario(spec: &SearchSpec, template: &ArrayScenario, point: &DesignPoint) -> Result<ArrayScenario> {
    let coil = CoilSpec::new(point.radius_m, spec.sensor_turns, point.quality_factor)?;
    let mut scenario = template.clone();
    scenario.reader = template.reader.with_power(point.transmit_power_w)?;
    scenario.sensors = NodePlacement::uniform(coil, spec.sensor_count(), spec.interval_m)?;
    Ok(scenario)
}

fn passes(solution: &LinkSolution, scenario: &ArrayScenario, uplink_gate: bool) -> bool {
    solution.all_powered()
        && (!uplink_gate
            || solution
                .uplink_ratios
                .iter()
                .all(|&a| a >= scenario.thresholds.alpha_threshold))
}

pub fn search(spec: &SearchSpec, template: &ArrayScenario) -> Result<SearchOutcome> {
    spec.validate()?;
    template.validate()?;
    let [inner, middle, outer] = spec.loop_order;
    let (gi, gm, go) = (spec.grid(inner), spec.grid(middle), spec.grid(outer));

    let mut iterations = 0;
    let mut best: Option<(f64, DesignPoint, ArrayScenario, LinkSolution)> = None;
    // Couplings depend only on the coil radius, so they are reused until it changes.
    let mut cached: Option<(f64, crate::network::CouplingMatrix)> = None;
    let mut point = spec.initial;
    for &vo in &go {
        point.set(outer, vo);
        for &vm in &gm {
            point.set(middle, vm);
            for &vi in &gi {
                point.set(inner, vi);
                iterations += 1;
                let scenario = design_scenario(spec, template, &point)?;
                let couplings = match &cached {
                    Some((r, c)) if *r == point.radius_m => c.clone(),
                    _ => {
                        let c = coupling_matrix(&scenario)?;
                        cached = Some((point.radius_m, c.clone()));
                        c
                    }
                };
                let solution = solve_with_couplings(&scenario, &couplings)?;
                if passes(&solution, &scenario, spec.uplink_gate) {
                    log::debug!("feasible at {point:?} after {iterations} evaluations");
                    return Ok(outcome(true, point, iterations, &scenario, &solution));
                }
                let score = solution.min_load_voltage();
                if best.as_ref().is_none_or(|b| score > b.0) {
                    best = Some((score, point, scenario, solution));
                }
            }
        }
    }
    let (_, point, scenario, solution) = best.expect("grids are never empty");
    Ok(outcome(false, point, iterations, &scenario, &solution))
}

fn outcome(
    feasible: bool,
    point: DesignPoint,
    iterations: usize,
    scenario: &ArrayScenario,
    solution: &LinkSolution,
) -> SearchOutcome {
    SearchOutcome {
        feasible,
        params: feasible.then_some(point),
        reported: point,
        iterations,
        sensor_depths_m: scenario.sensors.iter().map(|s| s.depth_m()).collect(),
        per_sensor_voltages: solution.load_voltages.clone(),
        uplink_ratios: solution.uplink_ratios.clone(),
        overvoltage_flags: solution.overvoltage_mask.clone(),
        near_far: near_far_report(solution, scenario),
    }
}

/// Which sensors must reach the threshold in [`minimal_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerCriterion {
    #[default]
    AllSensors,
    Deepest,
}

/// Smallest transmit power meeting the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerRequirement {
    /// Grid-and-bisection result, `None` when even `p_max` falls short.
    pub power_w: Option<f64>,
    /// Power needed regardless of the allowed range, from the √Pₜ scaling
    /// of every load voltage.
    pub unbounded_power_w: f64,
}

impl PowerRequirement {
    pub fn reachable(&self) -> bool {
        self.power_w.is_some()
    }
}

/// Minimal transmit power for a fixed layout,
/// found by stepping a power grid and bisecting the first feasible step to
/// `rel_tol`.
pub fn minimal_power(
    template: &ArrayScenario,
    p_min: f64,
    p_step: f64,
    p_max: f64,
    criterion: PowerCriterion,
    rel_tol: f64,
) -> Result<PowerRequirement> {
    ensure(p_min > 0.0 && p_step > 0.0 && p_max >= p_min, || {
        format!("invalid power range [{p_min}, {p_max}] with step {p_step}")
    })?;
    ensure(rel_tol > 0.0, || "tolerance must be positive".to_string())?;
    ensure(!template.sensors.is_empty(), || "no sensors to power".to_string())?;
    template.validate()?;
    let couplings = coupling_matrix(template)?;
    let v_th = template.thresholds.v_threshold;
    let margin = |p: f64| -> Result<f64> {
        let mut s = template.clone();
        s.reader = template.reader.with_power(p)?;
        let sol = solve_with_couplings(&s, &couplings)?;
        Ok(match criterion {
            PowerCriterion::AllSensors => sol.min_load_voltage(),
            PowerCriterion::Deepest => *sol.load_voltages.last().expect("nonempty"),
        })
    };

    let reference = margin(p_max)?;
    let unbounded_power_w = p_max * (v_th / reference).powi(2);

    let mut lo = None;
    let mut hi = None;
    for p in value_grid(p_min, p_step, p_max) {
        if margin(p)? >= v_th {
            hi = Some(p);
            break;
        }
        lo = Some(p);
    }
    let Some(mut hi) = hi else {
        return Ok(PowerRequirement {
            power_w: None,
            unbounded_power_w,
        });
    };
    if let Some(mut lo) = lo {
        while hi - lo > rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if margin(mid)? >= v_th {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(PowerRequirement {
        power_w: Some(hi),
        unbounded_power_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{default_reader, default_sensor_coil};
    use crate::network::Thresholds;
    use proptest::prelude::*;

    fn template() -> ArrayScenario {
        ArrayScenario::new(default_reader(), vec![])
    }

    #[test]
    fn grid_clamps_last_step() {
        let spec = SearchSpec::new(1.2, 0.15).unwrap();
        let p = spec.grid(SearchParam::TransmitPower);
        assert_eq!(p.len(), 21);
        assert_eq!(*p.last().unwrap(), 1.0);
        assert!((p[19] - 0.96).abs() < 1e-12);
        assert_eq!(spec.grid(SearchParam::QualityFactor), vec![8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0]);
        let a = spec.grid(SearchParam::Radius);
        assert_eq!(a.len(), 6);
        assert_eq!(*a.last().unwrap(), 0.05);
        assert_eq!(value_grid(1.0, 1.0, 1.0), vec![1.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(SearchSpec::new(1.2, 0.15).is_ok());
        assert!(SearchSpec::new(1.0, 0.15).is_err());
        assert!(SearchSpec::new(0.1, 0.15).is_err());
        let mut spec = SearchSpec::new(1.2, 0.15).unwrap();
        spec.max.quality_factor = 4.0;
        assert!(spec.validate().is_err());
        let mut spec = SearchSpec::new(1.2, 0.15).unwrap();
        spec.step.transmit_power_w = 0.0;
        assert!(spec.validate().is_err());
        let mut spec = SearchSpec::new(1.2, 0.15).unwrap();
        spec.loop_order = [SearchParam::Radius, SearchParam::Radius, SearchParam::QualityFactor];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn shallow_target_feasible_at_initial_point() {
        // Holds under the far-field coupling that anchors the default
        // threshold; the Bessel-integral coupling at 5 cm is weaker.
        let spec = SearchSpec::new(0.05, 0.05).unwrap();
        let mut dipole = template();
        dipole.coupling = crate::mutual::CouplingModel::Dipole;
        let out = search(&spec, &dipole).unwrap();
        assert!(out.feasible);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.params.unwrap(), default_initial());
        assert!(out.per_sensor_voltages[0] > Thresholds::default().v_threshold);
    }

    #[test]
    fn search_visits_quality_factor_first() {
        // A target reachable only with more power: the whole Q grid is tried
        // at the initial power before the power steps up.
        let spec = SearchSpec::new(0.15, 0.15).unwrap();
        let out = search(&spec, &template()).unwrap();
        assert!(out.feasible);
        let p = out.params.unwrap();
        let q_steps = spec.grid(SearchParam::QualityFactor).len();
        let q_index = spec.grid(SearchParam::QualityFactor).iter().position(|&q| q == p.quality_factor).unwrap();
        let p_index = spec.grid(SearchParam::TransmitPower).iter().position(|&v| v == p.transmit_power_w).unwrap();
        assert_eq!(p.radius_m, default_initial().radius_m);
        assert_eq!(out.iterations, p_index * q_steps + q_index + 1);
        // Independent confirmation of the returned triple.
        let scenario = design_scenario(&spec, &template(), &p).unwrap();
        assert!(feasibility_check(&scenario).unwrap().0);
        // And the previous point in search order fails.
        if q_index > 0 {
            let mut prev = p;
            prev.quality_factor = spec.grid(SearchParam::QualityFactor)[q_index - 1];
            assert!(!feasibility_check(&design_scenario(&spec, &template(), &prev).unwrap()).unwrap().0);
        }
    }

    #[test]
    fn unreachable_depth_reports_best_configuration() {
        let spec = SearchSpec::new(100.0, 0.5).unwrap();
        let out = search(&spec, &template()).unwrap();
        assert!(!out.feasible);
        assert!(out.params.is_none());
        assert_eq!(out.iterations, 7 * 21 * 6);
        assert_eq!(out.per_sensor_voltages.len(), 200);
    }

    #[test]
    fn search_is_deterministic() {
        let spec = SearchSpec::new(0.3, 0.15).unwrap();
        let a = search(&spec, &template()).unwrap();
        let b = search(&spec, &template()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn near_far_flags_shallow_sensor_at_high_power() {
        let coil = CoilSpec::new(0.05, 5, 32.0).unwrap();
        let reader = default_reader().with_power(1.0).unwrap();
        let s = ArrayScenario::new(reader, vec![NodePlacement::new(coil, 0.05, 0.0).unwrap()]);
        let (_, sol) = feasibility_check(&s).unwrap();
        let report = near_far_report(&sol, &s);
        assert_eq!(report.overvoltage.len(), 1);
        assert!(report.overvoltage[0].voltage_v > 20.0);
        assert_eq!(report.overvoltage[0].depth_m, 0.05);

        let quiet = ArrayScenario::new(default_reader(), NodePlacement::uniform(default_sensor_coil(), 3, 0.1).unwrap());
        let (_, sol) = feasibility_check(&quiet).unwrap();
        let report = near_far_report(&sol, &quiet);
        assert!(report.overvoltage.is_empty());
        assert!(report.max_min_ratio >= 1.0);
    }

    #[test]
    fn initial_point_of_deployment_is_infeasible() {
        let spec = SearchSpec::new(1.2, 0.15).unwrap();
        let s = design_scenario(&spec, &template(), &default_initial()).unwrap();
        let (ok, sol) = feasibility_check(&s).unwrap();
        assert!(!ok);
        assert_eq!(sol.load_voltages.len(), 8);
    }

    #[test]
    fn minimal_power_agrees_with_scaling() {
        let coil = CoilSpec::new(0.05, 5, 32.0).unwrap();
        let s = ArrayScenario::new(default_reader(), NodePlacement::uniform(coil, 4, 0.15).unwrap());
        let req = minimal_power(&s, 0.01, 0.05, 1.0, PowerCriterion::AllSensors, 1e-9).unwrap();
        let p = req.power_w.unwrap();
        assert!(((p - req.unbounded_power_w) / p).abs() < 1e-8, "{p} vs {}", req.unbounded_power_w);
        let bad = minimal_power(&s, 0.01, 0.05, 1e-3 + 0.01, PowerCriterion::AllSensors, 1e-9).unwrap();
        assert!(!bad.reachable());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn feasibility_monotone_in_power(q in 4.0f64..40.0, a in 0.015f64..0.05, count in 1usize..6,
                                         p in 0.01f64..0.5, factor in 1.0f64..4.0) {
            let coil = CoilSpec::new(a, 5, q).unwrap();
            let s = ArrayScenario::new(default_reader().with_power(p).unwrap(),
                                       NodePlacement::uniform(coil, count, 0.1).unwrap());
            let (ok, low) = feasibility_check(&s).unwrap();
            let mut t = s.clone();
            t.reader = s.reader.with_power(p * factor).unwrap();
            let (ok_high, high) = feasibility_check(&t).unwrap();
            prop_assert!(!ok || ok_high);
            for (l, h) in low.load_voltages.iter().zip(&high.load_voltages) {
                prop_assert!(((h / l) - factor.sqrt()).abs() < 1e-9 * factor.sqrt());
            }
        }
    }
}
