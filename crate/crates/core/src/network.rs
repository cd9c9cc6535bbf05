//! Steady-state currents of a reader coil driving a stack of resonant
//! sensor coils, and the single-sensor closed forms.
//!
//! Coil 0 is the reader, driven by a voltage source; coils 1..=n are the
//! sensors in order of depth. Every pair of coils is coupled, so the circuit
//! equations form a dense symmetric complex system
//!
//! ```text
//! jωL₁ i₁ + Σ jωM₁ₖ iₖ = v₁
//! Zₚ iₚ  + Σ jωMₖₚ iₖ = 0      (p = 2..n)
//! ```
//!
//! with `Zₚ = ωLₚ(Qₚ + j)/(Qₚ² + 1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::coil::{load_branch_impedance, loop_impedance, self_inductance, CoilSpec, MediumConstants};
use crate::error::{ensure, Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::mutual::{CouplingModel, RelativePose};

/// Condition number above which a solve is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Reader coil and transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReader")]
pub struct ReaderConfig {
    coil: CoilSpec,
    transmit_power_w: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReader {
    coil: CoilSpec,
    transmit_power_w: f64,
}

impl TryFrom<RawReader> for ReaderConfig {
    type Error = Error;

    fn try_from(raw: RawReader) -> Result<Self> {
        ReaderConfig::new(raw.coil, raw.transmit_power_w)
    }
}

impl ReaderConfig {
    pub fn new(coil: CoilSpec, transmit_power_w: f64) -> Result<Self> {
        ensure(transmit_power_w.is_finite() && transmit_power_w > 0.0, || {
            format!("transmit power must be positive, got {transmit_power_w}")
        })?;
        Ok(Self { coil, transmit_power_w })
    }

    pub fn coil(&self) -> &CoilSpec {
        &self.coil
    }

    pub fn transmit_power_w(&self) -> f64 {
        self.transmit_power_w
    }

    pub fn with_power(&self, transmit_power_w: f64) -> Result<Self> {
        Self::new(self.coil, transmit_power_w)
    }
}

/// A sensor coil at a depth below the reader, optionally displaced sideways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlacement")]
pub struct NodePlacement {
    coil: CoilSpec,
    depth_m: f64,
    lateral_offset_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlacement {
    coil: CoilSpec,
    depth_m: f64,
    #[serde(default)]
    lateral_offset_m: f64,
}

impl TryFrom<RawPlacement> for NodePlacement {
    type Error = Error;

    fn try_from(raw: RawPlacement) -> Result<Self> {
        NodePlacement::new(raw.coil, raw.depth_m, raw.lateral_offset_m)
    }
}

impl NodePlacement {
    /// `lateral_offset_m` is signed along one horizontal axis.
    pub fn new(coil: CoilSpec, depth_m: f64, lateral_offset_m: f64) -> Result<Self> {
        ensure(depth_m.is_finite() && depth_m > 0.0, || {
            format!("sensor depth must be positive, got {depth_m}")
        })?;
        ensure(lateral_offset_m.is_finite(), || "lateral offset must be finite".to_string())?;
        Ok(Self {
            coil,
            depth_m,
            lateral_offset_m,
        })
    }

    /// `count` identical coaxial sensors at depths `interval, 2·interval, …`.
    pub fn uniform(coil: CoilSpec, count: usize, interval_m: f64) -> Result<Vec<Self>> {
        ensure(interval_m.is_finite() && interval_m > 0.0, || {
            format!("sensor interval must be positive, got {interval_m}")
        })?;
        (1..=count).map(|k| Self::new(coil, k as f64 * interval_m, 0.0)).collect()
    }

    pub fn coil(&self) -> &CoilSpec {
        &self.coil
    }

    pub fn depth_m(&self) -> f64 {
        self.depth_m
    }

    pub fn lateral_offset_m(&self) -> f64 {
        self.lateral_offset_m
    }
}

/// Power-up, detectability and overvoltage limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum load voltage that powers a sensor, V.
    #[serde(default = "calibration::default_v_threshold")]
    pub v_threshold: f64,
    /// Minimum uplink ratio the reader can demodulate.
    #[serde(default = "calibration::default_alpha_threshold")]
    pub alpha_threshold: f64,
    /// Load voltage above which a sensor is at risk, V.
    #[serde(default = "default_v_max")]
    pub v_max: f64,
}

fn default_v_max() -> f64 {
    calibration::DEFAULT_V_MAX
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            v_threshold: calibration::default_v_threshold(),
            alpha_threshold: calibration::default_alpha_threshold(),
            v_max: calibration::DEFAULT_V_MAX,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        ensure(self.v_threshold.is_finite() && self.v_threshold > 0.0, || {
            format!("v_threshold must be positive, got {}", self.v_threshold)
        })?;
        ensure(self.alpha_threshold > 0.0 && self.alpha_threshold < 1.0, || {
            format!("alpha_threshold must lie in (0, 1), got {}", self.alpha_threshold)
        })?;
        ensure(self.v_max.is_finite() && self.v_max > self.v_threshold, || {
            format!("v_max ({}) must exceed v_threshold ({})", self.v_max, self.v_threshold)
        })
    }
}

/// Which coil pairs enter the circuit equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRange {
    /// Every pair, the physical model.
    #[default]
    All,
    /// Only consecutive coils (reader–first sensor, sensor–next sensor).
    /// A diagnostic that matches the chain model's assumptions.
    Adjacent,
}

/// Reader, sensors and limits for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayScenario {
    pub medium: MediumConstants,
    pub reader: ReaderConfig,
    pub sensors: Vec<NodePlacement>,
    pub thresholds: Thresholds,
    pub coupling: CouplingModel,
    pub range: CouplingRange,
}

impl ArrayScenario {
    /// Scenario with default medium, thresholds and coupling policy.
    pub fn new(reader: ReaderConfig, sensors: Vec<NodePlacement>) -> Self {
        Self {
            medium: MediumConstants::default(),
            reader,
            sensors,
            thresholds: Thresholds::default(),
            coupling: CouplingModel::default(),
            range: CouplingRange::All,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.coupling.validate()?;
        for w in self.sensors.windows(2) {
            ensure(w[1].depth_m > w[0].depth_m, || {
                format!(
                    "sensor depths must be strictly increasing ({} then {})",
                    w[0].depth_m, w[1].depth_m
                )
            })?;
        }
        Ok(())
    }

    /// Number of coils including the reader.
    pub fn coil_count(&self) -> usize {
        self.sensors.len() + 1
    }

    fn coil(&self, index: usize) -> &CoilSpec {
        if index == 0 {
            &self.reader.coil
        } else {
            &self.sensors[index - 1].coil
        }
    }

    fn position(&self, index: usize) -> (f64, f64) {
        if index == 0 {
            (0.0, 0.0)
        } else {
            let s = &self.sensors[index - 1];
            (s.depth_m, s.lateral_offset_m)
        }
    }

    fn pose(&self, i: usize, j: usize) -> Result<RelativePose> {
        let (zi, xi) = self.position(i);
        let (zj, xj) = self.position(j);
        RelativePose::new((zi - zj).abs(), (xi - xj).abs()).map_err(|_| {
            Error::Domain(format!("coil {i} and coil {j} occupy the same position"))
        })
    }
}

/// Symmetric table of mutual inductances, coil 0 being the reader.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CouplingMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// M between coils `i` and `j` in henries; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Mutual inductances for every coupled pair of the scenario.
///
/// These depend only on geometry and medium, so sweeps over power or quality
/// factor can compute them once.
pub fn coupling_matrix(scenario: &ArrayScenario) -> Result<CouplingMatrix> {
    let n = scenario.coil_count();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            if scenario.range == CouplingRange::Adjacent && j != i + 1 {
                continue;
            }
            let pose = scenario.pose(i, j)?;
            let m = scenario
                .coupling
                .mutual(scenario.coil(i), scenario.coil(j), &pose, &scenario.medium)?;
            values[i * n + j] = m;
            values[j * n + i] = m;
        }
    }
    Ok(CouplingMatrix { n, values })
}

/// Reader drive amplitude √(2ωPₜL₁Q₁).
pub fn drive_voltage(reader: &ReaderConfig, medium: &MediumConstants) -> f64 {
    let l1 = self_inductance(&reader.coil, medium);
    (2.0 * medium.angular_frequency() * reader.transmit_power_w * l1 * reader.coil.quality_factor()).sqrt()
}

/// Circuit matrix and right-hand side.
#[derive(Debug, Clone)]
pub struct CircuitSystem {
    pub matrix: ComplexMatrix,
    pub rhs: Vec<Complex64>,
}

pub fn assemble_system(scenario: &ArrayScenario) -> Result<CircuitSystem> {
    scenario.validate()?;
    let couplings = coupling_matrix(scenario)?;
    Ok(assemble_with(scenario, &couplings))
}

fn assemble_with(scenario: &ArrayScenario, couplings: &CouplingMatrix) -> CircuitSystem {
    let medium = &scenario.medium;
    let w = medium.angular_frequency();
    let n = scenario.coil_count();
    let mut matrix = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = if i != j {
                Complex64::new(0.0, w * couplings.get(i, j))
            } else if i == 0 {
                Complex64::new(0.0, w * self_inductance(&scenario.reader.coil, medium))
            } else {
                loop_impedance(scenario.coil(i), medium)
            };
            matrix.set(i, j, v);
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[0] = Complex64::new(drive_voltage(&scenario.reader, medium), 0.0);
    CircuitSystem { matrix, rhs }
}

/// Exact solution of the coupled circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSolution {
    /// Reader drive amplitude v₁, V.
    pub drive_voltage_v: f64,
    /// Loop currents, reader first, A.
    pub currents: Vec<Complex64>,
    /// |vₚ| across each sensor load, V.
    pub load_voltages: Vec<f64>,
    /// Uplink ratio per sensor.
    pub uplink_ratios: Vec<f64>,
    pub powered_mask: Vec<bool>,
    pub overvoltage_mask: Vec<bool>,
    /// Reader-to-sensor mutual inductances M₁ₚ, H.
    pub reader_couplings_h: Vec<f64>,
    /// Present when the currents come from the linear solve.
    pub diagnostics: Option<SolverDiagnostics>,
    /// Re(v₁ i₁*), the power delivered by the source (amplitude convention).
    pub power_in: f64,
    /// Σ Re(Zₚ)|iₚ|², the power dissipated in the sensors.
    pub power_dissipated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    /// ‖Ax − b‖₂/‖b‖₂.
    pub relative_residual: f64,
    /// κ₁ of the circuit matrix.
    pub condition: f64,
}

impl LinkSolution {
    /// |power_in − power_dissipated| / power_in.
    pub fn power_mismatch(&self) -> f64 {
        (self.power_in - self.power_dissipated).abs() / self.power_in.abs()
    }

    pub fn all_powered(&self) -> bool {
        self.powered_mask.iter().all(|&p| p)
    }

    pub fn min_load_voltage(&self) -> f64 {
        self.load_voltages.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn solve_exact(scenario: &ArrayScenario) -> Result<LinkSolution> {
    scenario.validate()?;
    let couplings = coupling_matrix(scenario)?;
    solve_with_couplings(scenario, &couplings)
}

/// [`solve_exact`] with precomputed mutual inductances.
pub fn solve_with_couplings(scenario: &ArrayScenario, couplings: &CouplingMatrix) -> Result<LinkSolution> {
    ensure(couplings.dim() == scenario.coil_count(), || {
        format!(
            "coupling table has {} coils, scenario has {}",
            couplings.dim(),
            scenario.coil_count()
        )
    })?;
    let medium = &scenario.medium;
    let system = assemble_with(scenario, couplings);
    let solved = linalg::solve(&system.matrix, &system.rhs).map_err(|_| ill_conditioned(scenario, couplings, f64::INFINITY))?;
    if solved.condition > MAX_CONDITION {
        return Err(ill_conditioned(scenario, couplings, solved.condition));
    }
    let load_voltages = scenario
        .sensors
        .iter()
        .zip(&solved.x[1..])
        .map(|(s, i)| (i * load_branch_impedance(&s.coil, medium)).norm())
        .collect();
    let reader_couplings_h = (1..scenario.coil_count()).map(|k| couplings.get(0, k)).collect();
    let diagnostics = SolverDiagnostics {
        relative_residual: solved.relative_residual,
        condition: solved.condition,
    };
    build_solution(scenario, solved.x, load_voltages, reader_couplings_h, Some(diagnostics))
}

/// Fills in masks, uplink ratios and the power balance for given currents.
pub(crate) fn build_solution(
    scenario: &ArrayScenario,
    currents: Vec<Complex64>,
    load_voltages: Vec<f64>,
    reader_couplings_h: Vec<f64>,
    diagnostics: Option<SolverDiagnostics>,
) -> Result<LinkSolution> {
    let medium = &scenario.medium;
    let v1 = drive_voltage(&scenario.reader, medium);
    let power_in = v1 * currents[0].re;
    let power_dissipated = scenario
        .sensors
        .iter()
        .zip(&currents[1..])
        .map(|(s, i)| loop_impedance(&s.coil, medium).re * i.norm_sqr())
        .sum();
    let th = &scenario.thresholds;
    let mut solution = LinkSolution {
        drive_voltage_v: v1,
        powered_mask: load_voltages.iter().map(|&v| v >= th.v_threshold).collect(),
        overvoltage_mask: load_voltages.iter().map(|&v| v > th.v_max).collect(),
        load_voltages,
        uplink_ratios: Vec::new(),
        reader_couplings_h,
        currents,
        diagnostics,
        power_in,
        power_dissipated,
    };
    solution.uplink_ratios = (0..scenario.sensors.len())
        .map(|k| uplink_ratio_multi(&solution, scenario, k))
        .collect::<Result<_>>()?;
    Ok(solution)
}

fn ill_conditioned(scenario: &ArrayScenario, couplings: &CouplingMatrix, condition: f64) -> Error {
    let medium = &scenario.medium;
    let n = scenario.coil_count();
    let mut pair = (0, 0);
    let mut strongest = -1.0;
    for i in 0..n {
        for j in i + 1..n {
            let li = self_inductance(scenario.coil(i), medium);
            let lj = self_inductance(scenario.coil(j), medium);
            let k = couplings.get(i, j).abs() / (li * lj).sqrt();
            if k > strongest {
                strongest = k;
                pair = (i, j);
            }
        }
    }
    Error::IllConditioned { condition, pair }
}

/// Uplink ratio of sensor `k` (0-based among sensors): the share of the
/// reader's flux contributed by that sensor's current,
/// |ωM₁ₖiₖ / (ωL₁i₁ + Σ_{p≠k} ωM₁ₚiₚ)|.
pub fn uplink_ratio_multi(solution: &LinkSolution, scenario: &ArrayScenario, k: usize) -> Result<f64> {
    ensure(k < scenario.sensors.len(), || format!("sensor index {k} out of range"))?;
    let l1 = self_inductance(&scenario.reader.coil, &scenario.medium);
    let currents = &solution.currents;
    let own = solution.reader_couplings_h[k] * currents[k + 1];
    let mut rest = l1 * currents[0];
    for (p, (&m, &i)) in solution.reader_couplings_h.iter().zip(&currents[1..]).enumerate() {
        if p != k {
            rest += m * i;
        }
    }
    if rest.norm() == 0.0 || !rest.norm().is_finite() {
        return Err(Error::Numerical(format!("uplink ratio of sensor {k} has a vanishing denominator")));
    }
    Ok((own / rest).norm())
}

/// Load voltage of a single sensor for a given mutual inductance,
/// |M Q L₂ v₁ / (jL₁L₂ + M²(Q − j))|.
pub fn single_sensor_voltage_with_mutual(
    reader: &ReaderConfig,
    sensor: &CoilSpec,
    mutual_h: f64,
    medium: &MediumConstants,
) -> f64 {
    let l1 = self_inductance(&reader.coil, medium);
    let l2 = self_inductance(sensor, medium);
    let q = sensor.quality_factor();
    let v1 = drive_voltage(reader, medium);
    let den = Complex64::new(0.0, l1 * l2) + Complex64::new(q, -1.0) * (mutual_h * mutual_h);
    (mutual_h * q * l2 * v1 / den.norm()).abs()
}

fn downlink_numerator(reader: &ReaderConfig, sensor: &CoilSpec, medium: &MediumConstants) -> f64 {
    let a1 = reader.coil.radius_m();
    let a2 = sensor.radius_m();
    let n2 = f64::from(sensor.turns());
    let w = medium.angular_frequency();
    n2 * a1
        * a2
        * a2
        * sensor.quality_factor()
        * (w * medium.permeability() * std::f64::consts::PI * a1 * reader.transmit_power_w * reader.coil.quality_factor())
            .sqrt()
}

/// Dipole-coupled single-sensor load voltage at coaxial distance `d`,
/// n₂a₁a₂²Q₂√(ωμπa₁PₜQ₁) / |jd³ + a₁³a₂³(Q₂ − j)/d³|.
pub fn single_sensor_voltage(
    reader: &ReaderConfig,
    sensor: &CoilSpec,
    distance_m: f64,
    medium: &MediumConstants,
) -> Result<f64> {
    ensure(distance_m.is_finite() && distance_m > 0.0, || {
        format!("distance must be positive, got {distance_m}")
    })?;
    let d3 = distance_m.powi(3);
    let k = (reader.coil.radius_m() * sensor.radius_m()).powi(3);
    let den = Complex64::new(0.0, d3) + Complex64::new(sensor.quality_factor(), -1.0) * (k / d3);
    Ok(downlink_numerator(reader, sensor, medium) / den.norm())
}

/// Distance at which the far-field voltage falls to `v_threshold`, ignoring
/// the sensor's back-action on the reader.
pub fn max_downlink_range(
    reader: &ReaderConfig,
    sensor: &CoilSpec,
    v_threshold: f64,
    medium: &MediumConstants,
) -> Result<f64> {
    ensure(v_threshold.is_finite() && v_threshold > 0.0, || {
        format!("threshold voltage must be positive, got {v_threshold}")
    })?;
    Ok((downlink_numerator(reader, sensor, medium) / v_threshold).cbrt())
}

/// Single-sensor uplink ratio a₁³a₂³√(Q₂² + 1)/d⁶.
pub fn uplink_ratio_single(reader: &ReaderConfig, sensor: &CoilSpec, distance_m: f64) -> Result<f64> {
    ensure(distance_m.is_finite() && distance_m > 0.0, || {
        format!("distance must be positive, got {distance_m}")
    })?;
    Ok(uplink_constant(reader, sensor) / distance_m.powi(6))
}

fn uplink_constant(reader: &ReaderConfig, sensor: &CoilSpec) -> f64 {
    let q = sensor.quality_factor();
    (reader.coil.radius_m() * sensor.radius_m()).powi(3) * (q * q + 1.0).sqrt()
}

pub fn max_uplink_range(reader: &ReaderConfig, sensor: &CoilSpec, alpha_threshold: f64) -> Result<f64> {
    ensure(alpha_threshold.is_finite() && alpha_threshold > 0.0, || {
        format!("alpha threshold must be positive, got {alpha_threshold}")
    })?;
    Ok((uplink_constant(reader, sensor) / alpha_threshold).powf(1.0 / 6.0))
}

/// Which link direction limits the range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingLimit {
    DownlinkLimited,
    UplinkLimited,
}

impl BindingLimit {
    pub fn as_str(&self) -> &'static str {
        match self {
            BindingLimit::DownlinkLimited => "downlink-limited",
            BindingLimit::UplinkLimited => "uplink-limited",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeLimit {
    pub distance_m: f64,
    pub downlink_m: f64,
    pub uplink_m: f64,
    pub binding: BindingLimit,
}

pub fn max_range_single(
    reader: &ReaderConfig,
    sensor: &CoilSpec,
    v_threshold: f64,
    alpha_threshold: f64,
    medium: &MediumConstants,
) -> Result<RangeLimit> {
    let downlink_m = max_downlink_range(reader, sensor, v_threshold, medium)?;
    let uplink_m = max_uplink_range(reader, sensor, alpha_threshold)?;
    let (distance_m, binding) = if downlink_m <= uplink_m {
        (downlink_m, BindingLimit::DownlinkLimited)
    } else {
        (uplink_m, BindingLimit::UplinkLimited)
    };
    Ok(RangeLimit {
        distance_m,
        downlink_m,
        uplink_m,
        binding,
    })
}
