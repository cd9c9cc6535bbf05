//! Constant-rate decay model of a uniform sensor chain.
//!
//! When only neighbouring coils couple, sensor `p` obeys
//! `jωM(1+γ) iₚ₋₁ + Z iₚ + jωM iₚ₊₁ = 0`, where γ folds the reader's direct
//! contribution into the upstream neighbour. Trying `iₚ = β iₚ₋₁` gives
//!
//! ```text
//! jωM β² + Z β + jωM (1 + γ) = 0,
//! ```
//!
//! whose roots multiply to `1 + γ`. Passive relays cannot amplify, so the
//! root with `|β| ≤ 1` is the physical one; with `γ > 0` it may not exist.

use num_complex::Complex64;
use serde::Serialize;

use crate::coil::{loop_impedance, self_inductance, CoilSpec, MediumConstants};
use crate::error::{ensure, Error, Result};
use crate::network::{build_solution, coupling_matrix, drive_voltage, ArrayScenario, LinkSolution};

/// Relative tolerance for treating sensor spacings as uniform.
const UNIFORM_TOL: f64 = 1e-9;

/// Decay parameters of a uniform chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    pub beta: Complex64,
    pub gamma: f64,
    /// Mutual inductance between neighbouring sensors, H.
    pub adjacent_mutual: f64,
    pub sensor_coil: CoilSpec,
}

/// The decaying root of the chain quadratic for loop impedance `z_loop`.
pub fn beta_exact(z_loop: Complex64, mutual_h: f64, gamma: f64, medium: &MediumConstants) -> Result<Complex64> {
    ensure(mutual_h.is_finite() && mutual_h > 0.0, || {
        format!("adjacent mutual inductance must be positive, got {mutual_h}")
    })?;
    ensure(gamma.is_finite() && gamma >= 0.0, || format!("gamma must be non-negative, got {gamma}"))?;
    let jwm = Complex64::new(0.0, medium.angular_frequency() * mutual_h);
    let (a, b, c) = (jwm, z_loop, jwm * (1.0 + gamma));
    let root = (b * b - 4.0 * a * c).sqrt();
    // Add the square root with the sign that avoids cancellation; the other
    // root then follows from the product c/a.
    let q = if (b + root).norm() >= (b - root).norm() {
        -0.5 * (b + root)
    } else {
        -0.5 * (b - root)
    };
    let small = c / q;
    let large = q / a;
    let beta = if small.norm() <= large.norm() { small } else { large };
    if beta.norm() > 1.0 {
        return Err(Error::ModelViolation(format!(
            "no decaying chain solution: both roots exceed unit magnitude ({:.4}, {:.4})",
            small.norm(),
            large.norm()
        )));
    }
    Ok(beta)
}

/// First-order root ωM(1+γ)/(jZ).
pub fn beta_taylor(z_loop: Complex64, mutual_h: f64, gamma: f64, medium: &MediumConstants) -> Complex64 {
    Complex64::new(medium.angular_frequency() * mutual_h * (1.0 + gamma), 0.0) / (Complex64::i() * z_loop)
}

/// |β| ≈ (a/d)³ (1+γ) √(Q² + 1) for identical dipole-coupled sensors.
pub fn beta_approx(sensor: &CoilSpec, interval_m: f64, gamma: f64) -> Result<f64> {
    ensure(interval_m.is_finite() && interval_m > sensor.radius_m(), || {
        format!(
            "interval {interval_m} m must exceed the coil radius {} m",
            sensor.radius_m()
        )
    })?;
    ensure(gamma.is_finite() && gamma >= 0.0, || format!("gamma must be non-negative, got {gamma}"))?;
    let q = sensor.quality_factor();
    Ok((sensor.radius_m() / interval_m).powi(3) * (1.0 + gamma) * (q * q + 1.0).sqrt())
}

/// Interval (Q/|β|)^{1/3}·a giving decay rate `beta_target` when Q ≫ 1.
pub fn optimal_interval(sensor: &CoilSpec, beta_target: f64) -> Result<f64> {
    ensure(beta_target > 0.0 && beta_target <= 1.0, || {
        format!("target decay rate must lie in (0, 1], got {beta_target}")
    })?;
    if sensor.quality_factor() < 4.0 {
        log::warn!(
            "optimal interval assumes Q >> 1, got Q = {}",
            sensor.quality_factor()
        );
    }
    Ok((sensor.quality_factor() / beta_target).cbrt() * sensor.radius_m())
}

/// Current in the first sensor when only neighbouring coils interact,
///
/// ```text
/// i₂ = −M₁₂(Q₂−j)v₁ / (−jωM₁₂²(Q₂−j) + ωL₁L₂ + jωM₂₃L₁β(Q₂−j)).
/// ```
pub fn chain_i2(scenario: &ArrayScenario, beta: Complex64) -> Result<Complex64> {
    ensure(scenario.sensors.len() >= 2, || {
        "the chain current needs at least two sensors; use the single-sensor solution".to_string()
    })?;
    let couplings = coupling_matrix(scenario)?;
    Ok(i2_formula(scenario, couplings.get(0, 1), couplings.get(1, 2), beta))
}

fn i2_formula(scenario: &ArrayScenario, m12: f64, m23: f64, beta: Complex64) -> Complex64 {
    let medium = &scenario.medium;
    let w = medium.angular_frequency();
    let sensor = scenario.sensors[0].coil();
    let l1 = self_inductance(scenario.reader.coil(), medium);
    let l2 = self_inductance(sensor, medium);
    let qj = Complex64::new(sensor.quality_factor(), -1.0);
    let v1 = drive_voltage(&scenario.reader, medium);
    let num = -m12 * qj * v1;
    let den = Complex64::new(0.0, -w * m12 * m12) * qj
        + w * l1 * l2
        + Complex64::new(0.0, w * m23 * l1) * beta * qj;
    num / den
}

/// Checks that the sensors are identical, coaxial and evenly spaced, and
/// returns their common interval (zero for a single sensor).
fn uniform_interval(scenario: &ArrayScenario) -> Result<f64> {
    let sensors = &scenario.sensors;
    ensure(!sensors.is_empty(), || "chain model needs at least one sensor".to_string())?;
    let first = sensors[0];
    for s in sensors {
        if s.coil() != first.coil() || s.lateral_offset_m() != 0.0 {
            return Err(Error::Unsupported(
                "chain model needs identical coaxial sensor coils; use the exact solver".to_string(),
            ));
        }
    }
    if sensors.len() < 2 {
        return Ok(0.0);
    }
    let interval = sensors[1].depth_m() - sensors[0].depth_m();
    for w in sensors.windows(2) {
        let gap = w[1].depth_m() - w[0].depth_m();
        if (gap - interval).abs() > UNIFORM_TOL * interval {
            return Err(Error::Unsupported(
                "chain model needs evenly spaced sensors; use the exact solver".to_string(),
            ));
        }
    }
    Ok(interval)
}

/// Chain parameters of a uniform scenario with the given γ.
pub fn chain_params(scenario: &ArrayScenario, gamma: f64) -> Result<ChainParams> {
    uniform_interval(scenario)?;
    ensure(scenario.sensors.len() >= 2, || "chain parameters need at least two sensors".to_string())?;
    let couplings = coupling_matrix(scenario)?;
    let sensor = *scenario.sensors[0].coil();
    let m = couplings.get(1, 2);
    let beta = beta_exact(loop_impedance(&sensor, &scenario.medium), m, gamma, &scenario.medium)?;
    Ok(ChainParams {
        beta,
        gamma,
        adjacent_mutual: m,
        sensor_coil: sensor,
    })
}

/// Approximate currents `iₚ = β^{p−2} i₂` with γ = 0.
pub fn chain_solution(scenario: &ArrayScenario) -> Result<LinkSolution> {
    chain_solution_with_gamma(scenario, 0.0)
}

pub fn chain_solution_with_gamma(scenario: &ArrayScenario, gamma: f64) -> Result<LinkSolution> {
    scenario.validate()?;
    uniform_interval(scenario)?;
    let medium = &scenario.medium;
    let w = medium.angular_frequency();
    let couplings = coupling_matrix(scenario)?;
    let n = scenario.sensors.len();
    let m12 = couplings.get(0, 1);
    let (beta, m23) = if n >= 2 {
        let m23 = couplings.get(1, 2);
        let z = loop_impedance(scenario.sensors[0].coil(), medium);
        (beta_exact(z, m23, gamma, medium)?, m23)
    } else {
        (Complex64::new(0.0, 0.0), 0.0)
    };
    let i2 = i2_formula(scenario, m12, m23, beta);
    let l1 = self_inductance(scenario.reader.coil(), medium);
    let v1 = drive_voltage(&scenario.reader, medium);
    let i1 = (v1 - Complex64::new(0.0, w * m12) * i2) / Complex64::new(0.0, w * l1);

    let mut currents = Vec::with_capacity(n + 1);
    currents.push(i1);
    let mut ip = i2;
    for _ in 0..n {
        currents.push(ip);
        ip *= beta;
    }
    // |vₚ| = |ωM₍ₚ₋₁₎ₚ iₚ₋₁ Qₚ|
    let load_voltages = (1..=n)
        .map(|p| (w * couplings.get(p - 1, p) * currents[p - 1] * scenario.sensors[p - 1].coil().quality_factor()).norm())
        .collect();
    let reader_couplings_h = (1..=n).map(|k| couplings.get(0, k)).collect();
    build_solution(scenario, currents, load_voltages, reader_couplings_h, None)
}

/// 1-based coil index `⌊n/2⌋ + 1` (reader = 1) used to sample the decay
/// away from both chain ends.
pub fn mid_chain_index(coil_count: usize) -> usize {
    coil_count / 2 + 1
}

/// |iₚ₊₁ / iₚ| at the mid-chain coil of a solved scenario.
pub fn empirical_decay(solution: &LinkSolution) -> Result<f64> {
    let n = solution.currents.len();
    let p = mid_chain_index(n);
    ensure(p < n && p >= 2, || {
        format!("need at least two sensors to measure decay, have {}", n - 1)
    })?;
    let (ip, next) = (solution.currents[p - 1], solution.currents[p]);
    if ip.norm() == 0.0 {
        return Err(Error::Numerical("mid-chain current vanishes".to_string()));
    }
    Ok((next / ip).norm())
}

/// γ̂ = M₁ₚ / M₍ₚ₋₁₎ₚ at the mid-chain coil, a geometric estimate of the
/// reader's share of the drive.
pub fn gamma_estimate(scenario: &ArrayScenario) -> Result<f64> {
    let couplings = coupling_matrix(scenario)?;
    let p = mid_chain_index(scenario.coil_count());
    ensure(p >= 3 && p <= scenario.coil_count(), || {
        "need at least two sensors to estimate gamma".to_string()
    })?;
    Ok(couplings.get(0, p - 1) / couplings.get(p - 2, p - 1))
}
