//! Coils as parallel-resonant circuits.
//!
//! Each coil is a loop of `n` turns and radius `a` tuned to the carrier by a
//! parallel capacitor, with a parallel resistor setting its quality factor.
//! The lumped elements are derived on demand from a [`CoilSpec`] and the
//! [`MediumConstants`], so changing the carrier never leaves stale values.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Vacuum permeability in H/m.
pub const MU_0: f64 = 4.0e-7 * PI;

/// ISO/IEC 15693 / 14443 carrier frequency in Hz.
pub const NFC_CARRIER_HZ: f64 = 13.56e6;

/// Geometry and quality factor of a circular coil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoil")]
pub struct CoilSpec {
    radius_m: f64,
    turns: u32,
    quality_factor: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoil {
    radius_m: f64,
    turns: u32,
    quality_factor: f64,
}

impl TryFrom<RawCoil> for CoilSpec {
    type Error = crate::Error;

    fn try_from(raw: RawCoil) -> Result<Self> {
        CoilSpec::new(raw.radius_m, raw.turns, raw.quality_factor)
    }
}

impl CoilSpec {
    pub fn new(radius_m: f64, turns: u32, quality_factor: f64) -> Result<Self> {
        ensure(radius_m.is_finite() && radius_m > 0.0, || {
            format!("coil radius must be positive, got {radius_m}")
        })?;
        ensure(turns >= 1, || "coil must have at least one turn".to_string())?;
        ensure(quality_factor.is_finite() && quality_factor > 0.0, || {
            format!("quality factor must be positive, got {quality_factor}")
        })?;
        Ok(Self {
            radius_m,
            turns,
            quality_factor,
        })
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn turns(&self) -> u32 {
        self.turns
    }

    pub fn quality_factor(&self) -> f64 {
        self.quality_factor
    }

    /// Same coil with a different quality factor.
    pub fn with_quality_factor(&self, quality_factor: f64) -> Result<Self> {
        Self::new(self.radius_m, self.turns, quality_factor)
    }

    /// Same coil with a different radius.
    pub fn with_radius(&self, radius_m: f64) -> Result<Self> {
        Self::new(radius_m, self.turns, self.quality_factor)
    }

    pub fn elements(&self, medium: &MediumConstants) -> CircuitElements {
        let inductance = self_inductance(self, medium);
        CircuitElements {
            inductance,
            capacitance: 1.0 / (medium.angular_frequency() * medium.angular_frequency() * inductance),
            resistance: medium.angular_frequency() * inductance * self.quality_factor,
            loop_impedance: loop_impedance(self, medium),
        }
    }
}

/// Permeability and carrier shared by every coil in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMedium")]
pub struct MediumConstants {
    permeability: f64,
    carrier_frequency_hz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMedium {
    #[serde(default = "default_permeability")]
    permeability: f64,
    #[serde(default = "default_carrier")]
    carrier_frequency_hz: f64,
}

fn default_permeability() -> f64 {
    MU_0
}

fn default_carrier() -> f64 {
    NFC_CARRIER_HZ
}

impl TryFrom<RawMedium> for MediumConstants {
    type Error = crate::Error;

    fn try_from(raw: RawMedium) -> Result<Self> {
        MediumConstants::new(raw.permeability, raw.carrier_frequency_hz)
    }
}

impl Default for MediumConstants {
    /// Non-magnetic medium at the NFC carrier.
    fn default() -> Self {
        Self {
            permeability: MU_0,
            carrier_frequency_hz: NFC_CARRIER_HZ,
        }
    }
}

impl MediumConstants {
    pub fn new(permeability: f64, carrier_frequency_hz: f64) -> Result<Self> {
        ensure(permeability.is_finite() && permeability > 0.0, || {
            format!("permeability must be positive, got {permeability}")
        })?;
        ensure(carrier_frequency_hz.is_finite() && carrier_frequency_hz > 0.0, || {
            format!("carrier frequency must be positive, got {carrier_frequency_hz}")
        })?;
        Ok(Self {
            permeability,
            carrier_frequency_hz,
        })
    }

    pub fn permeability(&self) -> f64 {
        self.permeability
    }

    pub fn carrier_frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }

    /// ω = 2π f_c in rad/s.
    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.carrier_frequency_hz
    }
}

/// Lumped elements of a tuned coil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitElements {
    pub inductance: f64,
    pub capacitance: f64,
    pub resistance: f64,
    pub loop_impedance: Complex64,
}

/// Loop inductance μπ a n² / 2.
pub fn self_inductance(coil: &CoilSpec, medium: &MediumConstants) -> f64 {
    let n = f64::from(coil.turns);
    medium.permeability * PI * coil.radius_m * n * n / 2.0
}

/// Capacitance tuning an inductance to resonance at the carrier.
pub fn resonant_capacitance(inductance: f64, medium: &MediumConstants) -> Result<f64> {
    ensure(inductance.is_finite() && inductance > 0.0, || {
        format!("inductance must be positive, got {inductance}")
    })?;
    let w = medium.angular_frequency();
    Ok(1.0 / (w * w * inductance))
}

/// Parallel tank resistance ωLQ.
pub fn parallel_resistance(inductance: f64, quality_factor: f64, medium: &MediumConstants) -> Result<f64> {
    ensure(inductance.is_finite() && inductance > 0.0, || {
        format!("inductance must be positive, got {inductance}")
    })?;
    ensure(quality_factor.is_finite() && quality_factor > 0.0, || {
        format!("quality factor must be positive, got {quality_factor}")
    })?;
    Ok(medium.angular_frequency() * inductance * quality_factor)
}

/// Series impedance seen around the loop of a tuned sensor coil: the R‖C
/// branch in series with the coil inductance, ωL(Q + j)/(Q² + 1).
pub fn loop_impedance(coil: &CoilSpec, medium: &MediumConstants) -> Complex64 {
    let wl = medium.angular_frequency() * self_inductance(coil, medium);
    let q = coil.quality_factor;
    Complex64::new(q, 1.0) * (wl / (q * q + 1.0))
}

/// Impedance of the parallel R‖C load branch, −jωLQ/(Q − j).
///
/// The sensor load voltage is this impedance times the coil current.
pub fn load_branch_impedance(coil: &CoilSpec, medium: &MediumConstants) -> Complex64 {
    let wl = medium.angular_frequency() * self_inductance(coil, medium);
    let q = coil.quality_factor;
    Complex64::new(0.0, -wl * q) / Complex64::new(q, -1.0)
}
