//! Mutual inductance between two circular coils with parallel axes.
//!
//! Two models are provided: the far-field dipole expression, which ignores
//! coil size and lateral misalignment, and the exact filament model written
//! as a Bessel integral,
//!
//! ```text
//! M = μ π nᵢ nⱼ aᵢ aⱼ ∫₀^∞ J0(s p) J1(s aᵢ) J1(s aⱼ) e^{−s Δz} ds,
//! ```
//!
//! where `p` is the lateral distance between the axes and `Δz` the axial
//! distance between the coil planes.
//!
//! The integral is truncated where the exponential bound on the tail falls
//! below 1e-10 of the running estimate and evaluated with adaptive
//! Gauss–Kronrod panels sized to the fastest oscillation. When the coil
//! planes nearly coincide the exponential damping vanishes; there `M` is an
//! analytic function of `Δz²` as long as the windings do not touch, so it is
//! interpolated from direct evaluations at small but well-damped separations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bessel::j0_j1;
use crate::coil::{CoilSpec, MediumConstants};
use crate::error::{ensure, Error, Result};
use crate::quadrature::{gauss_kronrod_21, integrate};

/// Relative accuracy promised for the Bessel-integral model.
pub const CONWAY_REL_TOL: f64 = 1e-6;

/// Default distance, in units of the larger radius, below which the
/// automatic policy switches from the dipole model to the Bessel integral.
pub const DEFAULT_CONWAY_THRESHOLD: f64 = 10.0;

// sup |J0| · sup |J1|², bounding the integrand before the exponential.
const INTEGRAND_BOUND: f64 = 0.338_6;
const INNER_REL_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 200_000;
const NEAR_PLANE_FRACTION: f64 = 0.05;
const NEAR_PLANE_NODES: usize = 6;

/// Placement of one coil relative to another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativePose {
    axial_separation_m: f64,
    lateral_offset_m: f64,
}

impl RelativePose {
    pub fn new(axial_separation_m: f64, lateral_offset_m: f64) -> Result<Self> {
        ensure(axial_separation_m.is_finite() && axial_separation_m >= 0.0, || {
            format!("axial separation must be non-negative, got {axial_separation_m}")
        })?;
        ensure(lateral_offset_m.is_finite() && lateral_offset_m >= 0.0, || {
            format!("lateral offset must be non-negative, got {lateral_offset_m}")
        })?;
        ensure(axial_separation_m > 0.0 || lateral_offset_m > 0.0, || {
            "coil centers coincide".to_string()
        })?;
        Ok(Self {
            axial_separation_m,
            lateral_offset_m,
        })
    }

    /// Coaxial pose at the given axial distance.
    pub fn coaxial(axial_separation_m: f64) -> Result<Self> {
        Self::new(axial_separation_m, 0.0)
    }

    pub fn axial_separation_m(&self) -> f64 {
        self.axial_separation_m
    }

    pub fn lateral_offset_m(&self) -> f64 {
        self.lateral_offset_m
    }

    pub fn center_distance_m(&self) -> f64 {
        self.axial_separation_m.hypot(self.lateral_offset_m)
    }
}

/// How pairwise mutual inductances are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingModel {
    /// Bessel integral when `d < threshold · max(aᵢ, aⱼ)` or the axes are
    /// offset, dipole otherwise.
    Auto {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Dipole,
    Conway,
}

fn default_threshold() -> f64 {
    DEFAULT_CONWAY_THRESHOLD
}

impl Default for CouplingModel {
    fn default() -> Self {
        CouplingModel::Auto {
            threshold: DEFAULT_CONWAY_THRESHOLD,
        }
    }
}

impl CouplingModel {
    pub fn mutual(&self, ci: &CoilSpec, cj: &CoilSpec, pose: &RelativePose, medium: &MediumConstants) -> Result<f64> {
        match *self {
            CouplingModel::Auto { threshold } => mutual_auto(ci, cj, pose, medium, threshold),
            CouplingModel::Dipole => mutual_dipole(ci, cj, pose.center_distance_m(), medium),
            CouplingModel::Conway => mutual_conway(ci, cj, pose, medium),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let CouplingModel::Auto { threshold } = *self {
            ensure(threshold.is_finite() && threshold > 0.0, || {
                format!("conway threshold must be positive, got {threshold}")
            })?;
        }
        Ok(())
    }
}

/// Which model [`mutual_auto`] picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispatch {
    Dipole,
    Conway,
}

/// Far-field dipole coupling μπ nᵢ nⱼ aᵢ² aⱼ² / (2 d³).
pub fn mutual_dipole(ci: &CoilSpec, cj: &CoilSpec, distance_m: f64, medium: &MediumConstants) -> Result<f64> {
    ensure(distance_m.is_finite() && distance_m > 0.0, || {
        format!("coil distance must be positive, got {distance_m}")
    })?;
    let (ai, aj) = (ci.radius_m().min(cj.radius_m()), ci.radius_m().max(cj.radius_m()));
    let turns = f64::from(ci.turns()) * f64::from(cj.turns());
    Ok(medium.permeability() * PI * turns * ai * ai * aj * aj / (2.0 * distance_m.powi(3)))
}

/// Model the automatic policy uses for this pair.
pub fn dispatch(ci: &CoilSpec, cj: &CoilSpec, pose: &RelativePose, threshold: f64) -> Dispatch {
    let a_max = ci.radius_m().max(cj.radius_m());
    if pose.lateral_offset_m() > 0.0 || pose.center_distance_m() < threshold * a_max {
        Dispatch::Conway
    } else {
        Dispatch::Dipole
    }
}

pub fn mutual_auto(
    ci: &CoilSpec,
    cj: &CoilSpec,
    pose: &RelativePose,
    medium: &MediumConstants,
    threshold: f64,
) -> Result<f64> {
    match dispatch(ci, cj, pose, threshold) {
        Dispatch::Dipole => mutual_dipole(ci, cj, pose.center_distance_m(), medium),
        Dispatch::Conway => mutual_conway(ci, cj, pose, medium),
    }
}

/// Bessel-integral mutual inductance in henries.
pub fn mutual_conway(ci: &CoilSpec, cj: &CoilSpec, pose: &RelativePose, medium: &MediumConstants) -> Result<f64> {
    Ok(conway_integral(ci, cj, pose, medium)?.value)
}

/// Mutual inductance with its error bound, in henries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConwayEstimate {
    pub value: f64,
    pub abs_error: f64,
}

pub fn conway_integral(
    ci: &CoilSpec,
    cj: &CoilSpec,
    pose: &RelativePose,
    medium: &MediumConstants,
) -> Result<ConwayEstimate> {
    // Order the radii so that swapping the coils gives bit-identical results.
    let (a_small, a_large) = if ci.radius_m() <= cj.radius_m() {
        (ci.radius_m(), cj.radius_m())
    } else {
        (cj.radius_m(), ci.radius_m())
    };
    let p = pose.lateral_offset_m();
    let dz = pose.axial_separation_m();
    let gap = in_plane_gap(a_small, a_large, p);

    let raw = if gap > 0.0 && dz < NEAR_PLANE_FRACTION * gap {
        near_plane(a_small, a_large, p, dz, NEAR_PLANE_FRACTION * gap)?
    } else if dz > 0.0 {
        direct(a_small, a_large, p, dz)?
    } else {
        return Err(Error::Domain(format!(
            "coplanar windings touch or intersect (radii {a_small}, {a_large}, lateral offset {p})"
        )));
    };

    let scale = medium.permeability() * PI * f64::from(ci.turns()) * f64::from(cj.turns()) * a_small * a_large;
    Ok(ConwayEstimate {
        value: scale * raw.value,
        abs_error: scale * raw.abs_error,
    })
}

/// Closest approach of the two windings projected onto one plane; zero when
/// the projected circles cross.
fn in_plane_gap(a_small: f64, a_large: f64, p: f64) -> f64 {
    if p >= a_small + a_large {
        p - a_small - a_large
    } else if p <= a_large - a_small {
        a_large - a_small - p
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Integral {
    value: f64,
    abs_error: f64,
}

fn integrand(a_small: f64, a_large: f64, p: f64, dz: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let radial = if p == 0.0 { 1.0 } else { j0_j1(s * p).0 };
        let (_, j_small) = j0_j1(s * a_small);
        let (_, j_large) = j0_j1(s * a_large);
        radial * (j_small * j_large) * (-s * dz).exp()
    }
}

fn panels(upper: f64, width: f64) -> Result<Vec<f64>> {
    let count = (upper / width).ceil().max(1.0);
    if count > MAX_PANELS as f64 {
        return Err(Error::Quadrature {
            message: format!("integration range needs {count:.0} panels (limit {MAX_PANELS})"),
            truncation: upper,
            last_segment: f64::NAN,
            error_estimate: f64::NAN,
        });
    }
    let count = count as usize;
    Ok((0..=count).map(|k| upper * k as f64 / count as f64).collect())
}

fn direct(a_small: f64, a_large: f64, p: f64, dz: f64) -> Result<Integral> {
    let f = integrand(a_small, a_large, p, dz);
    let width = (PI / (p + a_small + a_large)).min(2.0 / dz);

    // Rough pass to size the truncation point and the absolute floor.
    let probe_upper = 40.0 / dz;
    let probe = panels(probe_upper, width)?;
    let mut rough = 0.0;
    let mut l1 = 0.0;
    for w in probe.windows(2) {
        let e = gauss_kronrod_21(&f, w[0], w[1]);
        rough += e.value;
        l1 += e.value.abs();
    }
    let floor = 1e-12 * l1;
    let tail_target = INNER_REL_TOL * rough.abs() + floor;
    // INTEGRAND_BOUND · e^{−S Δz} / Δz ≤ tail_target
    let upper = ((INTEGRAND_BOUND / (dz * tail_target)).ln() / dz).max(width);
    let tail = INTEGRAND_BOUND * (-upper * dz).exp() / dz;

    let breaks = panels(upper, width)?;
    let last_segment = {
        let n = breaks.len();
        gauss_kronrod_21(&f, breaks[n - 2], breaks[n - 1]).value
    };
    let max_segments = (4 * breaks.len()).max(2_000);
    let est = integrate(&f, &breaks, floor, INNER_REL_TOL, max_segments).map_err(|fail| Error::Quadrature {
        message: format!("adaptive refinement exhausted {} segments", fail.segments),
        truncation: upper,
        last_segment,
        error_estimate: fail.estimate.abs_error,
    })?;

    let abs_error = est.abs_error + tail;
    if abs_error > CONWAY_REL_TOL * est.value.abs() && abs_error > 1e-10 * l1 {
        return Err(Error::Quadrature {
            message: "error bound exceeds the relative tolerance".to_string(),
            truncation: upper,
            last_segment,
            error_estimate: abs_error,
        });
    }
    Ok(Integral {
        value: est.value,
        abs_error,
    })
}

/// Interpolates the integral in u = Δz² from direct evaluations at
/// Δz = z₀ (1 + k/2), k = 0..NEAR_PLANE_NODES.
fn near_plane(a_small: f64, a_large: f64, p: f64, dz: f64, z0: f64) -> Result<Integral> {
    let mut nodes = Vec::with_capacity(NEAR_PLANE_NODES);
    let mut node_error: f64 = 0.0;
    for k in 0..NEAR_PLANE_NODES {
        let z = z0 * (1.0 + 0.5 * k as f64);
        let v = direct(a_small, a_large, p, z)?;
        node_error = node_error.max(v.abs_error);
        nodes.push((z * z, v.value));
    }
    let (value, last_correction) = neville(&nodes, dz * dz);
    let abs_error = last_correction.abs() + node_error;
    if abs_error > CONWAY_REL_TOL * value.abs() {
        return Err(Error::Quadrature {
            message: "near-plane interpolation did not settle".to_string(),
            truncation: 40.0 / z0,
            last_segment: nodes[0].1,
            error_estimate: abs_error,
        });
    }
    Ok(Integral { value, abs_error })
}

/// Polynomial interpolation through `points` evaluated at `x`; returns the
/// value and the last correction applied (a practical error estimate).
fn neville(points: &[(f64, f64)], x: f64) -> (f64, f64) {
    let n = points.len();
    let mut table: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let mut correction = 0.0;
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (points[i].0, points[i + level].0);
            let updated = ((x - xj) * table[i] + (xi - x) * table[i + 1]) / (xi - xj);
            if i == 0 {
                correction = updated - table[0];
            }
            table[i] = updated;
        }
    }
    (table[0], correction)
}
