//! Default coils and the threshold values derived from them.
//!
//! Neither threshold is given numerically by the physics; both are pinned to
//! reference geometries:
//!
//! - `v_threshold` is the far-field single-sensor voltage of the default
//!   reader and a Q = 8 default sensor at 6 cm, so that pair is powered up
//!   to exactly 6 cm.
//! - `alpha_threshold` is the geometric mean of the single-sensor uplink
//!   ratio at 0.45 m and 0.60 m for a 5 cm, Q = 32 sensor, so that sensor is
//!   detectable at the first three 0.15 m locations and not at the fourth.

use crate::coil::{CoilSpec, MediumConstants};
use crate::network::{single_sensor_voltage, uplink_ratio_single, ReaderConfig};

/// Overvoltage limit for sensor front ends, V.
pub const DEFAULT_V_MAX: f64 = 20.0;

/// Reader coil radius, turns and quality factor.
pub const READER_RADIUS_M: f64 = 0.04;
pub const READER_TURNS: u32 = 5;
pub const READER_Q: f64 = 8.0;

/// Starting sensor coil.
pub const SENSOR_RADIUS_M: f64 = 0.025;
pub const SENSOR_TURNS: u32 = 5;
pub const SENSOR_Q: f64 = 8.0;

/// Starting transmit power, W.
pub const TRANSMIT_POWER_W: f64 = 0.01;

/// Distance at which the default pair just powers up, m.
pub const V_ANCHOR_DISTANCE_M: f64 = 0.06;

/// Sensor used to pin the uplink threshold and the depths bracketing its
/// last detectable location.
pub const ALPHA_ANCHOR_RADIUS_M: f64 = 0.05;
pub const ALPHA_ANCHOR_Q: f64 = 32.0;
pub const ALPHA_ANCHOR_DEPTHS_M: (f64, f64) = (0.45, 0.60);

pub fn default_reader_coil() -> CoilSpec {
    CoilSpec::new(READER_RADIUS_M, READER_TURNS, READER_Q).expect("valid constant")
}

pub fn default_reader() -> ReaderConfig {
    ReaderConfig::new(default_reader_coil(), TRANSMIT_POWER_W).expect("valid constant")
}

pub fn default_sensor_coil() -> CoilSpec {
    CoilSpec::new(SENSOR_RADIUS_M, SENSOR_TURNS, SENSOR_Q).expect("valid constant")
}

pub fn default_v_threshold() -> f64 {
    single_sensor_voltage(
        &default_reader(),
        &default_sensor_coil(),
        V_ANCHOR_DISTANCE_M,
        &MediumConstants::default(),
    )
    .expect("positive anchor distance")
}

pub fn default_alpha_threshold() -> f64 {
    let sensor = CoilSpec::new(ALPHA_ANCHOR_RADIUS_M, SENSOR_TURNS, ALPHA_ANCHOR_Q).expect("valid constant");
    let reader = default_reader();
    let (near, far) = ALPHA_ANCHOR_DEPTHS_M;
    let a = uplink_ratio_single(&reader, &sensor, near).expect("positive depth");
    let b = uplink_ratio_single(&reader, &sensor, far).expect("positive depth");
    (a * b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_threshold_value() {
        let v = default_v_threshold();
        assert!((v - 4.834_635).abs() < 1e-5, "{v}");
    }

    #[test]
    fn alpha_threshold_separates_third_and_fourth_location() {
        let alpha = default_alpha_threshold();
        let sensor = CoilSpec::new(ALPHA_ANCHOR_RADIUS_M, SENSOR_TURNS, ALPHA_ANCHOR_Q).unwrap();
        let r = default_reader();
        let detected: Vec<bool> = (1..=8)
            .map(|k| uplink_ratio_single(&r, &sensor, 0.15 * k as f64).unwrap() > alpha)
            .collect();
        assert_eq!(detected, [true, true, true, false, false, false, false, false]);
        assert!((alpha - 1.301e-5).abs() < 1e-8, "{alpha}");
    }
}
