//! Simulation and deployment design for battery-free NFC sensor arrays that
//! relay the reader's field through a chain of resonant coils.

pub mod bessel;
pub mod calibration;
pub mod chain;
pub mod coil;
pub mod config;
pub mod error;
pub mod linalg;
pub mod mutual;
pub mod network;
pub mod optimizer;
pub mod quadrature;
pub mod sweep;

pub use error::{Error, Result};
