//! Physical constants (SI, CODATA 2018 exact values).

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub(crate) const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
