//! Physical constants shared by every stage of the chain.

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// GPS L1 carrier frequency (Hz).
pub const F_L1: f64 = 1575.42e6;

/// GPS L1 carrier wavelength (m), derived from [`SPEED_OF_LIGHT`] and [`F_L1`].
pub const LAMBDA_L1: f64 = SPEED_OF_LIGHT / F_L1;

/// WGS-84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;

/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// WGS-84 semi-minor axis (m).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

/// WGS-84 first eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Mean Earth radius (m).
pub const R_EARTH_MEAN: f64 = 6_371_000.0;

/// Earth rotation rate (rad/s), WGS-84.
pub const OMEGA_EARTH: f64 = 7.292_115_146_7e-5;

/// Earth gravitational parameter (m^3/s^2).
pub const GM_EARTH: f64 = 3.986_004_418e14;

pub const SECONDS_PER_WEEK: f64 = 604_800.0;
