//! Processing chain for balloon-borne GNSS radio occultation.
//!
//! The crate covers the whole path from raw receiver observables to a
//! refractivity profile:
//!
//! - [`ingest`]: RINEX 3 observation, SP3 orbit and platform CSV readers, plus
//!   epoch alignment into per-satellite occultation datasets.
//! - [`geometry`]: orbit interpolation, Keplerian propagation, light-time
//!   ranging and occultation event detection.
//! - [`atmosphere`]: exponential and layered refractivity models.
//! - [`raytracer`]: geometric-optics connection solver and occultation simulator.
//! - [`preprocess`]: excess phase, clock calibration, cycle-slip repair,
//!   Gaussian-process smoothing and profile export.
//! - [`retrieval`]: Doppler-to-bending, forward bending integration and
//!   finite-limit Abel inversion for receivers inside the atmosphere.
//! - [`stats`]: data-quality ledger and sounding-density metrics.

pub mod constants;
pub mod error;
pub mod frames;
pub mod time;

pub mod atmosphere;
mod columns;
pub mod geometry;
pub mod ingest;
pub mod preprocess;
pub mod quadrature;
pub mod raytracer;
pub mod retrieval;
pub mod stats;

pub use columns::ExportFormat;
pub use error::{Error, ParseError, Result};
pub use frames::{EcefVec, GeodeticPos};
pub use time::Epoch;
