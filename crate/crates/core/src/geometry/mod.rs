//! Satellite and platform kinematics: orbit interpolation and propagation,
//! light-time ranging, and occultation event detection.

mod events;
mod interp;
mod kepler;
mod light_time;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::frames::EcefVec;

pub use events::{detect_events, tangent_point, EventConfig, EventKind, OccultationEvent};
pub use interp::{interpolate_sat_state, LAGRANGE_ORDER};
pub use kepler::{kepler_state, KeplerElements, KeplerOrbit};
pub use light_time::{light_time_range, LightTime};
pub use trajectory::{sample_ephemeris, BalloonDrift, PlatformTrack, StaticPoint, Trajectory};

/// Position and velocity (ECEF unless stated otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatState {
    pub pos: EcefVec,
    pub vel: EcefVec,
}
