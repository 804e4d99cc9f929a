use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{ecef_from_geodetic, enu_basis, EcefVec, GeodeticPos};
use crate::geometry::{interpolate_sat_state, SatState};
use crate::ingest::{EphemerisSample, PlatformState, SatEphemeris, SatId};
use crate::time::Epoch;

/// Anything that yields an ECEF state at a GPS epoch.
pub trait Trajectory: Send + Sync {
    fn state_at(&self, t: Epoch) -> Result<SatState>;

    /// Valid time span; `None` for analytic trajectories defined everywhere.
    fn span(&self) -> Option<(Epoch, Epoch)>;
}

impl Trajectory for SatEphemeris {
    fn state_at(&self, t: Epoch) -> Result<SatState> {
        interpolate_sat_state(self, t)
    }

    fn span(&self) -> Option<(Epoch, Epoch)> {
        Some((self.start()?, self.end()?))
    }
}

/// Samples `traj` every `interval` seconds over `[start, end]` into an
/// ephemeris table with zero clock bias.
pub fn sample_ephemeris(
    traj: &dyn Trajectory,
    sat: SatId,
    start: Epoch,
    end: Epoch,
    interval: f64,
) -> Result<SatEphemeris> {
    if !(interval > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sampling interval must be positive, got {interval}"
        )));
    }
    let span = end.seconds_since(&start);
    if !(span >= 0.0) {
        return Err(Error::InvalidInput("ephemeris end precedes start".into()));
    }
    let n = (span / interval).ceil() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = start.add_seconds(k as f64 * interval);
            traj.state_at(t).map(|s| EphemerisSample {
                t,
                pos: s.pos,
                clock_bias: Some(0.0),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SatEphemeris { sat, samples })
}

/// A fixed point in the Earth frame (hovering platform).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticPoint(pub EcefVec);

impl Trajectory for StaticPoint {
    fn state_at(&self, _t: Epoch) -> Result<SatState> {
        Ok(SatState {
            pos: self.0,
            vel: EcefVec::zeros(),
        })
    }

    fn span(&self) -> Option<(Epoch, Epoch)> {
        None
    }
}

/// Constant-height drift along a parallel at a fixed eastward ground speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalloonDrift {
    pub start: GeodeticPos,
    pub t0: Epoch,
    /// Eastward speed at flight altitude (m/s).
    pub east_speed: f64,
}

impl Trajectory for BalloonDrift {
    fn state_at(&self, t: Epoch) -> Result<SatState> {
        let dt = t.seconds_since(&self.t0);
        let (m_radius, n_radius) = crate::frames::principal_radii(self.start.lat);
        let _ = m_radius;
        let parallel_radius = (n_radius + self.start.h) * self.start.lat.cos();
        let lon_rate = self.east_speed / parallel_radius;
        let g = GeodeticPos::new(self.start.lat, self.start.lon + lon_rate * dt, self.start.h);
        let (east, _, _) = enu_basis(&g);
        Ok(SatState {
            pos: ecef_from_geodetic(&g),
            vel: east * self.east_speed,
        })
    }

    fn span(&self) -> Option<(Epoch, Epoch)> {
        None
    }
}

/// Cubic Hermite interpolation through sampled platform states.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformTrack {
    states: Vec<PlatformState>,
}

impl PlatformTrack {
    pub fn new(states: Vec<PlatformState>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidInput(
                "platform track needs at least two states".into(),
            ));
        }
        if states
            .windows(2)
            .any(|w| w[1].t.seconds_since(&w[0].t) <= 0.0)
        {
            return Err(Error::InvalidInput(
                "platform states not strictly increasing".into(),
            ));
        }
        Ok(PlatformTrack { states })
    }

    pub fn states(&self) -> &[PlatformState] {
        &self.states
    }
}

impl Trajectory for PlatformTrack {
    fn state_at(&self, t: Epoch) -> Result<SatState> {
        let first = &self.states[0];
        let last = &self.states[self.states.len() - 1];
        if t.seconds_since(&first.t) < 0.0 || last.t.seconds_since(&t) < 0.0 {
            return Err(Error::OutOfSpan {
                t: t.to_string(),
                start: first.t.to_string(),
                end: last.t.to_string(),
            });
        }
        let i = self
            .states
            .partition_point(|s| s.t.seconds_since(&t) <= 0.0)
            .clamp(1, self.states.len() - 1);
        let (a, b) = (&self.states[i - 1], &self.states[i]);
        let h = b.t.seconds_since(&a.t);
        let s = t.seconds_since(&a.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let pos = a.pos * h00 + a.vel * (h10 * h) + b.pos * h01 + b.vel * (h11 * h);
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let vel = a.pos * (d00 / h) + a.vel * d10 + b.pos * (d01 / h) + b.vel * d11;
        Ok(SatState { pos, vel })
    }

    fn span(&self) -> Option<(Epoch, Epoch)> {
        Some((self.states[0].t, self.states[self.states.len() - 1].t))
    }
}
