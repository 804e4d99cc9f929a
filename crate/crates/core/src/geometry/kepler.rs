use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::constants::{GM_EARTH, OMEGA_EARTH};
use crate::error::{Error, Result};
use crate::frames::EcefVec;
use crate::geometry::{SatState, Trajectory};
use crate::time::Epoch;

/// Classical two-body elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerElements {
    /// Semi-major axis (m).
    pub a: f64,
    pub e: f64,
    /// Inclination (rad).
    pub i: f64,
    /// Right ascension of the ascending node (rad).
    pub raan: f64,
    /// Argument of perigee (rad).
    pub argp: f64,
    /// Mean anomaly at `epoch` (rad).
    pub m0: f64,
    pub epoch: Epoch,
    /// Gravitational parameter (m^3/s^2).
    pub mu: f64,
}

impl KeplerElements {
    pub fn new(
        a: f64,
        e: f64,
        i: f64,
        raan: f64,
        argp: f64,
        m0: f64,
        epoch: Epoch,
    ) -> Result<Self> {
        if !(a > 0.0) || !(0.0..1.0).contains(&e) {
            return Err(Error::InvalidInput(format!(
                "invalid elements a={a}, e={e}"
            )));
        }
        Ok(KeplerElements {
            a,
            e,
            i,
            raan,
            argp,
            m0,
            epoch,
            mu: GM_EARTH,
        })
    }

    pub fn mean_motion(&self) -> f64 {
        (self.mu / self.a.powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion()
    }
}

/// Solves Kepler's equation E - e sin E = M by Newton iteration.
pub(crate) fn eccentric_anomaly(m: f64, e: f64) -> Result<f64> {
    let mut ea = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..50 {
        let f = ea - e * ea.sin() - m;
        let d = f / (1.0 - e * ea.cos());
        ea -= d;
        if d.abs() < 1e-12 {
            return Ok(ea);
        }
    }
    Err(Error::NoConvergence {
        what: "Kepler equation",
        iterations: 50,
    })
}

/// Inertial two-body state at `t`.
pub fn kepler_state(el: &KeplerElements, t: Epoch) -> Result<SatState> {
    let dt = t.seconds_since(&el.epoch);
    let n = el.mean_motion();
    let m = (el.m0 + n * dt).rem_euclid(std::f64::consts::TAU);
    let ea = eccentric_anomaly(m, el.e)?;
    let (se, ce) = ea.sin_cos();
    let q = (1.0 - el.e * el.e).sqrt();
    let edot = n / (1.0 - el.e * ce);
    let pos_pf = EcefVec::new(el.a * (ce - el.e), el.a * q * se, 0.0);
    let vel_pf = EcefVec::new(-el.a * se * edot, el.a * q * ce * edot, 0.0);
    let rot = Rotation3::from_axis_angle(&EcefVec::z_axis(), el.raan)
        * Rotation3::from_axis_angle(&EcefVec::x_axis(), el.i)
        * Rotation3::from_axis_angle(&EcefVec::z_axis(), el.argp);
    Ok(SatState {
        pos: rot * pos_pf,
        vel: rot * vel_pf,
    })
}

/// Keplerian orbit expressed in the rotating Earth frame. The inertial frame
/// coincides with ECEF at `rotation_epoch` shifted by `gmst0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerOrbit {
    pub elements: KeplerElements,
    pub gmst0: f64,
}

impl KeplerOrbit {
    pub fn new(elements: KeplerElements) -> Self {
        KeplerOrbit {
            elements,
            gmst0: 0.0,
        }
    }

    pub fn earth_angle(&self, t: Epoch) -> f64 {
        self.gmst0 + OMEGA_EARTH * t.seconds_since(&self.elements.epoch)
    }
}

impl Trajectory for KeplerOrbit {
    fn state_at(&self, t: Epoch) -> Result<SatState> {
        let inertial = kepler_state(&self.elements, t)?;
        let rot = Rotation3::from_axis_angle(&EcefVec::z_axis(), -self.earth_angle(t));
        let pos = rot * inertial.pos;
        let omega = EcefVec::new(0.0, 0.0, OMEGA_EARTH);
        let vel = rot * inertial.vel - omega.cross(&pos);
        Ok(SatState { pos, vel })
    }

    fn span(&self) -> Option<(Epoch, Epoch)> {
        None
    }
}
