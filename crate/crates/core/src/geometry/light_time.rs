use nalgebra::Rotation3;

use crate::constants::{OMEGA_EARTH, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::frames::EcefVec;
use crate::geometry::Trajectory;
use crate::time::Epoch;

const MAX_ITER: usize = 5;
const RANGE_TOL: f64 = 1e-4;

/// Light-time solution for one receive epoch. Transmitter position and
/// velocity are expressed in the Earth frame of the receive epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightTime {
    pub range: f64,
    pub t_emit: Epoch,
    pub tau: f64,
    pub tx_pos: EcefVec,
    pub tx_vel: EcefVec,
}

fn earth_rotation(tau: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&EcefVec::z_axis(), -OMEGA_EARTH * tau)
}

impl LightTime {
    /// Unit vector from the receiver to the transmitter.
    pub fn los(&self, rx_pos: &EcefVec) -> EcefVec {
        (self.tx_pos - rx_pos) / self.range
    }

    /// Rate of the light-time range for a receiver moving at `rx_vel`, and
    /// the effective transmitter velocity `v` with `rate = los . (v - rx_vel)`.
    ///
    /// The emission epoch slides with the range, so the transmitter
    /// contributes `(1 - tau_dot) v_tx` plus the frame rotation term.
    pub fn range_rate(&self, rx_pos: &EcefVec, rx_vel: &EcefVec) -> (f64, EcefVec) {
        let u = self.los(rx_pos);
        let spin = EcefVec::new(0.0, 0.0, OMEGA_EARTH).cross(&self.tx_pos);
        let rate =
            u.dot(&(self.tx_vel - rx_vel)) / (1.0 + u.dot(&(self.tx_vel + spin)) / SPEED_OF_LIGHT);
        let tau_dot = rate / SPEED_OF_LIGHT;
        let v_eff = self.tx_vel * (1.0 - tau_dot) - spin * tau_dot;
        (rate, v_eff)
    }
}

/// Geometric range from a receiver at `rx_pos` (epoch `t_rx`) to the
/// transmitter at its emission epoch, with Earth rotation during transit.
pub fn light_time_range(rx_pos: &EcefVec, tx: &dyn Trajectory, t_rx: Epoch) -> Result<LightTime> {
    let mut tau = 0.0;
    let mut range = f64::NAN;
    for _ in 0..MAX_ITER {
        let t_emit = t_rx.add_seconds(-tau);
        let state = tx.state_at(t_emit)?;
        let rot = earth_rotation(tau);
        let tx_pos = rot * state.pos;
        let new_range = (tx_pos - rx_pos).norm();
        if !(new_range > 0.0) {
            return Err(Error::Degenerate(
                "transmitter coincides with receiver".into(),
            ));
        }
        let converged = (new_range - range).abs() < RANGE_TOL;
        range = new_range;
        if converged {
            return Ok(LightTime {
                range,
                t_emit,
                tau,
                tx_pos,
                tx_vel: rot * state.vel,
            });
        }
        tau = range / SPEED_OF_LIGHT;
    }
    Err(Error::NoConvergence {
        what: "light-time iteration",
        iterations: MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{KeplerElements, KeplerOrbit, StaticPoint};

    fn t0() -> Epoch {
        Epoch::new(2119, 200_000.0).unwrap()
    }

    fn rx() -> EcefVec {
        EcefVec::new(6_390_000.0, 10_000.0, 20_000.0)
    }

    fn gnss() -> KeplerOrbit {
        let el = KeplerElements::new(26_560_000.0, 0.01, 0.96, 0.4, 0.1, 1.2, t0()).unwrap();
        KeplerOrbit::new(el)
    }

    // residual of the light-cone condition c*tau = |rx - R(tau) x(t - tau)|
    fn cone(tx: &dyn Trajectory, tau: f64) -> f64 {
        let s = tx.state_at(t0().add_seconds(-tau)).unwrap();
        SPEED_OF_LIGHT * tau - (earth_rotation(tau) * s.pos - rx()).norm()
    }

    #[test]
    fn static_transmitter() {
        let d = 3.0e6;
        // on the rotation axis the Sagnac rotation has no effect
        let rx = EcefVec::new(0.0, 0.0, 6.4e6);
        let tx = StaticPoint(EcefVec::new(0.0, 0.0, 6.4e6 + d));
        let lt = light_time_range(&rx, &tx, t0()).unwrap();
        assert!((lt.range - d).abs() < 1e-9);
        assert_eq!(lt.tau, d / SPEED_OF_LIGHT);
        assert!((lt.t_emit.seconds_since(&t0()) + lt.tau).abs() < 1e-9);
    }

    #[test]
    fn matches_light_cone_bisection() {
        let tx = gnss();
        let (mut lo, mut hi) = (0.0, 0.2);
        assert!(cone(&tx, lo) < 0.0 && cone(&tx, hi) > 0.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if cone(&tx, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        let lt = light_time_range(&rx(), &tx, t0()).unwrap();
        assert!((lt.tau - tau).abs() < 1e-10, "{} vs {}", lt.tau, tau);
        assert!((lt.range - SPEED_OF_LIGHT * tau).abs() < 1e-3);
        assert!(lt.tau > 0.06 && lt.tau < 0.1);
        let instantaneous = (tx.state_at(t0()).unwrap().pos - rx()).norm();
        assert!((lt.range - instantaneous).abs() > 1.0);
    }

    #[test]
    fn range_rate_matches_finite_difference() {
        let tx = gnss();
        let v_rx = EcefVec::new(15.0, -4.0, 2.0);
        let rx_at = |dt: f64| rx() + v_rx * dt;
        let h = 0.05;
        let a = light_time_range(&rx_at(-h), &tx, t0().add_seconds(-h)).unwrap();
        let b = light_time_range(&rx_at(h), &tx, t0().add_seconds(h)).unwrap();
        let fd = (b.range - a.range) / (2.0 * h);
        let lt = light_time_range(&rx(), &tx, t0()).unwrap();
        let (rate, v_eff) = lt.range_rate(&rx(), &v_rx);
        assert!((rate - fd).abs() < 1e-4, "{rate} vs {fd}");
        assert!((lt.los(&rx()).dot(&(v_eff - v_rx)) - rate).abs() < 1e-9);
    }

    #[test]
    fn zero_distance_is_error() {
        let tx = StaticPoint(rx());
        assert!(light_time_range(&rx(), &tx, t0()).is_err());
    }
}
