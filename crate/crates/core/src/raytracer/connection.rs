use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::error::{Error, Result};
use crate::frames::EcefVec;
use crate::raytracer::{optical_path_segment, segment_integrals};

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100;

/// Ray connecting a transmitter and a receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayResult {
    /// Impact parameter (m).
    pub a: f64,
    /// Total bending (rad).
    pub alpha: f64,
    /// Lowest geometric radius on the ray (m).
    pub tangent_radius: f64,
    /// Optical path minus straight-line distance (m).
    pub excess_path: f64,
    pub optical_path: f64,
    /// Angle between the ray and the inward radius at the transmitter, toward the receiver.
    pub phi_t: f64,
    /// Same at the receiver, toward the transmitter.
    pub phi_r: f64,
    /// Geocentric angle between the endpoints.
    pub theta: f64,
    pub converged: bool,
    pub iterations: usize,
}

struct Ends {
    x_lo: f64,
    x_hi: f64,
    theta: f64,
}

struct Trial {
    residual: f64,
    a: f64,
    alpha: f64,
    phi_hi: f64,
}

impl Ends {
    /// Ray leaving the lower endpoint at `phi` from the inward radius.
    /// Below pi/2 the ray dips to a tangent point between the endpoints.
    fn trial(&self, model: &AtmosphereModel, phi: f64) -> Result<Trial> {
        let a = self.x_lo * phi.sin();
        let alpha = if phi < PI / 2.0 {
            segment_integrals(model, a, a, self.x_lo)?.0
                + segment_integrals(model, a, a, self.x_hi)?.0
        } else {
            segment_integrals(model, a, self.x_lo, self.x_hi)?.0
        };
        let phi_hi = (a / self.x_hi).min(1.0).asin();
        Ok(Trial {
            residual: phi + phi_hi + self.theta - PI - alpha,
            a,
            alpha,
            phi_hi,
        })
    }
}

/// Finds the geometric-optics ray between `tx_pos` and `rx_pos` (same
/// Earth-centred frame) through a spherically symmetric `model`.
pub fn solve_connection(
    model: &AtmosphereModel,
    tx_pos: &EcefVec,
    rx_pos: &EcefVec,
) -> Result<RayResult> {
    let (r_t, r_r) = (tx_pos.norm(), rx_pos.norm());
    let theta = tx_pos.cross(rx_pos).norm().atan2(tx_pos.dot(rx_pos));
    let chord = (tx_pos - rx_pos).norm();
    if !(chord > 0.0) || !(r_t > 0.0) || !(r_r > 0.0) {
        return Err(Error::Degenerate(
            "transmitter and receiver coincide".into(),
        ));
    }
    let (x_t, x_r) = (
        model.refractional_radius(r_t),
        model.refractional_radius(r_r),
    );
    // the endpoint with smaller x is the one that can see a tangent point behind it
    let rx_low = x_r <= x_t;
    let (x_lo, x_hi, r_lo, r_hi) = if rx_low {
        (x_r, x_t, r_r, r_t)
    } else {
        (x_t, x_r, r_t, r_r)
    };
    let ends = Ends { x_lo, x_hi, theta };

    // straight-line interior angle at the lower endpoint
    let cos_lo =
        ((r_lo * r_lo + chord * chord - r_hi * r_hi) / (2.0 * r_lo * chord)).clamp(-1.0, 1.0);
    let phi0 = cos_lo.acos();

    let eps = 1e-12;
    let mut lo = (phi0, ends.trial(model, phi0)?);
    let mut iterations = 1;
    let mut hi;
    if lo.1.residual == 0.0 {
        return finish(model, &ends, rx_low, phi0, lo.1, chord, iterations);
    }
    // bending makes the residual increase with phi; walk outward for a sign change
    let upward = lo.1.residual < 0.0;
    let mut step = 1e-4;
    loop {
        let phi = if upward {
            (lo.0 + step).min(PI - eps)
        } else {
            (lo.0 - step).max(eps)
        };
        let t = ends.trial(model, phi)?;
        iterations += 1;
        if (t.residual > 0.0) == upward || t.residual == 0.0 {
            hi = (phi, t);
            break;
        }
        if phi == PI - eps || phi == eps || iterations > MAX_ITER {
            return Err(Error::NoBracket(format!(
                "no ray connects endpoints at radii {r_t:.1} m and {r_r:.1} m"
            )));
        }
        lo = (phi, t);
        step *= 2.0;
    }
    if hi.0 < lo.0 {
        std::mem::swap(&mut lo, &mut hi);
    }

    // Illinois false position on the bracket [lo, hi]
    let (mut fa, mut fb) = (lo.1.residual, hi.1.residual);
    let (mut pa, mut pb) = (lo.0, hi.0);
    let mut best = if fa.abs() < fb.abs() { lo } else { hi };
    let mut side = 0;
    while best.1.residual.abs() > RESIDUAL_TOL {
        if iterations >= MAX_ITER {
            return Err(Error::NoConvergence {
                what: "ray connection",
                iterations,
            });
        }
        let mut p = pb - fb * (pb - pa) / (fb - fa);
        if !(p > pa.min(pb) && p < pa.max(pb)) {
            p = 0.5 * (pa + pb);
        }
        let t = ends.trial(model, p)?;
        iterations += 1;
        let f = t.residual;
        if (f > 0.0) == (fb > 0.0) {
            pb = p;
            fb = f;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            pa = p;
            fa = f;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if f.abs() < best.1.residual.abs() {
            best = (p, t);
        }
        if (pb - pa).abs() < 1e-16 {
            break;
        }
    }
    let (phi, t) = best;
    finish(model, &ends, rx_low, phi, t, chord, iterations)
}

fn finish(
    model: &AtmosphereModel,
    ends: &Ends,
    rx_low: bool,
    phi_lo: f64,
    t: Trial,
    chord: f64,
    iterations: usize,
) -> Result<RayResult> {
    let a = t.a;
    let (optical_path, tangent_radius) = if phi_lo < PI / 2.0 {
        let path = optical_path_segment(model, a, a, ends.x_lo)?
            + optical_path_segment(model, a, a, ends.x_hi)?;
        (path, model.radius_from_refractional(a)?)
    } else {
        let r_lo = model.radius_from_refractional(ends.x_lo)?;
        (optical_path_segment(model, a, ends.x_lo, ends.x_hi)?, r_lo)
    };
    // the path between fixed radii changes with swept angle at rate a, so
    // this removes the first-order effect of the leftover angle residual
    let optical_path = optical_path + a * t.residual;
    let (phi_r, phi_t) = if rx_low {
        (phi_lo, t.phi_hi)
    } else {
        (t.phi_hi, phi_lo)
    };
    Ok(RayResult {
        a,
        alpha: t.alpha,
        tangent_radius,
        excess_path: optical_path - chord,
        optical_path,
        phi_t,
        phi_r,
        theta: ends.theta,
        converged: t.residual.abs() <= RESIDUAL_TOL,
        iterations,
    })
}
