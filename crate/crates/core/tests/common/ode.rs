//! Direct ray integration of d/ds(n dp/ds) = grad n with classical RK4.

use ro_core::atmosphere::AtmosphereModel;
use ro_core::EcefVec;

pub struct OracleRay {
    /// Angle between the launch and exit directions (rad).
    pub alpha: f64,
    /// Largest relative change of |p x q| along the ray.
    pub bouguer_drift: f64,
    /// Lowest radius reached (m).
    pub min_radius: f64,
    pub exit_pos: EcefVec,
    pub exit_dir: EcefVec,
}

fn grad_n(model: &AtmosphereModel, p: &EcefVec) -> (f64, EcefVec) {
    let r = p.norm();
    let (n, dn) = model.eval(r);
    (n, p * (dn / r))
}

/// Launches a ray from `start` along unit `dir` and integrates with step
/// `h` (m) until it leaves the atmosphere moving outward.
pub fn trace(model: &AtmosphereModel, start: EcefVec, dir: EcefVec, h: f64) -> OracleRay {
    let top = model.top_radius();
    let (n0, _) = grad_n(model, &start);
    let mut p = start;
    let mut q = dir.normalize() * n0;
    let l0 = p.cross(&q).norm();
    let mut drift: f64 = 0.0;
    let mut min_radius = p.norm();
    let deriv = |p: &EcefVec, q: &EcefVec| {
        let (n, g) = grad_n(model, p);
        (q / n, g)
    };
    for _ in 0..10_000_000 {
        let (k1p, k1q) = deriv(&p, &q);
        let (k2p, k2q) = deriv(&(p + k1p * (h / 2.0)), &(q + k1q * (h / 2.0)));
        let (k3p, k3q) = deriv(&(p + k2p * (h / 2.0)), &(q + k2q * (h / 2.0)));
        let (k4p, k4q) = deriv(&(p + k3p * h), &(q + k3q * h));
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
        let r = p.norm();
        min_radius = min_radius.min(r);
        drift = drift.max((p.cross(&q).norm() - l0).abs() / l0);
        if r > top && p.dot(&q) > 0.0 {
            break;
        }
    }
    let exit_dir = q.normalize();
    let d0 = dir.normalize();
    let alpha = d0.cross(&exit_dir).norm().atan2(d0.dot(&exit_dir));
    OracleRay {
        alpha,
        bouguer_drift: drift,
        min_radius,
        exit_pos: p,
        exit_dir,
    }
}

/// Distance from `target` to the straight continuation of an exited ray.
pub fn miss_distance(ray: &OracleRay, target: &EcefVec) -> f64 {
    let d = target - ray.exit_pos;
    (d - ray.exit_dir * d.dot(&ray.exit_dir)).norm()
}
