//! Geometric-optics propagation through a spherically symmetric atmosphere.
//!
//! Bending and optical path are evaluated as impact-parameter integrals in
//! the refractional radius x = n r. The square-root singularity at the
//! tangent point is removed with the substitution x = a cosh u.

mod connection;
pub mod scenario;
mod simulate;

pub use connection::{solve_connection, RayResult};
pub use simulate::{simulate_occultation, SimEpoch, SimSeries, SimStatus};

use crate::atmosphere::AtmosphereModel;
use crate::error::{Error, Result};
use crate::quadrature::integrate;

const REL_TOL: f64 = 1e-12;
const ABS_TOL: f64 = 1e-16;

/// u such that x = a cosh u, accurate for x close to a.
fn u_of(a: f64, x: f64) -> f64 {
    let s = ((x - a) * (x + a)).max(0.0).sqrt();
    ((x + s) / a).ln()
}

/// d ln n / dx at refractional radius x, or NaN where x(r) is not invertible.
fn dlnn_dx(model: &AtmosphereModel, x: f64) -> f64 {
    match model.radius_from_refractional(x) {
        Ok(r) => {
            let (n, dn) = model.eval(r);
            let slope = n + r * dn;
            if slope > 0.0 {
                dn / n / slope
            } else {
                f64::NAN
            }
        }
        Err(_) => f64::NAN,
    }
}

/// Refractional radius above which the model is vacuum.
fn x_top(model: &AtmosphereModel) -> f64 {
    model.refractional_radius(model.top_radius())
}

/// Integrals over `[x_lo, x_hi]` for a ray with impact parameter `a`:
/// the one-sided bending and the path correction `int sqrt(x^2-a^2) dln n/dx dx`.
pub(crate) fn segment_integrals(
    model: &AtmosphereModel,
    a: f64,
    x_lo: f64,
    x_hi: f64,
) -> Result<(f64, f64)> {
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!(
            "impact parameter must be positive, got {a}"
        )));
    }
    if model.is_vacuum() {
        return Ok((0.0, 0.0));
    }
    let lo = x_lo.max(a);
    let hi = x_hi.min(x_top(model));
    if !(hi > lo) {
        return Ok((0.0, 0.0));
    }
    let r_hi = model.radius_from_refractional(hi).unwrap_or(hi);
    // no radius maps to `lo` when it falls in a super-refractive shadow
    let r_lo = model
        .radius_from_refractional(lo)
        .map_err(|_| Error::SuperRefraction {
            r_lo: model.surface_radius(),
            r_hi,
        })?
        .min(r_hi);
    model.check_monotone(r_lo, r_hi)?;
    let mut breaks = vec![u_of(a, lo)];
    for &rb in model.boundaries() {
        let xb = model.refractional_radius(rb);
        if xb > lo && xb < hi {
            breaks.push(u_of(a, xb));
        }
    }
    breaks.push(u_of(a, hi));
    breaks.sort_by(f64::total_cmp);

    let f = |u: f64| {
        let (sh, ch) = (u.sinh(), u.cosh());
        let g = dlnn_dx(model, a * ch);
        [-a * g, a * a * sh * sh * g]
    };
    let (mut bend, mut path) = (0.0, 0.0);
    for w in breaks.windows(2) {
        let ([b, p], _) = integrate(&f, w[0], w[1], REL_TOL, ABS_TOL);
        bend += b;
        path += p;
    }
    if !(bend.is_finite() && path.is_finite()) {
        return Err(Error::SuperRefraction { r_lo, r_hi });
    }
    Ok((bend, path))
}

/// One-sided bending accumulated between refractional radii `x_lo` and
/// `x_hi` by a ray of impact parameter `a`; the part below `a` is empty.
pub fn bending_partial(model: &AtmosphereModel, a: f64, x_lo: f64, x_hi: f64) -> Result<f64> {
    segment_integrals(model, a, x_lo, x_hi).map(|(b, _)| b)
}

/// Optical path along a ray of impact parameter `a` between refractional
/// radii `x_lo` and `x_hi` on one side of its tangent point.
pub fn optical_path_segment(model: &AtmosphereModel, a: f64, x_lo: f64, x_hi: f64) -> Result<f64> {
    let (bend, path) = segment_integrals(model, a, x_lo, x_hi)?;
    let chord = |x: f64| ((x - a) * (x + a)).max(0.0).sqrt();
    Ok(chord(x_hi) - chord(x_lo.max(a)) + a * bend - path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const R0: f64 = 6_371_000.0;

    fn exp_model() -> AtmosphereModel {
        AtmosphereModel::exponential(300.0, 7000.0, R0).unwrap()
    }

    // composite trapezoid in u on a uniform grid
    fn trapezoid(model: &AtmosphereModel, a: f64, x_hi: f64, m: usize) -> f64 {
        let u_hi = u_of(a, x_hi);
        let h = u_hi / m as f64;
        let mut s = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            s += w * -a * dlnn_dx(model, a * (k as f64 * h).cosh());
        }
        s * h
    }

    #[test]
    fn vacuum_and_empty_interval() {
        let vac = AtmosphereModel::vacuum();
        assert_eq!(bending_partial(&vac, R0, R0, 2.0 * R0).unwrap(), 0.0);
        let m = exp_model();
        let x = m.refractional_radius(R0 + 5000.0);
        assert_eq!(bending_partial(&m, R0, x, x).unwrap(), 0.0);
    }

    #[test]
    fn matches_richardson_trapezoid() {
        let m = exp_model();
        let a = m.refractional_radius(R0 + 3000.0);
        let x_hi = m.refractional_radius(R0 + 18_000.0);
        let t1 = trapezoid(&m, a, x_hi, 2000);
        let t2 = trapezoid(&m, a, x_hi, 4000);
        let oracle = (4.0 * t2 - t1) / 3.0;
        let got = bending_partial(&m, a, a, x_hi).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn surface_bending_asymptotic() {
        // the thin-atmosphere asymptote ignores dx/dr < 1, so compare on a
        // weak gradient where that factor is near one
        let m = AtmosphereModel::exponential(30.0, 7000.0, R0).unwrap();
        let a = m.refractional_radius(R0);
        let total = 2.0 * bending_partial(&m, a, a, 4.0 * R0).unwrap();
        let approx = 1e-6 * 30.0 * (2.0 * std::f64::consts::PI * R0 / 7000.0).sqrt();
        assert!(
            ((total - approx) / approx).abs() < 0.03,
            "{total} vs {approx}"
        );
    }

    #[test]
    fn full_span_matches_richardson_trapezoid() {
        let m = exp_model();
        let a = m.refractional_radius(R0);
        let x_hi = m.refractional_radius(m.top_radius());
        let t1 = trapezoid(&m, a, x_hi, 4000);
        let t2 = trapezoid(&m, a, x_hi, 8000);
        let oracle = (4.0 * t2 - t1) / 3.0;
        let got = bending_partial(&m, a, a, 4.0 * R0).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
        // strong gradient: surface bending of order 2e-2 rad
        assert!(2.0 * got > 0.02 && 2.0 * got < 0.03);
    }

    #[test]
    fn layer_boundaries_do_not_spoil_accuracy() {
        let r: Vec<f64> = (0..=40).map(|k| R0 + 1000.0 * k as f64).collect();
        let n = r
            .iter()
            .map(|&r| 300.0 * (-(r - R0) / 7000.0).exp())
            .collect();
        let lay = AtmosphereModel::layered(r, n).unwrap();
        let exp = exp_model();
        let a = exp.refractional_radius(R0 + 2500.0);
        let b_lay = bending_partial(&lay, a, a, 2.0 * R0).unwrap();
        let b_exp = bending_partial(&exp, a, a, 2.0 * R0).unwrap();
        assert!(((b_lay - b_exp) / b_exp).abs() < 1e-6);
    }

    #[test]
    fn vacuum_optical_path_is_chord() {
        let vac = AtmosphereModel::vacuum();
        let a = R0;
        let p = optical_path_segment(&vac, a, a, 2.0 * R0).unwrap();
        assert!((p - (3.0f64).sqrt() * R0).abs() < 1e-6);
    }

    #[test]
    fn super_refraction_is_reported() {
        // x = n r decreases through the bottom kilometre, so impact
        // parameters below its minimum have no tangent point
        let r = vec![R0, R0 + 1000.0, R0 + 2000.0, R0 + 3000.0];
        let n = vec![3000.0, 1000.0, 900.0, 800.0];
        let m = AtmosphereModel::layered(r, n).unwrap();
        let a = m.refractional_radius(R0 + 1000.0) - 300.0;
        assert!(matches!(
            bending_partial(&m, a, a, 2.0 * R0),
            Err(Error::SuperRefraction { .. })
        ));
    }
}
