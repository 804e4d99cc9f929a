use crate::atmosphere::AtmosphereModel;
use crate::error::{Error, Result};
use crate::raytracer::bending_partial;
use crate::retrieval::{BendingAngleProfile, BendingQuality, RefractivityProfile};

/// Bending seen by a receiver at radius `r_r` for each impact parameter in
/// `a_grid`: the part below the receiver is crossed twice, the part above
/// once.
pub fn forward_bending(
    model: &AtmosphereModel,
    r_r: f64,
    a_grid: &[f64],
) -> Result<BendingAngleProfile> {
    let x_r = model.refractional_radius(r_r);
    if let Some(w) = a_grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "impact parameters not ascending at {}",
            w[1]
        )));
    }
    if let Some(a) = a_grid.iter().find(|&&a| !(a > 0.0 && a < x_r)) {
        return Err(Error::InvalidInput(format!(
            "impact parameter {a} outside (0, {x_r}) below the receiver"
        )));
    }
    let alpha = a_grid
        .iter()
        .map(|&a| {
            Ok(2.0 * bending_partial(model, a, a, x_r)?
                + bending_partial(model, a, x_r, f64::INFINITY)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BendingAngleProfile {
        a: a_grid.to_vec(),
        alpha,
        t: vec![None; a_grid.len()],
        quality: vec![BendingQuality::Ok; a_grid.len()],
        receiver_radius: r_r,
        n_r: model.eval(r_r).0,
        failed: 0,
        config_hash: String::new(),
    })
}

/// acosh(a / a1) for a >= a1, accurate near a1.
fn acosh_ratio(a: f64, a1: f64) -> f64 {
    let s = ((a - a1) * (a + a1)).max(0.0).sqrt();
    ((a + s) / a1).ln()
}

/// Refractivity below a receiver at `r_r` (index `n_r`) from its partial
/// bending profile.
///
/// The one-sided contribution of `topside` above the receiver is removed
/// first; the remainder is the doubled bending below the receiver, which
/// the finite-limit Abel transform maps to ln n(a) - ln n_r. The bending is
/// taken as piecewise linear in `a`, so each segment integrates in closed
/// form, and it vanishes at the receiver's refractional radius.
pub fn abel_invert_partial(
    profile: &BendingAngleProfile,
    r_r: f64,
    n_r: f64,
    topside: Option<&AtmosphereModel>,
) -> Result<RefractivityProfile> {
    profile.validate()?;
    if !(r_r > 0.0 && n_r >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "receiver radius {r_r} and index {n_r} are not physical"
        )));
    }
    let x_r = n_r * r_r;
    if topside.is_none() && n_r > 1.0 {
        return Err(Error::InvalidInput(
            "receiver is inside the atmosphere: a topside model is required".into(),
        ));
    }
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(profile.len() + 1);
    for (a, alpha) in profile.usable().filter(|&(a, _)| a < x_r) {
        let above = match topside {
            Some(m) => bending_partial(m, a, x_r, f64::INFINITY)?,
            None => 0.0,
        };
        nodes.push((a, alpha - above));
    }
    if nodes.is_empty() {
        return Err(Error::InvalidInput(
            "no usable bending samples below the receiver".into(),
        ));
    }
    nodes.push((x_r, 0.0));

    let mut r = Vec::with_capacity(nodes.len() - 1);
    let mut n_units = Vec::with_capacity(nodes.len() - 1);
    for j in 0..nodes.len() - 1 {
        let a1 = nodes[j].0;
        let mut integral = 0.0;
        for w in nodes[j..].windows(2) {
            let ((a0, f0), (a2, f2)) = (w[0], w[1]);
            let slope = (f2 - f0) / (a2 - a0);
            let c0 = f0 - slope * a0;
            let root = |a: f64| ((a - a1) * (a + a1)).max(0.0).sqrt();
            integral +=
                c0 * (acosh_ratio(a2, a1) - acosh_ratio(a0, a1)) + slope * (root(a2) - root(a0));
        }
        let n = n_r * (integral / std::f64::consts::PI).exp();
        r.push(a1 / n);
        n_units.push((n - 1.0) * 1e6);
    }
    if let Some(w) = r.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::SuperRefraction {
            r_lo: w[1],
            r_hi: w[0],
        });
    }
    Ok(RefractivityProfile {
        r,
        n_units,
        receiver_radius: r_r,
        n_r,
        topside: topside.map_or_else(|| "none".to_string(), AtmosphereModel::describe),
        config_hash: profile.config_hash.clone(),
    })
}
