use crate::error::{Error, Result};
use crate::frames::EcefVec;
use crate::geometry::SatState;
use crate::ingest::SatEphemeris;
use crate::time::Epoch;

/// Polynomial order of the orbit interpolator (order + 1 nodes).
pub const LAGRANGE_ORDER: usize = 10;

/// Lagrange interpolation of order [`LAGRANGE_ORDER`] on the nodes centred
/// on `t`. Velocity is the exact derivative of the same polynomial.
pub fn interpolate_sat_state(table: &SatEphemeris, t: Epoch) -> Result<SatState> {
    let n = table.samples.len();
    let nodes = LAGRANGE_ORDER + 1;
    if n < nodes {
        return Err(Error::InvalidInput(format!(
            "{} has {n} ephemeris samples; interpolation needs {nodes}",
            table.sat
        )));
    }
    let first = table.samples[0].t;
    let last = table.samples[n - 1].t;
    let x = t.seconds_since(&first);
    let span = last.seconds_since(&first);
    if !(0.0..=span).contains(&x) {
        return Err(Error::OutOfSpan {
            t: t.to_string(),
            start: first.to_string(),
            end: last.to_string(),
        });
    }

    let idx = table
        .samples
        .partition_point(|s| s.t.seconds_since(&t) <= 0.0);
    let start = idx.saturating_sub(nodes / 2).min(n - nodes);
    let window = &table.samples[start..start + nodes];
    let ts: Vec<f64> = window.iter().map(|s| s.t.seconds_since(&first)).collect();

    let mut pos = EcefVec::zeros();
    let mut vel = EcefVec::zeros();
    for j in 0..nodes {
        let mut basis = 1.0;
        for k in 0..nodes {
            if k != j {
                basis *= (x - ts[k]) / (ts[j] - ts[k]);
            }
        }
        let mut deriv = 0.0;
        for m in 0..nodes {
            if m == j {
                continue;
            }
            let mut term = 1.0 / (ts[j] - ts[m]);
            for k in 0..nodes {
                if k != j && k != m {
                    term *= (x - ts[k]) / (ts[j] - ts[k]);
                }
            }
            deriv += term;
        }
        pos += window[j].pos * basis;
        vel += window[j].pos * deriv;
    }
    Ok(SatState { pos, vel })
}
