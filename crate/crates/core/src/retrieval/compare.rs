use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::RefractivityProfile;

/// Percentage differences of a retrieval against a reference within one
/// height band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    /// Band bounds above the surface (m); a level at `hi` belongs to the next band.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_pct: f64,
    pub rms_pct: f64,
}

/// Compares `retrieved` with `reference` at the retrieved levels, binned
/// by height above `surface_radius`. Levels outside the reference span or
/// with zero reference refractivity are skipped. Bands with no levels
/// report NaN statistics.
pub fn compare_refractivity(
    retrieved: &RefractivityProfile,
    reference: &RefractivityProfile,
    surface_radius: f64,
    bands: &[(f64, f64)],
) -> Result<Vec<BandStats>> {
    if let Some(b) = bands.iter().find(|(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidInput(format!("empty height band {b:?}")));
    }
    let diffs: Vec<(f64, f64)> = retrieved
        .r
        .iter()
        .zip(&retrieved.n_units)
        .filter_map(|(&r, &n)| {
            let truth = reference.interpolate(r).filter(|t| *t != 0.0)?;
            Some((r - surface_radius, 100.0 * (n - truth) / truth))
        })
        .collect();
    if diffs.is_empty() {
        return Err(Error::NoOverlap(
            "retrieved and reference profiles share no levels".into(),
        ));
    }
    Ok(bands
        .iter()
        .map(|&(lo, hi)| {
            let d: Vec<f64> = diffs
                .iter()
                .filter(|(h, _)| *h >= lo && *h < hi)
                .map(|x| x.1)
                .collect();
            let n = d.len() as f64;
            BandStats {
                lo,
                hi,
                count: d.len(),
                mean_pct: d.iter().sum::<f64>() / n,
                rms_pct: (d.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            }
        })
        .collect())
}
