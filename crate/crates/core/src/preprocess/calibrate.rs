use crate::error::{Error, Result};
use crate::preprocess::{ExcessPhaseSeries, SampleFlag, Stage};

/// Index of the candidate with the highest mean elevation, provided it is
/// at least `min_elevation` (rad).
pub fn choose_reference(candidates: &[ExcessPhaseSeries], min_elevation: f64) -> Result<usize> {
    let mean_el = |s: &ExcessPhaseSeries| {
        let el: Vec<f64> = s
            .usable()
            .map(|x| x.elevation)
            .filter(|e| e.is_finite())
            .collect();
        if el.is_empty() {
            f64::NEG_INFINITY
        } else {
            el.iter().sum::<f64>() / el.len() as f64
        }
    };
    candidates
        .iter()
        .enumerate()
        .map(|(i, s)| (i, mean_el(s)))
        .filter(|&(_, m)| m >= min_elevation)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or(Error::NoReference {
            min_elevation_deg: min_elevation.to_degrees(),
        })
}

/// Subtracts the reference arc sample by sample (epochs matched within
/// `tolerance` seconds). The difference is re-zeroed at the occulting arc's
/// highest-elevation epoch so its ambiguity convention is unchanged.
pub fn calibrate_clock(
    occ: &ExcessPhaseSeries,
    reference: &ExcessPhaseSeries,
    tolerance: f64,
) -> Result<ExcessPhaseSeries> {
    occ.require(Stage::Raw)?;
    reference.require(Stage::Raw)?;
    let refs = &reference.samples;
    let mut out = occ.clone();
    for s in out.samples.iter_mut() {
        let idx = refs.partition_point(|r| r.t.seconds_since(&s.t) < 0.0);
        let matched = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|i| refs.get(i))
            .filter(|r| r.t.seconds_since(&s.t).abs() <= tolerance)
            .min_by(|a, b| {
                a.t.seconds_since(&s.t)
                    .abs()
                    .total_cmp(&b.t.seconds_since(&s.t).abs())
            });
        match matched {
            Some(r) if r.is_usable() && s.is_usable() => s.excess_phase -= r.excess_phase,
            _ => {
                s.excess_phase = f64::NAN;
                s.flag = SampleFlag::Gap;
            }
        }
    }
    let Some(k) = out.anchor_index() else {
        return Err(Error::NoOverlap(format!(
            "{} and reference {} share no usable epoch",
            occ.sat, reference.sat
        )));
    };
    let c = out.samples[k].excess_phase;
    if c != 0.0 {
        for s in out.samples.iter_mut().filter(|s| s.is_usable()) {
            s.excess_phase -= c;
        }
    }
    out.reference_sat = Some(reference.sat);
    out.stage = Stage::Calibrated;
    Ok(out)
}
