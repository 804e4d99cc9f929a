use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{ExcessPhaseSeries, SampleFlag, Stage};
use crate::time::Epoch;

const MIN_SAMPLES: usize = 20;
/// Converts a median absolute deviation to a Gaussian standard deviation.
const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipConfig {
    /// Detection threshold in robust standard deviations of the residual steps.
    pub mad_factor: f64,
    /// Threshold floor in carrier cycles.
    pub min_jump_cycles: f64,
    pub max_passes: usize,
    /// Running-median window (samples) for the step baseline.
    pub median_window: usize,
}

impl Default for SlipConfig {
    fn default() -> Self {
        SlipConfig {
            mad_factor: 6.0,
            min_jump_cycles: 0.5,
            max_passes: 5,
            median_window: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipEntry {
    /// Epoch of the first sample after the discontinuity.
    pub t: Epoch,
    /// Detected step (m).
    pub jump_m: f64,
    /// Whole cycles added to every later sample; never zero.
    pub corrected_cycles: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlipReport {
    pub entries: Vec<SlipEntry>,
    /// Passes in which the exponential trend failed and a quadratic was used.
    pub quadratic_fallbacks: usize,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn running_median(v: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            median(&mut v[lo..hi].to_vec())
        })
        .collect()
}

/// Least-squares A + B exp(C tau) for fixed C; returns (A, B, sse).
fn linear_part(tau: &[f64], y: &[f64], c: f64) -> Option<(f64, f64, f64)> {
    let n = tau.len() as f64;
    let e: Vec<f64> = tau.iter().map(|&t| (c * t).exp()).collect();
    let (em, ym) = (e.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let see: f64 = e.iter().map(|v| (v - em).powi(2)).sum();
    if !(see > 1e-12 * n * em * em) {
        return None;
    }
    let b = e
        .iter()
        .zip(y)
        .map(|(ei, yi)| (ei - em) * (yi - ym))
        .sum::<f64>()
        / see;
    let a = ym - b * em;
    let sse = e
        .iter()
        .zip(y)
        .map(|(ei, yi)| (yi - a - b * ei).powi(2))
        .sum::<f64>();
    Some((a, b, sse)).filter(|v| v.0.is_finite() && v.1.is_finite() && v.2.is_finite())
}

/// Exponential trend by separable least squares: scan the rate, then
/// refine it by golden section with the linear coefficients solved exactly.
fn exponential_trend(tau: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let sse = |c: f64| linear_part(tau, y, c).map_or(f64::INFINITY, |v| v.2);
    let grid: Vec<f64> = (-120..=120)
        .map(|k| 0.25 * k as f64)
        .filter(|c| *c != 0.0)
        .collect();
    let (i_best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, sse(c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    // an optimum on the scan boundary means the rate is not identified
    if i_best == 0 || i_best == grid.len() - 1 {
        return None;
    }
    let (mut lo, mut hi) = (grid[i_best - 1], grid[i_best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c1, c2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if sse(c1) < sse(c2) {
            hi = c2;
        } else {
            lo = c1;
        }
    }
    let c = 0.5 * (lo + hi);
    let (a, b, _) = linear_part(tau, y, c)?;
    Some(tau.iter().map(|&t| a + b * (c * t).exp()).collect())
}

fn quadratic_trend(tau: &[f64], y: &[f64]) -> Vec<f64> {
    let mut m = Matrix3::zeros();
    let mut r = Vector3::zeros();
    for (&t, &v) in tau.iter().zip(y) {
        let b = Vector3::new(1.0, t, t * t);
        m += b * b.transpose();
        r += b * v;
    }
    let coef = m
        .lu()
        .solve(&r)
        .unwrap_or_else(|| Vector3::new(y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0));
    tau.iter()
        .map(|&t| coef[0] + coef[1] * t + coef[2] * t * t)
        .collect()
}

/// Detects and repairs integer-cycle discontinuities.
///
/// Each pass fits a smooth trend, differences the residual, removes a
/// running-median baseline from the steps and flags steps above
/// `max(mad_factor * sigma, min_jump_cycles * wavelength)`. Every flagged
/// step is removed by the nearest whole number of cycles from all later
/// samples.
pub fn correct_cycle_slips(
    s: &ExcessPhaseSeries,
    cfg: &SlipConfig,
) -> Result<(ExcessPhaseSeries, SlipReport)> {
    s.require(Stage::Calibrated)?;
    let mut out = s.clone();
    let report = repair(&mut out, cfg)?;
    out.stage = Stage::SlipCorrected;
    Ok((out, report))
}

fn repair(s: &mut ExcessPhaseSeries, cfg: &SlipConfig) -> Result<SlipReport> {
    let idx: Vec<usize> = (0..s.samples.len())
        .filter(|&i| s.samples[i].is_usable())
        .collect();
    if idx.len() < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "cycle-slip repair needs at least {MIN_SAMPLES} usable samples, got {}",
            idx.len()
        )));
    }
    let lambda = s.wavelength;
    let t_all = s.rel_times();
    let (t0, span) = (t_all[idx[0]], t_all[idx[idx.len() - 1]] - t_all[idx[0]]);
    let tau: Vec<f64> = idx
        .iter()
        .map(|&i| (t_all[i] - t0) / span.max(1e-9))
        .collect();
    let mut report = SlipReport::default();

    for _ in 0..cfg.max_passes {
        let y: Vec<f64> = idx.iter().map(|&i| s.samples[i].excess_phase).collect();
        let trend = exponential_trend(&tau, &y).unwrap_or_else(|| {
            log::warn!("{}: exponential trend fit failed, using a quadratic", s.sat);
            report.quadratic_fallbacks += 1;
            quadratic_trend(&tau, &y)
        });
        let res: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
        let steps: Vec<f64> = res.windows(2).map(|w| w[1] - w[0]).collect();
        let base = running_median(&steps, cfg.median_window.max(1));
        let dd: Vec<f64> = steps.iter().zip(&base).map(|(a, b)| a - b).collect();
        let centre = median(&mut dd.clone());
        let mad = median(&mut dd.iter().map(|v| (v - centre).abs()).collect::<Vec<_>>());
        let threshold = (cfg.mad_factor * MAD_TO_SIGMA * mad).max(cfg.min_jump_cycles * lambda);

        let mut found = false;
        for (k, &jump) in dd.iter().enumerate() {
            if jump.abs() <= threshold {
                continue;
            }
            let n = (jump / lambda).round() as i64;
            if n == 0 {
                continue;
            }
            found = true;
            let shift = n as f64 * lambda;
            for &i in &idx[k + 1..] {
                s.samples[i].excess_phase -= shift;
            }
            let first = &mut s.samples[idx[k + 1]];
            first.flag = SampleFlag::SlipCorrected;
            report.entries.push(SlipEntry {
                t: first.t,
                jump_m: jump,
                corrected_cycles: -n,
            });
        }
        if !found {
            break;
        }
    }
    report
        .entries
        .sort_by(|a, b| a.t.seconds_since(&b.t).total_cmp(&0.0));
    Ok(report)
}
