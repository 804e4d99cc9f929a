use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{ExcessPhaseSeries, SampleFlag, Stage};

const JITTERS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprConfig {
    /// Squared-exponential length scale (s).
    pub length_scale: f64,
    /// Prior signal standard deviation (m); estimated from the detrended
    /// input when absent.
    pub signal_sigma: Option<f64>,
    /// White-noise standard deviation (m); 0.003 carrier wavelengths when absent.
    pub noise_sigma: Option<f64>,
    /// Samples per chunk.
    pub chunk: usize,
    /// Samples shared by consecutive chunks.
    pub overlap: usize,
}

impl Default for GprConfig {
    fn default() -> Self {
        GprConfig {
            length_scale: 5.0,
            signal_sigma: None,
            noise_sigma: None,
            chunk: 512,
            overlap: 64,
        }
    }
}

impl GprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "length_scale must be positive, got {}",
                self.length_scale
            )));
        }
        if self.chunk <= 2 * self.overlap {
            return Err(Error::InvalidInput(format!(
                "chunk ({}) must exceed twice the overlap ({})",
                self.chunk, self.overlap
            )));
        }
        for (name, v) in [
            ("signal_sigma", self.signal_sigma),
            ("noise_sigma", self.noise_sigma),
        ] {
            if let Some(v) = v.filter(|v| !(*v > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Least-squares quadratic in scaled time; returns value and derivative
/// evaluators.
struct Quadratic {
    coef: Vector3<f64>,
    t0: f64,
    scale: f64,
}

impl Quadratic {
    fn fit(t: &[f64], y: &[f64]) -> Self {
        let t0 = t.iter().sum::<f64>() / t.len() as f64;
        let scale = t
            .iter()
            .map(|v| (v - t0).abs())
            .fold(0.0, f64::max)
            .max(1.0);
        let mut m = Matrix3::zeros();
        let mut r = Vector3::zeros();
        for (&ti, &yi) in t.iter().zip(y) {
            let u = (ti - t0) / scale;
            let b = Vector3::new(1.0, u, u * u);
            m += b * b.transpose();
            r += b * yi;
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let coef = m.lu().solve(&r).unwrap_or(Vector3::new(mean, 0.0, 0.0));
        Quadratic { coef, t0, scale }
    }

    fn value(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.scale;
        self.coef[0] + self.coef[1] * u + self.coef[2] * u * u
    }

    fn slope(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.scale;
        (self.coef[1] + 2.0 * self.coef[2] * u) / self.scale
    }
}

struct Kernel {
    ell: f64,
    sf2: f64,
    sn2: f64,
}

impl Kernel {
    fn k(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.ell;
        self.sf2 * (-0.5 * d * d).exp()
    }
}

struct Posterior {
    mean: Vec<f64>,
    deriv: Vec<f64>,
    sigma: Vec<f64>,
}

/// Posterior of the latent signal at `t_pred` given observations `(t, z)`.
fn posterior(kern: &Kernel, t: &[f64], z: &[f64], t_pred: &[f64]) -> Result<Posterior> {
    let (m, p) = (t.len(), t_pred.len());
    if m == 0 {
        return Ok(Posterior {
            mean: vec![0.0; p],
            deriv: vec![0.0; p],
            sigma: vec![kern.sf2.sqrt(); p],
        });
    }
    let base = DMatrix::from_fn(m, m, |i, j| {
        kern.k(t[i], t[j]) + if i == j { kern.sn2 } else { 0.0 }
    });
    let chol: Cholesky<f64, Dyn> = JITTERS
        .iter()
        .find_map(|&j| {
            let mut k = base.clone();
            for i in 0..m {
                k[(i, i)] += j * (kern.sf2 + kern.sn2);
            }
            Cholesky::new(k)
        })
        .ok_or(Error::NotPositiveDefinite)?;
    let alpha = chol.solve(&DVector::from_column_slice(z));
    let ks = DMatrix::from_fn(m, p, |j, i| kern.k(t_pred[i], t[j]));
    let ell2 = kern.ell * kern.ell;
    let mut mean = vec![0.0; p];
    let mut deriv = vec![0.0; p];
    for i in 0..p {
        for j in 0..m {
            let kij = ks[(j, i)];
            mean[i] += kij * alpha[j];
            deriv[i] -= (t_pred[i] - t[j]) / ell2 * kij * alpha[j];
        }
    }
    let v = chol
        .l()
        .solve_lower_triangular(&ks)
        .ok_or(Error::NotPositiveDefinite)?;
    let sigma = (0..p)
        .map(|i| (kern.sf2 - v.column(i).norm_squared()).max(0.0).sqrt())
        .collect();
    Ok(Posterior { mean, deriv, sigma })
}

/// Chunk boundaries `[start, end)` covering `n` samples; the last chunk is
/// pulled back to full length when the series allows it.
fn chunks(n: usize, chunk: usize, overlap: usize) -> Vec<(usize, usize)> {
    if n <= chunk {
        return vec![(0, n)];
    }
    let stride = chunk - overlap;
    let mut out = Vec::new();
    let mut s = 0;
    loop {
        if s + chunk >= n {
            out.push((n - chunk, n));
            break;
        }
        out.push((s, s + chunk));
        s += stride;
    }
    out
}

/// Replaces the excess phase with a Gaussian-process posterior mean and
/// fills the excess Doppler from the posterior mean derivative.
///
/// A global quadratic is removed first; the residual is modelled with a
/// squared-exponential kernel plus white noise, solved in overlapping
/// chunks that are cross-faded over the central half of each overlap.
pub fn gpr_smooth(s: &ExcessPhaseSeries, cfg: &GprConfig) -> Result<ExcessPhaseSeries> {
    s.require(Stage::SlipCorrected)?;
    cfg.validate()?;
    let t = s.rel_times();
    let idx: Vec<usize> = (0..s.samples.len())
        .filter(|&i| s.samples[i].is_usable())
        .collect();
    if idx.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "smoothing needs at least 3 usable samples, got {}",
            idx.len()
        )));
    }
    let tu: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let yu: Vec<f64> = idx.iter().map(|&i| s.samples[i].excess_phase).collect();
    let trend = Quadratic::fit(&tu, &yu);
    let mut z = vec![f64::NAN; t.len()];
    for (&i, &y) in idx.iter().zip(&yu) {
        z[i] = y - trend.value(t[i]);
    }

    let sn = cfg.noise_sigma.unwrap_or(0.003 * s.wavelength);
    let sf = cfg.signal_sigma.unwrap_or_else(|| {
        let zu: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
        let mean = zu.iter().sum::<f64>() / zu.len() as f64;
        let var = zu.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / zu.len() as f64;
        (var - sn * sn).max((0.1 * sn).powi(2)).sqrt()
    });
    let kern = Kernel {
        ell: cfg.length_scale,
        sf2: sf * sf,
        sn2: sn * sn,
    };

    let n = t.len();
    let mut mean = vec![0.0; n];
    let mut deriv = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    let mut prev_end = 0;
    for (c, &(lo, hi)) in chunks(n, cfg.chunk, cfg.overlap).iter().enumerate() {
        let train: Vec<usize> = (lo..hi).filter(|&i| z[i].is_finite()).collect();
        let tt: Vec<f64> = train.iter().map(|&i| t[i]).collect();
        let zz: Vec<f64> = train.iter().map(|&i| z[i]).collect();
        let post = posterior(&kern, &tt, &zz, &t[lo..hi])?;
        // fade from the previous chunk to this one across the central half of the overlap
        let (r0, r1) = if c == 0 {
            (lo, lo)
        } else {
            let q = (prev_end - lo) / 4;
            (lo + q, prev_end - q - 1)
        };
        let (ta, tb) = (t[r0], t[r1.max(r0)]);
        for i in lo..hi {
            let k = i - lo;
            let (w, dw) = if c == 0 || i >= prev_end || t[i] >= tb {
                (1.0, 0.0)
            } else if t[i] <= ta {
                (0.0, 0.0)
            } else {
                ((t[i] - ta) / (tb - ta), 1.0 / (tb - ta))
            };
            deriv[i] = (1.0 - w) * deriv[i] + w * post.deriv[k] + dw * (post.mean[k] - mean[i]);
            mean[i] = (1.0 - w) * mean[i] + w * post.mean[k];
            sigma[i] = (1.0 - w) * sigma[i] + w * post.sigma[k];
        }
        prev_end = hi;
    }

    let mut out = s.clone();
    for (i, smp) in out.samples.iter_mut().enumerate() {
        smp.excess_phase = mean[i] + trend.value(t[i]);
        smp.excess_doppler = Some(deriv[i] + trend.slope(t[i]));
        smp.posterior_sigma = Some(sigma[i]);
        if smp.flag == SampleFlag::Gap {
            smp.flag = SampleFlag::Interpolated;
        }
    }
    out.stage = Stage::Smoothed;
    Ok(out)
}
