//! Spherically symmetric refractivity models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// Refractivity below which the atmosphere is treated as vacuum (N-units).
/// At this level n - 1 is under 1e-15, beneath double precision resolution.
const VACUUM_N: f64 = 1e-9;

/// One reanalysis-style pressure level at a geometric height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetLevel {
    /// Pressure (hPa).
    pub p: f64,
    /// Temperature (K).
    pub t: f64,
    /// Water-vapour partial pressure (hPa).
    pub e: f64,
    /// Geometric height (m).
    pub z: f64,
}

impl MetLevel {
    pub fn new(p: f64, t: f64, e: f64, z: f64) -> Result<Self> {
        if !(p > 0.0) || !(t > 0.0) || !(e >= 0.0 && e < p) || !z.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid met level p={p} T={t} e={e} z={z}"
            )));
        }
        Ok(MetLevel { p, t, e, z })
    }
}

/// Two-term Smith-Weintraub refractivity (N-units).
pub fn refractivity_smith_weintraub(level: &MetLevel) -> f64 {
    77.6 * level.p / level.t + 3.73e5 * level.e / (level.t * level.t)
}

/// Refractivity as a function of geocentric radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AtmosphereModel {
    Exponential {
        /// Refractivity at `r0` (N-units).
        n0: f64,
        /// Scale height (m).
        h: f64,
        /// Reference radius (m).
        r0: f64,
    },
    Layered(LayeredProfile),
}

/// Levels with ln N interpolated linearly in radius and an exponential
/// topside continued with the scale height of the top two levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredProfile {
    r: Vec<f64>,
    n: Vec<f64>,
    top_scale_height: f64,
}

impl LayeredProfile {
    pub fn new(r: Vec<f64>, n: Vec<f64>) -> Result<Self> {
        if r.len() != n.len() {
            return Err(Error::InvalidInput(
                "radius and refractivity lengths differ".into(),
            ));
        }
        if r.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "layered profile needs at least 4 levels, got {}",
                r.len()
            )));
        }
        if let Some(k) = r.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "level radii not strictly ascending at index {}",
                k + 1
            )));
        }
        if n.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "refractivity must be finite and non-negative".into(),
            ));
        }
        let k = r.len() - 1;
        let (n_prev, n_top) = (n[k - 1], n[k]);
        let top_scale_height = if n_top == 0.0 {
            f64::INFINITY
        } else if n_prev > n_top {
            (r[k] - r[k - 1]) / (n_prev / n_top).ln()
        } else {
            return Err(Error::InvalidInput(
                "refractivity must decrease across the top two levels".into(),
            ));
        };
        Ok(LayeredProfile {
            r,
            n,
            top_scale_height,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn refractivity(&self) -> &[f64] {
        &self.n
    }

    pub fn top_scale_height(&self) -> f64 {
        self.top_scale_height
    }

    fn eval_n(&self, r: f64) -> (f64, f64) {
        let k = self.r.len() - 1;
        if r >= self.r[k] {
            let n_top = self.n[k];
            if n_top == 0.0 {
                return (0.0, 0.0);
            }
            let v = n_top * (-(r - self.r[k]) / self.top_scale_height).exp();
            return (v, -v / self.top_scale_height);
        }
        // segment index; radii below the bottom level extrapolate the first segment
        let i = self
            .r
            .partition_point(|&ri| ri <= r)
            .saturating_sub(1)
            .min(k - 1);
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let (n0, n1) = (self.n[i], self.n[i + 1]);
        if n0 > 0.0 && n1 > 0.0 {
            let slope = (n1 / n0).ln() / (r1 - r0);
            let v = n0 * (slope * (r - r0)).exp();
            (v, v * slope)
        } else {
            let slope = (n1 - n0) / (r1 - r0);
            ((n0 + slope * (r - r0)).max(0.0), slope)
        }
    }
}

impl AtmosphereModel {
    pub fn exponential(n0: f64, h: f64, r0: f64) -> Result<Self> {
        if !(n0 >= 0.0 && n0.is_finite()) || !(h > 0.0) || !(r0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid exponential model N0={n0} H={h} r0={r0}"
            )));
        }
        Ok(AtmosphereModel::Exponential { n0, h, r0 })
    }

    pub fn vacuum() -> Self {
        AtmosphereModel::Exponential {
            n0: 0.0,
            h: 7000.0,
            r0: crate::constants::R_EARTH_MEAN,
        }
    }

    pub fn layered(r: Vec<f64>, n: Vec<f64>) -> Result<Self> {
        LayeredProfile::new(r, n).map(AtmosphereModel::Layered)
    }

    /// Refractivity (N-units) and its radial derivative (N-units/m).
    pub fn refractivity(&self, r: f64) -> (f64, f64) {
        match self {
            AtmosphereModel::Exponential { n0, h, r0 } => {
                if *n0 == 0.0 {
                    return (0.0, 0.0);
                }
                let v = n0 * (-(r - r0) / h).exp();
                (v, -v / h)
            }
            AtmosphereModel::Layered(p) => p.eval_n(r),
        }
    }

    /// Refractive index and its radial derivative (1/m).
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let (n, dn) = self.refractivity(r);
        (1.0 + n * 1e-6, dn * 1e-6)
    }

    /// Refractional radius x = n r.
    pub fn refractional_radius(&self, r: f64) -> f64 {
        self.eval(r).0 * r
    }

    pub fn is_vacuum(&self) -> bool {
        match self {
            AtmosphereModel::Exponential { n0, .. } => *n0 == 0.0,
            AtmosphereModel::Layered(p) => p.n.iter().all(|&v| v == 0.0),
        }
    }

    /// Radius above which the model is vacuum to double precision.
    pub fn top_radius(&self) -> f64 {
        match self {
            AtmosphereModel::Exponential { n0, h, r0 } => {
                if *n0 <= VACUUM_N {
                    *r0
                } else {
                    r0 + h * (n0 / VACUUM_N).ln()
                }
            }
            AtmosphereModel::Layered(p) => {
                let k = p.r.len() - 1;
                if p.n[k] <= VACUUM_N || !p.top_scale_height.is_finite() {
                    p.r[k]
                } else {
                    p.r[k] + p.top_scale_height * (p.n[k] / VACUUM_N).ln()
                }
            }
        }
    }

    /// Lowest radius the model describes; rays with a tangent point below it
    /// are blocked by the ground.
    pub fn surface_radius(&self) -> f64 {
        match self {
            AtmosphereModel::Exponential { r0, .. } => *r0,
            AtmosphereModel::Layered(p) => p.r[0],
        }
    }

    /// Radii where dN/dr is discontinuous.
    pub fn boundaries(&self) -> &[f64] {
        match self {
            AtmosphereModel::Exponential { .. } => &[],
            AtmosphereModel::Layered(p) => &p.r,
        }
    }

    /// Short identifier recorded in retrieval metadata.
    pub fn describe(&self) -> String {
        match self {
            AtmosphereModel::Exponential { n0, h, r0 } => {
                format!("exponential(N0={n0},H={h},r0={r0})")
            }
            AtmosphereModel::Layered(p) => format!(
                "layered({} levels,{:.1}-{:.1} m,Htop={:.1})",
                p.r.len(),
                p.r[0],
                p.r[p.r.len() - 1],
                p.top_scale_height
            ),
        }
    }

    /// Checks that x = n r is strictly increasing on `[r_lo, r_hi]`.
    pub fn check_monotone(&self, r_lo: f64, r_hi: f64) -> Result<()> {
        let mut probes: Vec<f64> = (0..=256)
            .map(|k| r_lo + (r_hi - r_lo) * k as f64 / 256.0)
            .collect();
        for &b in self.boundaries() {
            if b > r_lo && b < r_hi {
                probes.extend([b - 1e-3, b, b + 1e-3]);
            }
        }
        probes.sort_by(f64::total_cmp);
        for w in probes.windows(2) {
            let slope = |r: f64| {
                let (n, dn) = self.eval(r);
                n + r * dn
            };
            if slope(w[0]) <= 0.0 || slope(w[1]) <= 0.0 {
                return Err(Error::SuperRefraction {
                    r_lo: w[0],
                    r_hi: w[1],
                });
            }
        }
        Ok(())
    }

    /// Inverts x = n(r) r for the radius by Newton iteration.
    pub fn radius_from_refractional(&self, x: f64) -> Result<f64> {
        let mut r = x / self.eval(x).0;
        for _ in 0..50 {
            let (n, dn) = self.eval(r);
            let slope = n + r * dn;
            if !(slope > 0.0) {
                return Err(Error::SuperRefraction { r_lo: r, r_hi: r });
            }
            let step = (n * r - x) / slope;
            r -= step;
            if step.abs() <= 1e-12 * r {
                return Ok(r);
            }
        }
        Err(Error::NoConvergence {
            what: "refractional radius inversion",
            iterations: 50,
        })
    }
}

/// Layered model on radii `r0 + z` with Smith-Weintraub refractivity.
pub fn layered_from_met(levels: &[MetLevel], r0: f64) -> Result<AtmosphereModel> {
    let r = levels.iter().map(|l| r0 + l.z).collect();
    let n = levels.iter().map(refractivity_smith_weintraub).collect();
    AtmosphereModel::layered(r, n)
}

/// Layered model from `(z, N)` pairs.
pub fn layered_from_refractivity(rows: &[(f64, f64)], r0: f64) -> Result<AtmosphereModel> {
    AtmosphereModel::layered(
        rows.iter().map(|(z, _)| r0 + z).collect(),
        rows.iter().map(|(_, n)| *n).collect(),
    )
}

fn csv_rows(text: &str, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    use crate::ingest::{csv_error, csv_reader, header_indices};
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = header_indices(&headers, columns)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut row = Vec::with_capacity(columns.len());
        for (c, name) in idx.iter().zip(columns) {
            let raw = rec.get(*c).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| {
                ParseError::new(line, c + 1, format!("invalid {name} value `{raw}`"))
            })?;
            if !v.is_finite() {
                return Err(ParseError::new(line, c + 1, format!("non-finite {name}")).into());
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads `z_m,p_hpa,t_k,e_hpa` rows.
pub fn read_met_csv(text: &str) -> Result<Vec<MetLevel>> {
    csv_rows(text, &["z_m", "p_hpa", "t_k", "e_hpa"])?
        .into_iter()
        .map(|r| MetLevel::new(r[1], r[2], r[3], r[0]))
        .collect()
}

/// Reads `z_m,n_units` rows.
pub fn read_refractivity_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    Ok(csv_rows(text, &["z_m", "n_units"])?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

pub fn write_refractivity_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("z_m,n_units\n");
    for (z, n) in rows {
        out.push_str(&format!("{z:?},{n:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const R0: f64 = 6_371_000.0;

    fn exp_model() -> AtmosphereModel {
        AtmosphereModel::exponential(300.0, 7000.0, R0).unwrap()
    }

    fn layered_exp() -> AtmosphereModel {
        let r: Vec<f64> = (0..=60).map(|k| R0 + 1000.0 * k as f64).collect();
        let n = r
            .iter()
            .map(|&r| 300.0 * (-(r - R0) / 7000.0).exp())
            .collect();
        AtmosphereModel::layered(r, n).unwrap()
    }

    #[test]
    fn smith_weintraub_values() {
        let sea = MetLevel::new(1013.25, 288.15, 0.0, 0.0).unwrap();
        assert_relative_eq!(refractivity_smith_weintraub(&sea), 272.87, epsilon = 5e-3);
        assert_eq!(refractivity_smith_weintraub(&sea), 77.6 * 1013.25 / 288.15);
        let high = MetLevel::new(10.0, 220.0, 0.0, 30_000.0).unwrap();
        assert_relative_eq!(refractivity_smith_weintraub(&high), 3.527, epsilon = 5e-4);
        let wet = MetLevel::new(1000.0, 300.0, 20.0, 0.0).unwrap();
        assert_relative_eq!(
            refractivity_smith_weintraub(&wet),
            77.6 * 1000.0 / 300.0 + 3.73e5 * 20.0 / 90_000.0
        );
    }

    #[test]
    fn met_level_validation() {
        assert!(MetLevel::new(0.0, 280.0, 0.0, 0.0).is_err());
        assert!(MetLevel::new(100.0, -1.0, 0.0, 0.0).is_err());
        assert!(MetLevel::new(100.0, 280.0, 100.0, 0.0).is_err());
    }

    #[test]
    fn exponential_closed_form() {
        let (n, dn) = exp_model().eval(R0);
        assert_eq!(n, 1.0 + 300e-6);
        assert_relative_eq!(dn, -1e-6 * 300.0 / 7000.0, max_relative = 1e-15);
        let (n, dn) = AtmosphereModel::vacuum().eval(R0 + 5.0);
        assert_eq!((n, dn), (1.0, 0.0));
    }

    #[test]
    fn layered_matches_exponential_at_midpoints() {
        let lay = layered_exp();
        let exp = exp_model();
        for k in 0..60 {
            let r = R0 + 1000.0 * k as f64 + 500.0;
            assert_relative_eq!(
                lay.refractivity(r).0,
                exp.refractivity(r).0,
                max_relative = 1e-6
            );
        }
        // topside continuation reproduces the same scale height
        let r = R0 + 90_000.0;
        assert_relative_eq!(
            lay.refractivity(r).0,
            exp.refractivity(r).0,
            max_relative = 1e-6
        );
        // below the bottom level the first segment extends
        let r = R0 - 500.0;
        assert_relative_eq!(
            lay.refractivity(r).0,
            exp.refractivity(r).0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn layered_from_met_levels() {
        let levels = [
            MetLevel::new(1000.0, 288.0, 0.0, 0.0).unwrap(),
            MetLevel::new(800.0, 275.0, 0.0, 2000.0).unwrap(),
            MetLevel::new(500.0, 250.0, 0.0, 5500.0).unwrap(),
            MetLevel::new(200.0, 220.0, 0.0, 11_800.0).unwrap(),
        ];
        let model = layered_from_met(&levels, R0).unwrap();
        for l in &levels {
            let expected = 77.6 * l.p / l.t;
            assert_relative_eq!(
                model.refractivity(R0 + l.z).0,
                expected,
                max_relative = 1e-12
            );
        }
        let mut dup = levels;
        dup[2].z = 2000.0;
        assert!(layered_from_met(&dup, R0).is_err());
        assert!(layered_from_met(&levels[..3], R0).is_err());
    }

    #[test]
    fn top_radius_is_vacuum() {
        for m in [exp_model(), layered_exp()] {
            let top = m.top_radius();
            assert!(m.refractivity(top).0 <= 1.0001 * VACUUM_N);
            assert!(top > R0 + 100_000.0 && top < R0 + 300_000.0);
        }
    }

    #[test]
    fn refractional_radius_inverse() {
        let m = layered_exp();
        for h in [-200.0, 0.0, 1234.5, 17_999.0, 45_000.0, 120_000.0] {
            let r = R0 + h;
            let back = m
                .radius_from_refractional(m.refractional_radius(r))
                .unwrap();
            assert!((back - r).abs() < 1e-6, "{h}: {back} vs {r}");
        }
    }

    #[test]
    fn super_refraction_detected() {
        // a ducting layer: gradient steeper than -1/r
        let r = vec![R0, R0 + 100.0, R0 + 200.0, R0 + 1000.0];
        let n = vec![400.0, 300.0, 290.0, 270.0];
        let m = AtmosphereModel::layered(r, n).unwrap();
        assert!(matches!(
            m.check_monotone(R0, R0 + 1000.0),
            Err(Error::SuperRefraction { .. })
        ));
        assert!(exp_model().check_monotone(R0, R0 + 60_000.0).is_ok());
    }

    #[test]
    fn csv_readers() {
        let text = "# test profile\nz_m,p_hpa,t_k,e_hpa\n0,1000,288,5\n1000,900,281,3\n";
        let levels = read_met_csv(text).unwrap();
        assert_eq!(levels.len(), 2);
        assert_eq!(levels[1].z, 1000.0);
        assert_eq!(levels[0].e, 5.0);
        assert!(read_met_csv("z_m,p_hpa,t_k\n0,1,2\n").is_err());
        assert!(read_met_csv("z_m,p_hpa,t_k,e_hpa\n0,abc,2,0\n").is_err());

        let rows = vec![(0.0, 300.0), (1000.0, 262.5), (2500.5, 1.0 / 3.0)];
        assert_eq!(
            read_refractivity_csv(&write_refractivity_csv(&rows)).unwrap(),
            rows
        );
    }

    proptest! {
        #[test]
        fn index_at_least_one_and_decaying(h in -1000.0f64..500_000.0) {
            for m in [exp_model(), layered_exp()] {
                let (n, _) = m.eval(R0 + h);
                prop_assert!(n >= 1.0);
                prop_assert!(m.eval(R0 + h + 1000.0).0 <= n);
            }
        }

        #[test]
        fn derivative_matches_finite_difference(h in 100.0f64..59_000.0) {
            let m = layered_exp();
            let r = R0 + h;
            // keep clear of level boundaries
            prop_assume!((h % 1000.0) > 10.0 && (h % 1000.0) < 990.0);
            let step = 1.0;
            let fd = (m.refractivity(r + step).0 - m.refractivity(r - step).0) / (2.0 * step);
            let (_, d) = m.refractivity(r);
            prop_assert!(((fd - d) / d).abs() < 1e-6);
        }
    }
}
