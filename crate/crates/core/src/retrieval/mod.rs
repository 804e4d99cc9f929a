//! Bending-angle and refractivity retrieval for a receiver inside the
//! atmosphere: geometric-optics Doppler inversion, forward bending
//! integration and the finite-limit Abel transform.

mod abel;
mod compare;
mod doppler;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::columns::{ColumnFile, ExportFormat};
use crate::error::{Error, ParseError, Result};
use crate::time::Epoch;

pub use abel::{abel_invert_partial, forward_bending};
pub use compare::{compare_refractivity, BandStats};
pub use doppler::{doppler_to_bending, DopplerConfig};

/// Where the receiver-level refractive index comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverIndex {
    /// Measured refractivity at the receiver (N-units).
    InSitu(f64),
    /// Background model evaluated at the receiver radius.
    Model(AtmosphereModel),
    /// Receiver in vacuum (n = 1).
    Spaceborne,
}

impl ReceiverIndex {
    pub fn n_at(&self, r: f64) -> f64 {
        match self {
            ReceiverIndex::InSitu(n_units) => 1.0 + 1e-6 * n_units,
            ReceiverIndex::Model(m) => m.eval(r).0,
            ReceiverIndex::Spaceborne => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BendingQuality {
    Ok,
    /// Ray leaves the receiver upward; no tangent point below it.
    AboveHorizon,
    /// Impact parameter out of time order (outside geometric-optics validity).
    NonMonotone,
}

impl BendingQuality {
    pub fn code(self) -> i32 {
        match self {
            BendingQuality::Ok => 0,
            BendingQuality::AboveHorizon => 1,
            BendingQuality::NonMonotone => 2,
        }
    }

    pub fn from_code(c: i32) -> Option<Self> {
        match c {
            0 => Some(BendingQuality::Ok),
            1 => Some(BendingQuality::AboveHorizon),
            2 => Some(BendingQuality::NonMonotone),
            _ => None,
        }
    }
}

/// Bending angle against impact parameter, ascending in `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendingAngleProfile {
    /// Impact parameter (m).
    pub a: Vec<f64>,
    /// Bending (rad).
    pub alpha: Vec<f64>,
    /// Observation epoch per sample; absent for forward-modelled profiles.
    pub t: Vec<Option<Epoch>>,
    pub quality: Vec<BendingQuality>,
    /// Geocentric receiver radius (m).
    pub receiver_radius: f64,
    /// Refractive index at the receiver.
    pub n_r: f64,
    /// Epochs whose ray solution failed and were left out.
    pub failed: usize,
    /// Digest of the run configuration; empty outside configured runs.
    pub config_hash: String,
}

impl BendingAngleProfile {
    /// Refractional radius of the receiver.
    pub fn x_r(&self) -> f64 {
        self.n_r * self.receiver_radius
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Impact height `a - curvature_radius` for each sample.
    pub fn impact_heights(&self, curvature_radius: f64) -> Vec<f64> {
        self.a.iter().map(|a| a - curvature_radius).collect()
    }

    /// `(a, alpha)` of samples flagged ok.
    pub fn usable(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len())
            .filter(|&i| self.quality[i] == BendingQuality::Ok)
            .map(|i| (self.a[i], self.alpha[i]))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.len();
        if self.alpha.len() != n || self.t.len() != n || self.quality.len() != n {
            return Err(Error::Constraint(
                "bending profile columns differ in length".into(),
            ));
        }
        if let Some(w) = self.a.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Constraint(format!(
                "impact parameter not ascending at {}",
                w[1]
            )));
        }
        if let Some(v) = self.alpha.iter().chain(&self.a).find(|v| !v.is_finite()) {
            return Err(Error::Constraint(format!(
                "non-finite value {v} in bending profile"
            )));
        }
        Ok(())
    }
}

/// Refractivity against geocentric radius, ascending in `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefractivityProfile {
    pub r: Vec<f64>,
    pub n_units: Vec<f64>,
    pub receiver_radius: f64,
    pub n_r: f64,
    /// Description of the model used above the receiver.
    pub topside: String,
    pub config_hash: String,
}

impl RefractivityProfile {
    /// Layered model through the profile levels.
    pub fn to_model(&self) -> Result<AtmosphereModel> {
        AtmosphereModel::layered(self.r.clone(), self.n_units.clone())
    }

    /// Refractivity at radius `r` by linear interpolation; `None` outside the span.
    pub fn interpolate(&self, r: f64) -> Option<f64> {
        let (first, last) = (*self.r.first()?, *self.r.last()?);
        if !(r >= first && r <= last) {
            return None;
        }
        let i = self
            .r
            .partition_point(|&x| x <= r)
            .clamp(1, self.r.len() - 1);
        let (r0, r1) = (self.r[i - 1], self.r[i]);
        if r1 == r0 {
            return Some(self.n_units[i]);
        }
        let w = (r - r0) / (r1 - r0);
        Some(self.n_units[i - 1] + w * (self.n_units[i] - self.n_units[i - 1]))
    }
}

fn numeric_rows(text: &str, columns: &[&str]) -> Result<Vec<Vec<String>>> {
    use crate::ingest::{csv_error, csv_reader, header_indices};
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx = header_indices(&headers, columns)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        rows.push(
            idx.iter()
                .map(|&c| rec.get(c).unwrap_or("").to_string())
                .collect(),
        );
    }
    Ok(rows)
}

fn parse_f64(raw: &str, line: usize, col: usize, name: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::new(line, col, format!("invalid {name} value `{raw}`")).into())
}

/// `a_m,alpha_rad,quality` rows.
pub fn write_bending_csv(p: &BendingAngleProfile) -> String {
    let mut out = String::from("a_m,alpha_rad,quality\n");
    for i in 0..p.len() {
        out.push_str(&format!(
            "{:?},{:?},{}\n",
            p.a[i],
            p.alpha[i],
            p.quality[i].code()
        ));
    }
    out
}

/// Reads `a_m,alpha_rad,quality` rows into a profile for a receiver at
/// `receiver_radius` with index `n_r`.
pub fn read_bending_csv(text: &str, receiver_radius: f64, n_r: f64) -> Result<BendingAngleProfile> {
    let rows = numeric_rows(text, &["a_m", "alpha_rad", "quality"])?;
    let mut p = BendingAngleProfile {
        a: Vec::new(),
        alpha: Vec::new(),
        t: Vec::new(),
        quality: Vec::new(),
        receiver_radius,
        n_r,
        failed: 0,
        config_hash: String::new(),
    };
    for (k, row) in rows.iter().enumerate() {
        let line = k + 2;
        p.a.push(parse_f64(&row[0], line, 1, "a_m")?);
        p.alpha.push(parse_f64(&row[1], line, 2, "alpha_rad")?);
        let q = row[2]
            .trim()
            .parse::<i32>()
            .ok()
            .and_then(BendingQuality::from_code)
            .ok_or_else(|| ParseError::new(line, 3, format!("invalid quality `{}`", row[2])))?;
        p.quality.push(q);
        p.t.push(None);
    }
    p.validate()?;
    Ok(p)
}

/// `r_m,n_units` rows.
pub fn write_refractivity_profile_csv(p: &RefractivityProfile) -> String {
    let mut out = String::from("r_m,n_units\n");
    for (r, n) in p.r.iter().zip(&p.n_units) {
        out.push_str(&format!("{r:?},{n:?}\n"));
    }
    out
}

pub fn read_refractivity_profile_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    numeric_rows(text, &["r_m", "n_units"])?
        .iter()
        .enumerate()
        .map(|(k, row)| {
            Ok((
                parse_f64(&row[0], k + 2, 1, "r_m")?,
                parse_f64(&row[1], k + 2, 2, "n_units")?,
            ))
        })
        .collect()
}

/// Writes a refractivity profile in the column-file convention shared with
/// the excess-phase export.
pub fn export_refractivity(
    p: &RefractivityProfile,
    path: &Path,
    format: ExportFormat,
) -> Result<()> {
    let mut c = ColumnFile::default();
    c.dimensions.insert("level".into(), p.r.len());
    c.global_attributes
        .insert("topside".into(), p.topside.clone());
    c.global_attributes
        .insert("config_hash".into(), p.config_hash.clone());
    c.global_attributes.insert(
        "processing_version".into(),
        crate::preprocess::PROCESSING_VERSION.into(),
    );
    c.numeric_attributes
        .insert("receiver_radius_m".into(), p.receiver_radius);
    c.numeric_attributes.insert("n_r".into(), p.n_r);
    c.add("r", &["level"], p.r.clone());
    c.add("n_units", &["level"], p.n_units.clone());
    c.write(path, format)
}

pub fn import_refractivity(path: &Path) -> Result<RefractivityProfile> {
    let mut c = ColumnFile::read(path)?;
    Ok(RefractivityProfile {
        r: c.take("r")?,
        n_units: c.take("n_units")?,
        receiver_radius: c.num_attr("receiver_radius_m")?,
        n_r: c.num_attr("n_r")?,
        topside: c.attr("topside")?.to_string(),
        config_hash: c.attr("config_hash")?.to_string(),
    })
}

/// Writes a bending profile in the column-file convention.
pub fn export_bending(p: &BendingAngleProfile, path: &Path, format: ExportFormat) -> Result<()> {
    let mut c = ColumnFile::default();
    c.dimensions.insert("sample".into(), p.len());
    c.global_attributes
        .insert("config_hash".into(), p.config_hash.clone());
    c.global_attributes.insert(
        "processing_version".into(),
        crate::preprocess::PROCESSING_VERSION.into(),
    );
    c.numeric_attributes
        .insert("receiver_radius_m".into(), p.receiver_radius);
    c.numeric_attributes.insert("n_r".into(), p.n_r);
    c.numeric_attributes
        .insert("failed".into(), p.failed as f64);
    c.add("a", &["sample"], p.a.clone());
    c.add("alpha", &["sample"], p.alpha.clone());
    c.add_int(
        "gps_week",
        &["sample"],
        p.t.iter()
            .map(|t| t.map_or(-1.0, |t| t.week() as f64))
            .collect(),
    );
    c.add(
        "gps_tow",
        &["sample"],
        p.t.iter()
            .map(|t| t.map_or(f64::NAN, |t| t.tow()))
            .collect(),
    );
    c.add_int(
        "quality",
        &["sample"],
        p.quality.iter().map(|q| q.code() as f64).collect(),
    );
    c.write(path, format)
}

pub fn import_bending(path: &Path) -> Result<BendingAngleProfile> {
    let mut c = ColumnFile::read(path)?;
    let week = c.take("gps_week")?;
    let tow = c.take("gps_tow")?;
    let t = week
        .iter()
        .zip(&tow)
        .map(|(&w, &s)| {
            if w < 0.0 {
                Ok(None)
            } else {
                Epoch::new(w as u32, s).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let quality = c
        .take("quality")?
        .iter()
        .map(|&q| {
            BendingQuality::from_code(q as i32)
                .ok_or_else(|| Error::Format(format!("unknown quality code {q}")))
        })
        .collect::<Result<_>>()?;
    let p = BendingAngleProfile {
        a: c.take("a")?,
        alpha: c.take("alpha")?,
        t,
        quality,
        receiver_radius: c.num_attr("receiver_radius_m")?,
        n_r: c.num_attr("n_r")?,
        failed: c.num_attr("failed")? as usize,
        config_hash: c.attr("config_hash")?.to_string(),
    };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> BendingAngleProfile {
        BendingAngleProfile {
            a: vec![6.38e6, 6.381e6, 6.382e6],
            alpha: vec![0.02, 0.015, 0.0125],
            t: vec![
                Some(Epoch::new(2119, 10.0).unwrap()),
                None,
                Some(Epoch::new(2119, 12.5).unwrap()),
            ],
            quality: vec![
                BendingQuality::Ok,
                BendingQuality::NonMonotone,
                BendingQuality::Ok,
            ],
            receiver_radius: 6.39e6,
            n_r: 1.00007,
            failed: 2,
            config_hash: "abc".into(),
        }
    }

    #[test]
    fn bending_csv_round_trip() {
        let p = profile();
        let back = read_bending_csv(&write_bending_csv(&p), p.receiver_radius, p.n_r).unwrap();
        assert_eq!(back.a, p.a);
        assert_eq!(back.alpha, p.alpha);
        assert_eq!(back.quality, p.quality);
    }

    #[test]
    fn bending_csv_rejects_bad_rows() {
        assert!(read_bending_csv("a_m,alpha_rad,quality\n1,2,9\n", 1.0, 1.0).is_err());
        assert!(read_bending_csv("a_m,alpha_rad,quality\n2,0.1,0\n1,0.1,0\n", 1.0, 1.0).is_err());
        assert!(read_bending_csv("a_m,alpha\n1,2\n", 1.0, 1.0).is_err());
        assert!(read_bending_csv("a_m,alpha_rad,quality\nx,0.1,0\n", 1.0, 1.0).is_err());
    }

    #[test]
    fn column_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = profile();
        let r = RefractivityProfile {
            r: vec![6.371e6, 6.372e6],
            n_units: vec![300.0, 260.0],
            receiver_radius: 6.389e6,
            n_r: 1.00007,
            topside: "exponential".into(),
            config_hash: "abc".into(),
        };
        for (fmt, ext) in [(ExportFormat::NetCdf, "nc"), (ExportFormat::Json, "json")] {
            let bp = dir.path().join(format!("b.{ext}"));
            export_bending(&p, &bp, fmt).unwrap();
            assert_eq!(import_bending(&bp).unwrap(), p);
            let rp = dir.path().join(format!("r.{ext}"));
            export_refractivity(&r, &rp, fmt).unwrap();
            assert_eq!(import_refractivity(&rp).unwrap(), r);
        }
        let csv = write_refractivity_profile_csv(&r);
        assert_eq!(
            read_refractivity_profile_csv(&csv).unwrap(),
            vec![(6.371e6, 300.0), (6.372e6, 260.0)]
        );
    }

    #[test]
    fn interpolation_inside_span_only() {
        let r = RefractivityProfile {
            r: vec![0.0, 10.0, 20.0],
            n_units: vec![100.0, 50.0, 30.0],
            receiver_radius: 30.0,
            n_r: 1.0,
            topside: String::new(),
            config_hash: String::new(),
        };
        assert_eq!(r.interpolate(5.0), Some(75.0));
        assert_eq!(r.interpolate(20.0), Some(30.0));
        assert_eq!(r.interpolate(0.0), Some(100.0));
        assert_eq!(r.interpolate(21.0), None);
    }

    #[test]
    fn receiver_index_sources() {
        assert_eq!(ReceiverIndex::Spaceborne.n_at(7e6), 1.0);
        assert!((ReceiverIndex::InSitu(70.0).n_at(0.0) - 1.00007).abs() < 1e-15);
        let m = AtmosphereModel::exponential(300.0, 7000.0, 6.371e6).unwrap();
        assert!((ReceiverIndex::Model(m).n_at(6.371e6) - 1.0003).abs() < 1e-12);
    }
}
