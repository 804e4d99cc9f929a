//! Data-quality accounting and sounding-density metrics.
//!
//! The ledger follows each occultation event from observation to the
//! final selected profile; every event leaves the main chain exactly once,
//! so flows are conserved at each stage.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::OccultationEvent;
use crate::ingest::Constellation;

/// km² in one square mile.
pub const KM2_PER_MI2: f64 = 2.589988;

/// Main-chain stages in order.
pub const STAGES: [&str; 3] = ["observed", "parsed", "selected"];

/// Where an event's processing ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Observed, with no later stage reached and no recorded reason.
    Observed,
    ExcludedConstellation,
    LossOfLock,
    Parsed,
    Selected,
}

impl Outcome {
    pub fn tag(self) -> &'static str {
        match self {
            Outcome::Observed => "observed",
            Outcome::ExcludedConstellation => "excluded_constellation",
            Outcome::LossOfLock => "loss_of_lock",
            Outcome::Parsed => "parsed",
            Outcome::Selected => "selected",
        }
    }

    /// Index of the last main-chain stage the event reached.
    fn depth(self) -> usize {
        match self {
            Outcome::Observed | Outcome::ExcludedConstellation | Outcome::LossOfLock => 0,
            Outcome::Parsed => 1,
            Outcome::Selected => 2,
        }
    }

    /// Sink and reason for events leaving the chain at their last stage.
    fn exit(self) -> Option<&'static str> {
        match self {
            Outcome::Observed => Some("unattributed"),
            Outcome::ExcludedConstellation => Some("excluded_constellation"),
            Outcome::LossOfLock => Some("loss_of_lock"),
            Outcome::Parsed => Some("not_selected"),
            Outcome::Selected => None,
        }
    }
}

impl FromStr for Outcome {
    type Err = Error;

    /// Accepts the tags with `_` or `-` separators, in any case.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        [
            Outcome::Observed,
            Outcome::ExcludedConstellation,
            Outcome::LossOfLock,
            Outcome::Parsed,
            Outcome::Selected,
        ]
        .into_iter()
        .find(|o| o.tag() == norm)
        .ok_or_else(|| Error::UnknownOutcome(s.to_string()))
    }
}

/// One event's terminal outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub constellation: Option<Constellation>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub name: String,
    pub count: usize,
    pub by_constellation: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEdge {
    pub from: String,
    pub to: String,
    pub count: usize,
    pub reason: String,
}

/// Stage counts and the flows between them, ready for a Sankey renderer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityLedger {
    pub stages: Vec<StageCount>,
    pub edges: Vec<LedgerEdge>,
}

impl QualityLedger {
    fn build(
        totals: [usize; 3],
        exits: &BTreeMap<Outcome, usize>,
        breakdown: [BTreeMap<String, usize>; 3],
    ) -> Self {
        let stages = STAGES
            .iter()
            .zip(totals)
            .zip(breakdown)
            .map(|((name, count), by_constellation)| StageCount {
                name: name.to_string(),
                count,
                by_constellation,
            })
            .collect();
        let mut edges = Vec::new();
        for depth in 0..STAGES.len() {
            if depth + 1 < STAGES.len() && totals[depth + 1] > 0 {
                edges.push(LedgerEdge {
                    from: STAGES[depth].into(),
                    to: STAGES[depth + 1].into(),
                    count: totals[depth + 1],
                    reason: "passed".into(),
                });
            }
            for (o, &n) in exits.iter().filter(|(o, n)| o.depth() == depth && **n > 0) {
                if let Some(reason) = o.exit() {
                    edges.push(LedgerEdge {
                        from: STAGES[depth].into(),
                        to: reason.into(),
                        count: n,
                        reason: reason.into(),
                    });
                }
            }
        }
        QualityLedger { stages, edges }
    }

    pub fn stage(&self, name: &str) -> Option<&StageCount> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&LedgerEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Checks that counts never grow along the chain and that the flows out
    /// of every non-final stage add up to its count.
    pub fn validate(&self) -> Result<()> {
        for w in self.stages.windows(2) {
            if w[1].count > w[0].count {
                return Err(Error::Constraint(format!(
                    "stage {} ({}) exceeds stage {} ({})",
                    w[1].name, w[1].count, w[0].name, w[0].count
                )));
            }
        }
        for s in &self.stages[..self.stages.len().saturating_sub(1)] {
            let out: usize = self
                .edges
                .iter()
                .filter(|e| e.from == s.name)
                .map(|e| e.count)
                .sum();
            if out != s.count {
                return Err(Error::Constraint(format!(
                    "flows out of {} sum to {out}, stage count is {}",
                    s.name, s.count
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let l: QualityLedger =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("ledger JSON: {e}")))?;
        l.validate()?;
        Ok(l)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            let _ = write!(out, "{:<10} {:>6}", s.name, s.count);
            for (c, n) in &s.by_constellation {
                let _ = write!(out, "  {c}={n}");
            }
            out.push('\n');
        }
        for e in &self.edges {
            let _ = writeln!(out, "  {} -> {}: {} ({})", e.from, e.to, e.count, e.reason);
        }
        out
    }
}

/// Builds the ledger from per-event outcomes.
pub fn tally(events: &[EventOutcome]) -> QualityLedger {
    let mut totals = [0usize; 3];
    let mut exits = BTreeMap::new();
    let mut breakdown: [BTreeMap<String, usize>; 3] = Default::default();
    for e in events {
        *exits.entry(e.outcome).or_insert(0) += 1;
        for d in 0..=e.outcome.depth() {
            totals[d] += 1;
            if let Some(c) = e.constellation {
                *breakdown[d].entry(c.name().to_string()).or_insert(0) += 1;
            }
        }
    }
    QualityLedger::build(totals, &exits, breakdown)
}

/// Builds the ledger from aggregate outcome counts for `observed` events.
/// The outcomes must account for every observed event.
pub fn tally_counts(observed: usize, outcomes: &[(Outcome, usize)]) -> Result<QualityLedger> {
    let mut exits = BTreeMap::new();
    for &(o, n) in outcomes {
        *exits.entry(o).or_insert(0) += n;
    }
    let sum: usize = exits.values().sum();
    if sum != observed {
        return Err(Error::Constraint(format!(
            "outcomes account for {sum} of {observed} observed events"
        )));
    }
    let reached = |d: usize| {
        exits
            .iter()
            .filter(|(o, _)| o.depth() >= d)
            .map(|(_, n)| n)
            .sum::<usize>()
    };
    let ledger = QualityLedger::build(
        [reached(0), reached(1), reached(2)],
        &exits,
        Default::default(),
    );
    ledger.validate()?;
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub count: usize,
    pub area_km2: f64,
    pub duration_days: f64,
    /// Soundings per 10⁶ km² per day.
    pub density: f64,
    /// Soundings per 10⁶ mi² per day.
    pub density_mi2: f64,
}

/// Soundings per day per million square kilometres (and square miles).
pub fn sounding_density(count: usize, area_km2: f64, duration_days: f64) -> Result<DensityReport> {
    if !(area_km2 > 0.0 && area_km2.is_finite() && duration_days > 0.0 && duration_days.is_finite())
    {
        return Err(Error::InvalidInput(format!(
            "area ({area_km2} km²) and duration ({duration_days} d) must be positive"
        )));
    }
    let density = count as f64 / duration_days / (area_km2 / 1e6);
    Ok(DensityReport {
        count,
        area_km2,
        duration_days,
        density,
        density_mi2: density * KM2_PER_MI2,
    })
}

impl DensityReport {
    /// The arithmetic spelled out, with a comparison against externally
    /// quoted figures when given.
    pub fn render_text(&self, quoted_km2: Option<f64>, quoted_mi2: Option<f64>) -> String {
        let mut out = format!(
            "{} soundings / {} d / ({} km² / 1e6) = {:.1} per 10^6 km² per day\n\
             {:.1} x {KM2_PER_MI2} = {:.1} per 10^6 mi² per day\n",
            self.count,
            self.duration_days,
            self.area_km2,
            self.density,
            self.density,
            self.density_mi2
        );
        if let Some(q) = quoted_km2 {
            let _ = writeln!(
                out,
                "note: quoted figure is {q} per 10^6 km²; this formula gives {:.1} ({:+.0}%)",
                self.density,
                100.0 * (self.density - q) / q
            );
        }
        if let Some(q) = quoted_mi2 {
            let _ = writeln!(
                out,
                "note: quoted figure is {q} per 10^6 mi²; this formula gives {:.1} ({:+.0}%)",
                self.density_mi2,
                100.0 * (self.density_mi2 - q) / q
            );
        }
        out
    }
}

/// Event counts on a regular latitude/longitude grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCoverage {
    pub cell_deg_millis: u64,
    pub n_lat: usize,
    pub n_lon: usize,
    /// Row-major by latitude cell, south to north; longitude from -180°.
    pub counts: Vec<usize>,
}

impl GridCoverage {
    pub fn cell_deg(&self) -> f64 {
        self.cell_deg_millis as f64 / 1000.0
    }

    pub fn count(&self, lat_idx: usize, lon_idx: usize) -> usize {
        self.counts[lat_idx * self.n_lon + lon_idx]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// (south-west corner lat, lon in degrees, count) of every occupied cell.
    pub fn occupied(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let d = self.cell_deg();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(move |(k, &n)| {
                let (i, j) = (k / self.n_lon, k % self.n_lon);
                (-90.0 + i as f64 * d, -180.0 + j as f64 * d, n)
            })
    }
}

/// Cell index of `v` in cells of width `d` from `origin`; a value on a
/// boundary belongs to the cell below it.
fn cell_index(v: f64, origin: f64, d: f64, n: usize) -> usize {
    let k = ((v - origin) / d).ceil() as i64 - 1;
    k.clamp(0, n as i64 - 1) as usize
}

/// Bins (lat, lon) points in degrees. Longitudes are wrapped into
/// [-180, 180]. Points on a cell boundary go to the lower-index cell.
pub fn grid_points(points: &[(f64, f64)], cell_deg: f64) -> Result<GridCoverage> {
    if !(cell_deg > 0.0 && cell_deg <= 180.0) {
        return Err(Error::InvalidInput(format!(
            "cell size must be in (0, 180] degrees, got {cell_deg}"
        )));
    }
    // milli-degree resolution keeps the grid comparable by value
    let millis = (cell_deg * 1000.0).round().max(1.0) as u64;
    let d = millis as f64 / 1000.0;
    let n_lat = (180.0 / d).ceil() as usize;
    let n_lon = (360.0 / d).ceil() as usize;
    let mut counts = vec![0; n_lat * n_lon];
    for (k, &(lat, lon)) in points.iter().enumerate() {
        if !(lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0) {
            return Err(Error::InvalidInput(format!(
                "point {k} has invalid coordinates ({lat}, {lon})"
            )));
        }
        let lon = if (-180.0..=180.0).contains(&lon) {
            lon
        } else {
            (lon + 180.0).rem_euclid(360.0) - 180.0
        };
        counts[cell_index(lat, -90.0, d, n_lat) * n_lon + cell_index(lon, -180.0, d, n_lon)] += 1;
    }
    Ok(GridCoverage {
        cell_deg_millis: millis,
        n_lat,
        n_lon,
        counts,
    })
}

/// Bins events by their tangent point.
pub fn grid_coverage(events: &[OccultationEvent], cell_deg: f64) -> Result<GridCoverage> {
    let pts: Vec<(f64, f64)> = events
        .iter()
        .map(|e| (e.tangent_lat.to_degrees(), e.tangent_lon.to_degrees()))
        .collect();
    grid_points(&pts, cell_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn ev(c: Constellation, o: Outcome) -> EventOutcome {
        EventOutcome {
            constellation: Some(c),
            outcome: o,
        }
    }

    #[test]
    fn campaign_counts_conserve() {
        let l = tally_counts(680, &[(Outcome::Parsed, 195), (Outcome::Observed, 485)]).unwrap();
        assert_eq!(l.edge("observed", "parsed").unwrap().count, 195);
        assert_eq!(l.edge("observed", "unattributed").unwrap().count, 485);
        assert_eq!(l.stage("observed").unwrap().count, 680);
        assert_eq!(l.edge("parsed", "not_selected").unwrap().count, 195);
    }

    #[test]
    fn short_outcomes_violate_conservation() {
        assert!(matches!(
            tally_counts(680, &[(Outcome::Parsed, 195)]),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn empty_ledger() {
        let l = tally(&[]);
        assert!(l.stages.iter().all(|s| s.count == 0));
        assert!(l.edges.is_empty());
        l.validate().unwrap();
    }

    #[test]
    fn per_event_tally_with_breakdown() {
        let events = [
            ev(Constellation::Gps, Outcome::Selected),
            ev(Constellation::Gps, Outcome::Parsed),
            ev(Constellation::Glonass, Outcome::ExcludedConstellation),
            ev(Constellation::Galileo, Outcome::LossOfLock),
            ev(Constellation::Galileo, Outcome::Selected),
        ];
        let l = tally(&events);
        l.validate().unwrap();
        assert_eq!(l.stage("parsed").unwrap().count, 3);
        assert_eq!(l.stage("selected").unwrap().by_constellation["GAL"], 1);
        assert_eq!(l.stage("observed").unwrap().by_constellation["GLO"], 1);
        assert_eq!(
            l.edge("observed", "excluded_constellation").unwrap().count,
            1
        );
        assert_eq!(QualityLedger::from_json(&l.to_json()).unwrap(), l);
    }

    #[test]
    fn outcome_tags_parse() {
        assert_eq!(
            "loss-of-lock".parse::<Outcome>().unwrap(),
            Outcome::LossOfLock
        );
        assert_eq!(
            "Excluded_Constellation".parse::<Outcome>().unwrap(),
            Outcome::ExcludedConstellation
        );
        assert!(matches!(
            "lost".parse::<Outcome>(),
            Err(Error::UnknownOutcome(_))
        ));
    }

    #[test]
    fn tampered_json_is_rejected() {
        let l = tally_counts(10, &[(Outcome::Selected, 4), (Outcome::LossOfLock, 6)]).unwrap();
        let bad = l.to_json().replacen("\"count\": 4", "\"count\": 5", 1);
        assert!(QualityLedger::from_json(&bad).is_err());
    }

    #[test]
    fn density_arithmetic() {
        let d = sounding_density(1350, 9e5, 5.0).unwrap();
        assert!((d.density - 300.0).abs() < 1e-12);
        assert!((d.density_mi2 - 300.0 * 2.589988).abs() < 1e-9);
        let text = d.render_text(Some(130.0), Some(340.0));
        assert!(text.contains("300.0") && text.contains("130"));
        assert_eq!(sounding_density(0, 9e5, 5.0).unwrap().density, 0.0);
        assert_eq!(sounding_density(1350, 9e5, 10.0).unwrap().density, 150.0);
        assert!(sounding_density(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_cell_and_boundaries() {
        let g = grid_points(&[(10.5, 20.5), (10.1, 20.9), (10.9, 20.1)], 1.0).unwrap();
        assert_eq!(g.count(100, 200), 3);
        assert_eq!(g.total(), 3);
        // exactly on the 10° and 20° lines: the cell below
        let b = grid_points(&[(10.0, 20.0)], 1.0).unwrap();
        assert_eq!(b.count(99, 199), 1);
        let poles = grid_points(&[(-90.0, -180.0), (90.0, 180.0)], 5.0).unwrap();
        assert_eq!(poles.count(0, 0), 1);
        assert_eq!(poles.count(35, 71), 1);
        assert!(grid_points(&[(91.0, 0.0)], 1.0).is_err());
        assert!(grid_points(&[], 0.0).is_err());
    }

    #[test]
    fn uniform_scatter_matches_multinomial() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        // a 10°x10° box at the equator, 1° cells of nearly equal area
        let n = 20_000;
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
            .collect();
        let g = grid_points(&pts, 1.0).unwrap();
        let (p, expect) = (0.01, n as f64 * 0.01);
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let cells: Vec<(f64, f64, usize)> = g.occupied().collect();
        assert_eq!(cells.len(), 100);
        for (lat, lon, c) in cells {
            assert!(
                (c as f64 - expect).abs() < 4.0 * sigma,
                "({lat}, {lon}) {c}"
            );
        }
    }

    proptest! {
        #[test]
        fn grid_total_preserved(
            pts in prop::collection::vec((-90.0f64..=90.0, -540.0f64..540.0), 0..200),
            cell in 0.1f64..60.0,
        ) {
            prop_assert_eq!(grid_points(&pts, cell).unwrap().total(), pts.len());
        }

        #[test]
        fn density_is_homogeneous(count in 0usize..10_000, k in 1usize..20, area in 1.0f64..1e7, days in 0.1f64..30.0) {
            let a = sounding_density(count, area, days).unwrap().density;
            let b = sounding_density(count * k, area, days).unwrap().density;
            prop_assert!((b - k as f64 * a).abs() <= 1e-12 * b.abs().max(1.0));
        }

        #[test]
        fn ledger_always_conserves(outcomes in prop::collection::vec(0usize..5, 0..100)) {
            let all = [Outcome::Observed, Outcome::ExcludedConstellation, Outcome::LossOfLock, Outcome::Parsed, Outcome::Selected];
            let events: Vec<EventOutcome> = outcomes.iter().map(|&k| ev(Constellation::Gps, all[k])).collect();
            let l = tally(&events);
            prop_assert!(l.validate().is_ok());
            prop_assert_eq!(l.stage("observed").unwrap().count, events.len());
            prop_assert_eq!(QualityLedger::from_json(&l.to_json()).unwrap(), l);
        }
    }
}
