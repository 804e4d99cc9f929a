//! Simulated balloon occultation fed through the ingest and preprocessing
//! chain, with optional phase noise and a receiver clock walk.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ro_core::atmosphere::AtmosphereModel;
use ro_core::geometry::sample_ephemeris;
use ro_core::ingest::{
    align_epochs, AlignConfig, EphemerisTable, ObsEpoch, OccultationDataset, SatId,
};
use ro_core::preprocess::{
    calibrate_clock, compute_excess_phase, correct_cycle_slips, gpr_smooth, ExcessPhaseSeries,
    GprConfig, SlipConfig,
};
use ro_core::raytracer::scenario::Scenario;
use ro_core::raytracer::{simulate_occultation, SimSeries};

pub struct Sim {
    pub sc: Scenario,
    pub model: AtmosphereModel,
    pub occ: SimSeries,
    pub reference: SimSeries,
}

/// The bundled setting occultation and its high reference link at `dt`.
pub fn simulate(dt: f64) -> Sim {
    let sc = Scenario::balloon_setting();
    let model = sc.model();
    let occ = simulate_occultation(&model, &sc.tx, &sc.rx, sc.start, sc.end, dt).unwrap();
    let reference =
        simulate_occultation(&model, &sc.reference, &sc.rx, sc.start, sc.end, dt).unwrap();
    Sim {
        sc,
        model,
        occ,
        reference,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Perturb {
    /// White phase noise (m) on the occulting link.
    pub noise: f64,
    /// Receiver clock random walk (m per sqrt s), common to both links.
    pub clock_walk: f64,
    pub seed: u64,
}

/// Occulting and reference datasets as the aligner produces them.
pub fn datasets(sim: &Sim, p: Perturb) -> (OccultationDataset, OccultationDataset) {
    let sc = &sim.sc;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut occ = sim.occ.observations(sc.sat);
    let mut reference = sim.reference.observations(sc.ref_sat);

    // one clock value per epoch, applied to every link tracked then
    let mut clock = BTreeMap::new();
    if p.clock_walk > 0.0 {
        let mut times: Vec<_> = occ.iter().chain(&reference).map(|o| o.t).collect();
        times.sort_by(|a, b| a.seconds_since(b).total_cmp(&0.0));
        times.dedup();
        let mut c = 0.0;
        let mut prev = times[0];
        for t in times {
            let dt = t.seconds_since(&prev);
            if dt > 0.0 {
                c += Normal::new(0.0, p.clock_walk * dt.sqrt())
                    .unwrap()
                    .sample(&mut rng);
            }
            clock.insert(t.total_seconds().to_bits(), c);
            prev = t;
        }
    }
    let apply = |obs: &mut [ObsEpoch], noise: f64, rng: &mut ChaCha8Rng| {
        for o in obs.iter_mut() {
            let lambda = o.sat.constellation.wavelength();
            let mut extra = clock
                .get(&o.t.total_seconds().to_bits())
                .copied()
                .unwrap_or(0.0);
            if noise > 0.0 {
                extra += Normal::new(0.0, noise).unwrap().sample(rng);
            }
            o.carrier_phase += extra / lambda;
        }
    };
    apply(&mut occ, p.noise, &mut rng);
    apply(&mut reference, 0.0, &mut rng);

    let pad = 1800.0;
    let mut table = EphemerisTable {
        interval: 300.0,
        sats: BTreeMap::new(),
    };
    for (sat, traj) in [(sc.sat, &sc.tx), (sc.ref_sat, &sc.reference)] {
        let e = sample_ephemeris(
            traj,
            sat,
            sc.start.add_seconds(-pad),
            sc.end.add_seconds(pad),
            300.0,
        )
        .unwrap();
        table.sats.insert(sat, e);
    }
    let mut all = occ;
    all.extend(reference);
    all.sort_by(|a, b| {
        a.t.seconds_since(&b.t)
            .total_cmp(&0.0)
            .then(a.sat.cmp(&b.sat))
    });
    let (sets, report) = align_epochs(
        &all,
        &sim.occ.platform_states(),
        &table,
        &AlignConfig::default(),
    );
    assert_eq!(report.unpaired, 0, "{report:?}");
    let pick = |sat: SatId| {
        sets.iter()
            .find(|d| d.sat == sat)
            .cloned()
            .expect("dataset per satellite")
    };
    (pick(sc.sat), pick(sc.ref_sat))
}

/// Raw excess phase of both links and the smoothed, calibrated occulting series.
pub struct Processed {
    pub occ_raw: ExcessPhaseSeries,
    pub ref_raw: ExcessPhaseSeries,
    pub calibrated: ExcessPhaseSeries,
    pub smoothed: ExcessPhaseSeries,
    pub slips_found: usize,
}

pub fn preprocess(
    occ: &OccultationDataset,
    reference: &OccultationDataset,
    gpr: &GprConfig,
) -> Processed {
    let occ_raw = compute_excess_phase(occ).unwrap();
    let ref_raw = compute_excess_phase(reference).unwrap();
    let calibrated = calibrate_clock(&occ_raw, &ref_raw, 0.05).unwrap();
    let (fixed, report) = correct_cycle_slips(&calibrated, &SlipConfig::default()).unwrap();
    let smoothed = gpr_smooth(&fixed, gpr).unwrap();
    Processed {
        occ_raw,
        ref_raw,
        calibrated,
        smoothed,
        slips_found: report.entries.len(),
    }
}
