//! Atmosphere model and simulation geometry described by a run configuration.

use anyhow::{bail, Context, Result};
use ro_core::atmosphere::{
    layered_from_met, layered_from_refractivity, read_met_csv, read_refractivity_csv,
    AtmosphereModel,
};
use ro_core::frames::{ecef_from_geodetic, geodetic_from_ecef};
use ro_core::geometry::{KeplerElements, KeplerOrbit, PlatformTrack, StaticPoint, Trajectory};
use ro_core::ingest::{parse_platform_csv, PlatformState, SatId};
use ro_core::raytracer::scenario::Scenario;
use ro_core::retrieval::ReceiverIndex;
use ro_core::{Epoch, GeodeticPos};

use crate::config::RunConfig;

pub struct Geometry {
    pub rx: Box<dyn Trajectory>,
    pub tx: Box<dyn Trajectory>,
    pub reference: Box<dyn Trajectory>,
    pub sat: SatId,
    pub ref_sat: SatId,
    pub start: Epoch,
    pub end: Epoch,
}

fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn track(cfg: &RunConfig) -> Result<Vec<PlatformState>> {
    let path = cfg.path("scenario.rx_track");
    let (states, report) =
        parse_platform_csv(&read(&path)?).with_context(|| path.display().to_string())?;
    if report.rejected + report.implausible > 0 {
        log::warn!("{}: {report:?}", path.display());
    }
    Ok(states)
}

/// Launch site: configured, or the first state of the track.
fn site(cfg: &RunConfig) -> Result<GeodeticPos> {
    if cfg.str("scenario.rx") == "track" {
        let first = track(cfg)?
            .into_iter()
            .next()
            .context("empty receiver track")?;
        return Ok(geodetic_from_ecef(&first.pos)?);
    }
    Ok(GeodeticPos::from_degrees(
        cfg.f64("scenario.rx_lat_deg"),
        cfg.f64("scenario.rx_lon_deg"),
        cfg.f64("scenario.rx_height_m"),
    ))
}

fn surface_radius(cfg: &RunConfig) -> Result<f64> {
    match cfg.opt_f64("model.surface_radius_m") {
        Some(r) => Ok(r),
        None => {
            let s = site(cfg)?;
            Ok(ecef_from_geodetic(&GeodeticPos::new(s.lat, s.lon, 0.0)).norm())
        }
    }
}

pub fn model(cfg: &RunConfig) -> Result<AtmosphereModel> {
    let r0 = surface_radius(cfg)?;
    let m = match cfg.str("model.kind") {
        "vacuum" => AtmosphereModel::vacuum(),
        "exponential" => {
            AtmosphereModel::exponential(cfg.f64("model.n0"), cfg.f64("model.scale_height_m"), r0)?
        }
        kind => {
            let path = cfg.path("model.profile");
            let text = read(&path)?;
            let m = if kind == "met" {
                read_met_csv(&text).and_then(|l| layered_from_met(&l, r0))
            } else {
                read_refractivity_csv(&text).and_then(|rows| layered_from_refractivity(&rows, r0))
            };
            m.with_context(|| path.display().to_string())?
        }
    };
    Ok(m)
}

pub fn receiver_index(cfg: &RunConfig, model: &AtmosphereModel) -> ReceiverIndex {
    match cfg.str("retrieve.receiver_index") {
        "in_situ" => ReceiverIndex::InSitu(cfg.f64("retrieve.receiver_n_units")),
        "spaceborne" => ReceiverIndex::Spaceborne,
        _ => ReceiverIndex::Model(model.clone()),
    }
}

fn kepler(cfg: &RunConfig, prefix: &str, start: Epoch) -> Result<Box<dyn Trajectory>> {
    let k = |name: &str| cfg.f64(&format!("{prefix}.{name}"));
    let el = KeplerElements::new(
        k("a_m"),
        k("e"),
        k("i_deg").to_radians(),
        k("raan_deg").to_radians(),
        k("argp_deg").to_radians(),
        k("m0_deg").to_radians(),
        start,
    )
    .with_context(|| format!("{prefix}.* elements"))?;
    Ok(Box::new(KeplerOrbit::new(el)))
}

pub fn geometry(cfg: &RunConfig) -> Result<Geometry> {
    let start = Epoch::new(cfg.count("sim.start_week") as u32, cfg.f64("sim.start_tow"))?;
    let site = site(cfg)?;
    let sc = Scenario::setting_over(site, cfg.f64("scenario.rx_east_speed_mps"), start)?;
    let rx: Box<dyn Trajectory> = match cfg.str("scenario.rx") {
        "hover" => Box::new(StaticPoint(ecef_from_geodetic(&site))),
        "track" => Box::new(PlatformTrack::new(track(cfg)?)?),
        _ => Box::new(sc.rx),
    };
    let tx: Box<dyn Trajectory> = match cfg.str("scenario.tx") {
        "kepler" => kepler(cfg, "tx", start)?,
        _ => Box::new(sc.tx),
    };
    let reference: Box<dyn Trajectory> = match cfg.str("scenario.reference") {
        "kepler" => kepler(cfg, "ref", start)?,
        _ => Box::new(sc.reference),
    };
    let prn = |key: &str| -> Result<SatId> {
        let n = cfg.count(key);
        if !(1..=63).contains(&n) {
            bail!("{key} must be a PRN in 1..=63, got {n}");
        }
        Ok(SatId::gps(n as u8))
    };
    let (sat, ref_sat) = (prn("tx.prn")?, prn("ref.prn")?);
    if sat == ref_sat {
        bail!("tx.prn and ref.prn must differ");
    }
    Ok(Geometry {
        rx,
        tx,
        reference,
        sat,
        ref_sat,
        start,
        end: start.add_seconds(cfg.f64("sim.duration_s")),
    })
}
