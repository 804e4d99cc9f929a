//! Bundled simulation geometry: a balloon at 18 km watching a GNSS
//! satellite set behind the limb while a second satellite stays high.

use nalgebra::Rotation3;

use crate::atmosphere::AtmosphereModel;
use crate::constants::{GM_EARTH, OMEGA_EARTH};
use crate::error::Result;
use crate::frames::{ecef_from_geodetic, enu_basis, EcefVec, GeodeticPos};
use crate::geometry::{BalloonDrift, KeplerElements, KeplerOrbit};
use crate::ingest::SatId;
use crate::time::Epoch;

/// GNSS orbit radius (m).
pub const GNSS_RADIUS: f64 = 26_560_000.0;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub rx: BalloonDrift,
    pub tx: KeplerOrbit,
    pub reference: KeplerOrbit,
    pub sat: SatId,
    pub ref_sat: SatId,
    pub start: Epoch,
    pub end: Epoch,
    /// Geocentric radius of the ground below the balloon (m).
    pub surface_radius: f64,
}

/// Circular orbit through `pos` moving along `dir` at `epoch`, both in the
/// Earth frame whose angle from inertial space is `gmst` at `epoch`.
pub fn circular_orbit_through(
    pos: &EcefVec,
    dir: &EcefVec,
    epoch: Epoch,
    gmst: f64,
) -> Result<KeplerOrbit> {
    let to_inertial = Rotation3::from_axis_angle(&EcefVec::z_axis(), gmst);
    let r = to_inertial * pos;
    let d = to_inertial * dir;
    let v = (d - r * (d.dot(&r) / r.norm_squared())).normalize();
    let h = r.cross(&v).normalize();
    let i = h.z.clamp(-1.0, 1.0).acos();
    let node = EcefVec::z().cross(&h);
    let (raan, node) = if node.norm() < 1e-12 {
        (0.0, EcefVec::x())
    } else {
        (node.y.atan2(node.x), node.normalize())
    };
    let u = r
        .normalize()
        .dot(&h.cross(&node))
        .atan2(r.normalize().dot(&node));
    let elements = KeplerElements::new(r.norm(), 0.0, i, raan, 0.0, u, epoch)?;
    Ok(KeplerOrbit {
        elements,
        gmst0: gmst,
    })
}

/// Point at `radius` seen from `site` at elevation `el` and azimuth `az`
/// (local ellipsoidal frame).
fn point_at(site: &EcefVec, g: &GeodeticPos, el: f64, az: f64, radius: f64) -> (EcefVec, EcefVec) {
    let (east, north, up) = enu_basis(g);
    let horiz = north * az.cos() + east * az.sin();
    let los = horiz * el.cos() + up * el.sin();
    let b = site.dot(&los);
    let d = -b + (b * b + radius * radius - site.norm_squared()).sqrt();
    (site + los * d, horiz)
}

impl Scenario {
    /// Setting occultation lasting about 35 minutes: the satellite crosses
    /// the straight-line horizon 900 s after `start`.
    pub fn balloon_setting() -> Self {
        let start = Epoch::new(2119, 518_400.0).expect("valid epoch");
        let site = GeodeticPos::from_degrees(33.0, -106.0, 18_000.0);
        Self::setting_over(site, 10.0, start).expect("valid bundled geometry")
    }

    /// The same setting geometry for a balloon launched from `site` at
    /// `start` and drifting east at `east_speed` (m/s). The occulting
    /// satellite sets at azimuth 250 degrees; the reference stays near 75
    /// degrees elevation.
    pub fn setting_over(site: GeodeticPos, east_speed: f64, start: Epoch) -> Result<Self> {
        let rx = BalloonDrift {
            start: site,
            t0: start,
            east_speed,
        };
        let surface_radius = ecef_from_geodetic(&GeodeticPos::new(site.lat, site.lon, 0.0)).norm();

        let t_set = start.add_seconds(900.0);
        let gmst = OMEGA_EARTH * 900.0;
        let site_set = crate::geometry::Trajectory::state_at(&rx, t_set)?.pos;
        let g_set = crate::frames::geodetic_from_ecef(&site_set)?;
        let az = 250f64.to_radians();
        let (pos, horiz) = point_at(&site_set, &g_set, 0.0, az, GNSS_RADIUS);
        let tx = circular_orbit_through(&pos, &horiz, t_set, gmst)?;

        let (ref_pos, _) = point_at(
            &site_set,
            &g_set,
            75f64.to_radians(),
            30f64.to_radians(),
            GNSS_RADIUS,
        );
        let (east, north, _) = enu_basis(&g_set);
        let reference = circular_orbit_through(&ref_pos, &(north * 0.3 + east), t_set, gmst)?;

        Ok(Scenario {
            rx,
            tx,
            reference,
            sat: SatId::gps(32),
            ref_sat: SatId::gps(10),
            start,
            end: start.add_seconds(2100.0),
            surface_radius,
        })
    }

    /// Exponential refractivity (N0 = 300, H = 7 km) anchored at the ground
    /// below the balloon.
    pub fn model(&self) -> AtmosphereModel {
        AtmosphereModel::exponential(300.0, 7000.0, self.surface_radius).expect("valid model")
    }

    pub fn mu(&self) -> f64 {
        GM_EARTH
    }
}
