//! WGS-84 geodetic and ECEF frames and local-horizon geometry.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{WGS84_A, WGS84_B, WGS84_E2};
use crate::error::{Error, Result};

/// Earth-centred, Earth-fixed vector (m or m/s).
pub type EcefVec = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPos {
    /// Geodetic latitude (rad).
    pub lat: f64,
    /// Longitude (rad).
    pub lon: f64,
    /// Height above the ellipsoid (m).
    pub h: f64,
}

impl GeodeticPos {
    pub fn new(lat: f64, lon: f64, h: f64) -> Self {
        GeodeticPos { lat, lon, h }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, h: f64) -> Self {
        GeodeticPos::new(lat_deg.to_radians(), lon_deg.to_radians(), h)
    }
}

fn prime_vertical_radius(sin_lat: f64) -> f64 {
    WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt()
}

pub fn ecef_from_geodetic(g: &GeodeticPos) -> EcefVec {
    let (sin_lat, cos_lat) = g.lat.sin_cos();
    let (sin_lon, cos_lon) = g.lon.sin_cos();
    let n = prime_vertical_radius(sin_lat);
    EcefVec::new(
        (n + g.h) * cos_lat * cos_lon,
        (n + g.h) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + g.h) * sin_lat,
    )
}

/// Inverse of [`ecef_from_geodetic`]: Bowring's starting value refined by
/// fixed-point iteration on latitude. Points within 1 km of the geocenter are
/// rejected.
pub fn geodetic_from_ecef(v: &EcefVec) -> Result<GeodeticPos> {
    if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) || v.norm() < 1_000.0 {
        return Err(Error::Degenerate(format!(
            "position {:?} is too close to the geocenter",
            v.as_slice()
        )));
    }
    let p = v.x.hypot(v.y);
    let lon = v.y.atan2(v.x);

    let ep2 = (WGS84_A * WGS84_A - WGS84_B * WGS84_B) / (WGS84_B * WGS84_B);
    let beta = (v.z * WGS84_A).atan2(p * WGS84_B);
    let (sb, cb) = beta.sin_cos();
    let mut lat = (v.z + ep2 * WGS84_B * sb.powi(3)).atan2(p - WGS84_E2 * WGS84_A * cb.powi(3));
    for _ in 0..8 {
        let n = prime_vertical_radius(lat.sin());
        let next = (v.z + WGS84_E2 * n * lat.sin()).atan2(p);
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    let (sin_lat, cos_lat) = lat.sin_cos();
    let n = prime_vertical_radius(sin_lat);
    // valid at all latitudes, including the poles
    let h = p * cos_lat + v.z * sin_lat - WGS84_A * WGS84_A / n;
    Ok(GeodeticPos { lat, lon, h })
}

/// East, north and up unit vectors at a geodetic position.
pub fn enu_basis(g: &GeodeticPos) -> (EcefVec, EcefVec, EcefVec) {
    let (sl, cl) = g.lat.sin_cos();
    let (so, co) = g.lon.sin_cos();
    let east = EcefVec::new(-so, co, 0.0);
    let north = EcefVec::new(-sl * co, -sl * so, cl);
    let up = EcefVec::new(cl * co, cl * so, sl);
    (east, north, up)
}

/// Elevation above the ellipsoidal local horizon of `rx` and azimuth clockwise
/// from north, both in radians.
pub fn elevation_azimuth(rx: &EcefVec, target: &EcefVec) -> Result<(f64, f64)> {
    let g = geodetic_from_ecef(rx)?;
    let los = target - rx;
    let range = los.norm();
    if !(range > 0.0) {
        return Err(Error::Degenerate("target coincides with receiver".into()));
    }
    let (east, north, up) = enu_basis(&g);
    let e = los.dot(&east);
    let n = los.dot(&north);
    let u = los.dot(&up);
    let elevation = u.atan2(e.hypot(n));
    let mut azimuth = e.atan2(n);
    if azimuth < 0.0 {
        azimuth += std::f64::consts::TAU;
    }
    Ok((elevation, azimuth))
}

/// Meridian (M) and prime-vertical (N) radii of curvature at a latitude.
pub fn principal_radii(lat: f64) -> (f64, f64) {
    let s2 = lat.sin().powi(2);
    let w = 1.0 - WGS84_E2 * s2;
    let m = WGS84_A * (1.0 - WGS84_E2) / w.powf(1.5);
    let n = WGS84_A / w.sqrt();
    (m, n)
}

/// Euler radius of curvature of the ellipsoid along `azimuth`.
pub fn radius_of_curvature(lat: f64, azimuth: f64) -> f64 {
    let (m, n) = principal_radii(lat);
    let (sa, ca) = azimuth.sin_cos();
    m * n / (m * sa * sa + n * ca * ca)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn equator_prime_meridian() {
        let v = ecef_from_geodetic(&GeodeticPos::new(0.0, 0.0, 0.0));
        assert_eq!(v, EcefVec::new(WGS84_A, 0.0, 0.0));
        let g = geodetic_from_ecef(&v).unwrap();
        assert_eq!(g.lat, 0.0);
        assert_eq!(g.lon, 0.0);
        assert!(g.h.abs() < 1e-9);
    }

    #[test]
    fn pole() {
        let v = ecef_from_geodetic(&GeodeticPos::new(FRAC_PI_2, 0.0, 0.0));
        assert!(v.x.abs() < 1e-9 && v.y.abs() < 1e-9);
        assert_relative_eq!(v.z, WGS84_B, epsilon = 1e-8);
        let g = geodetic_from_ecef(&EcefVec::new(0.0, 0.0, 6_356_752.314)).unwrap();
        assert_relative_eq!(g.lat, FRAC_PI_2, epsilon = 1e-15);
        assert!(g.h.abs() < 1e-3);
    }

    // Independent closed-form oracle (Vermeille 2002) for the inverse mapping.
    fn vermeille(v: &EcefVec) -> (f64, f64, f64) {
        let a = WGS84_A;
        let e2 = WGS84_E2;
        let p = (v.x * v.x + v.y * v.y) / (a * a);
        let q = (1.0 - e2) * v.z * v.z / (a * a);
        let r = (p + q - e2 * e2) / 6.0;
        let s = e2 * e2 * p * q / (4.0 * r.powi(3));
        let t = (1.0 + s + (s * (2.0 + s)).sqrt()).cbrt();
        let u = r * (1.0 + t + 1.0 / t);
        let vv = (u * u + e2 * e2 * q).sqrt();
        let w = e2 * (u + vv - q) / (2.0 * vv);
        let k = (u + vv + w * w).sqrt() - w;
        let d = k * (v.x * v.x + v.y * v.y).sqrt() / (k + e2);
        let lat = 2.0 * v.z.atan2(d + (d * d + v.z * v.z).sqrt());
        let h = (k + e2 - 1.0) / k * (d * d + v.z * v.z).sqrt();
        (lat, v.y.atan2(v.x), h)
    }

    #[test]
    fn flight_point_matches_oracle() {
        let g = GeodeticPos::new(0.6, -2.0, 18_000.0);
        let v = ecef_from_geodetic(&g);
        let (lat, lon, h) = vermeille(&v);
        assert_relative_eq!(lat, 0.6, epsilon = 1e-12);
        assert_relative_eq!(lon, -2.0, epsilon = 1e-12);
        assert_relative_eq!(h, 18_000.0, epsilon = 1e-6);
        let back = ecef_from_geodetic(&geodetic_from_ecef(&v).unwrap());
        assert!((back - v).norm() < 1e-6);
    }

    #[test]
    fn geocenter_rejected() {
        assert!(geodetic_from_ecef(&EcefVec::new(10.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn zenith_and_horizon() {
        let g = GeodeticPos::new(0.7, 0.3, 18_000.0);
        let rx = ecef_from_geodetic(&g);
        let above = ecef_from_geodetic(&GeodeticPos::new(0.7, 0.3, 2.0e7));
        let (el, _) = elevation_azimuth(&rx, &above).unwrap();
        assert_relative_eq!(el, FRAC_PI_2, epsilon = 1e-9);

        let (east, north, _) = enu_basis(&g);
        let on_horizon = rx + 1.0e6 * (east + north).normalize();
        let (el, az) = elevation_azimuth(&rx, &on_horizon).unwrap();
        assert!(el.abs() < 1e-12);
        assert_relative_eq!(az, PI / 4.0, epsilon = 1e-12);
        assert!(elevation_azimuth(&rx, &rx).is_err());
    }

    #[test]
    fn satellite_below_geometric_horizon() {
        // A point 26 560 km from the geocenter, 100 degrees of arc away
        // from the balloon, is hidden behind the limb.
        let g = GeodeticPos::new(0.0, 0.0, 18_000.0);
        let rx = ecef_from_geodetic(&g);
        let ang = 100f64.to_radians();
        let sat = 26_560_000.0 * EcefVec::new(ang.cos(), ang.sin(), 0.0);
        let (el, _) = elevation_azimuth(&rx, &sat).unwrap();
        assert!(el < 0.0);
    }

    #[test]
    fn radius_of_curvature_closed_forms() {
        // East at the equator is the prime-vertical radius, which equals a there.
        assert_relative_eq!(radius_of_curvature(0.0, FRAC_PI_2), WGS84_A, epsilon = 1e-6);
        assert_relative_eq!(
            radius_of_curvature(0.0, 0.0),
            WGS84_A * (1.0 - WGS84_E2),
            epsilon = 1e-6
        );
        // hand evaluation of the Euler formula at lat 0.61, azimuth 1.0
        let s2 = 0.61f64.sin().powi(2);
        let m = WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * s2).powf(1.5);
        let n = WGS84_A / (1.0 - WGS84_E2 * s2).sqrt();
        let expected = 1.0 / (1.0f64.cos().powi(2) / m + 1.0f64.sin().powi(2) / n);
        assert_relative_eq!(radius_of_curvature(0.61, 1.0), expected, epsilon = 1e-6);
        assert!(expected > 6.36e6 && expected < 6.39e6);
    }

    proptest! {
        #[test]
        fn round_trip_flight_envelope(lat in -FRAC_PI_2 + 1e-4..FRAC_PI_2 - 1e-4, lon in -PI..PI,
                                      h in -1_000.0f64..1.0e6) {
            let g = GeodeticPos::new(lat, lon, h);
            let v = ecef_from_geodetic(&g);
            let back = ecef_from_geodetic(&geodetic_from_ecef(&v).unwrap());
            prop_assert!((back - v).norm() < 1e-6);
        }

        #[test]
        fn round_trip_gnss_radii(lat in -FRAC_PI_2 + 1e-4..FRAC_PI_2 - 1e-4, lon in -PI..PI,
                                 h in 1.9e7f64..2.3e7) {
            let v = ecef_from_geodetic(&GeodeticPos::new(lat, lon, h));
            let back = ecef_from_geodetic(&geodetic_from_ecef(&v).unwrap());
            prop_assert!((back - v).norm() < 1e-6);
        }

        #[test]
        fn elevation_rotation_invariant(lat in -1.2f64..1.2, lon in -3.0f64..3.0,
                                        tx in -3.0e7f64..3.0e7, ty in -3.0e7f64..3.0e7,
                                        tz in -3.0e7f64..3.0e7, rot in -3.0f64..3.0) {
            let rx = ecef_from_geodetic(&GeodeticPos::new(lat, lon, 18_000.0));
            let target = EcefVec::new(tx, ty, tz);
            prop_assume!((target - rx).norm() > 1.0e5);
            let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), rot);
            let (e0, _) = elevation_azimuth(&rx, &target).unwrap();
            let (e1, _) = elevation_azimuth(&(r * rx), &(r * target)).unwrap();
            prop_assert!((e0 - e1).abs() < 1e-12);
        }
    }
}
