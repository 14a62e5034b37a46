//! Node positions over time and geometric visibility.
//!
//! Satellites follow circular two-body orbits; ground sites and GEO slots sit
//! on a spherical Earth that rotates at a constant rate. All positions are in
//! an Earth-centered inertial frame whose x axis points at the Greenwich
//! meridian when the sidereal angle is zero.

use chrono::{DateTime, Utc};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean equatorial Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;
/// Earth's gravitational parameter in m^3/s^2.
pub const MU_EARTH: f64 = 3.986_004_418e14;
/// Earth rotation rate in rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
/// Speed of light used for latency and free-space loss, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
/// Geostationary orbit radius in meters.
pub const GEO_RADIUS_M: f64 = 42_164_200.0;

/// Seconds elapsed from `from` to `to`, sub-second precision included.
pub fn seconds_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    let d = to - from;
    d.num_milliseconds() as f64 / 1000.0
}

/// Circular orbit elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    #[serde(default)]
    pub eccentricity: f64,
    pub mean_anomaly_at_epoch_deg: f64,
    pub epoch: DateTime<Utc>,
}

impl OrbitElements {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return Err(Error::invalid("altitude_km", "must be > 0"));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::invalid("inclination_deg", "must lie in [0, 180]"));
        }
        if self.eccentricity != 0.0 {
            return Err(Error::ModelUnsupported(format!(
                "eccentricity {} (circular orbits only)",
                self.eccentricity
            )));
        }
        Ok(())
    }

    pub fn semi_major_axis_m(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_km * 1000.0
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        let a = self.semi_major_axis_m();
        (MU_EARTH / (a * a * a)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        orbital_period_s(self.semi_major_axis_m())
    }
}

/// Kepler's third law for semi-major axis `a_m`.
pub fn orbital_period_s(a_m: f64) -> f64 {
    2.0 * std::f64::consts::PI * (a_m.powi(3) / MU_EARTH).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteRole {
    User,
    Ogs,
    Dn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundSite {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    #[serde(default)]
    pub altitude_m: f64,
    pub role: SiteRole,
}

impl GroundSite {
    pub fn validate(&self) -> Result<()> {
        if !(self.latitude_deg.abs() <= 90.0) {
            return Err(Error::invalid("latitude_deg", "must satisfy |lat| <= 90"));
        }
        if !(self.longitude_deg.abs() <= 180.0) {
            return Err(Error::invalid("longitude_deg", "must satisfy |lon| <= 180"));
        }
        Ok(())
    }
}

/// A geostationary slot, fixed over its sub-satellite longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoSlot {
    pub longitude_deg: f64,
}

impl GeoSlot {
    pub fn validate(&self) -> Result<()> {
        if !(self.longitude_deg.abs() <= 180.0) {
            return Err(Error::invalid("longitude_deg", "must satisfy |lon| <= 180"));
        }
        Ok(())
    }
}

/// Orientation of the rotating Earth relative to the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthFrame {
    pub epoch: DateTime<Utc>,
    /// Sidereal angle of the Greenwich meridian at `epoch`.
    #[serde(default)]
    pub gmst0_deg: f64,
}

impl EarthFrame {
    pub fn new(epoch: DateTime<Utc>) -> Self {
        EarthFrame {
            epoch,
            gmst0_deg: 0.0,
        }
    }

    /// Greenwich angle at `t`, radians.
    pub fn rotation_angle(&self, t: DateTime<Utc>) -> f64 {
        self.gmst0_deg.to_radians() + EARTH_ROTATION_RAD_S * seconds_between(self.epoch, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EciPosition {
    pub r: Vector3<f64>,
    pub t: DateTime<Utc>,
}

impl EciPosition {
    pub fn new(x: f64, y: f64, z: f64, t: DateTime<Utc>) -> Self {
        EciPosition {
            r: Vector3::new(x, y, z),
            t,
        }
    }

    pub fn norm(&self) -> f64 {
        self.r.norm()
    }

    pub fn distance_to(&self, other: &EciPosition) -> f64 {
        (self.r - other.r).norm()
    }
}

pub fn propagate_orbit(el: &OrbitElements, t: DateTime<Utc>) -> Result<EciPosition> {
    if el.eccentricity != 0.0 {
        return Err(Error::ModelUnsupported(format!(
            "eccentricity {} (circular orbits only)",
            el.eccentricity
        )));
    }
    let a = el.semi_major_axis_m();
    let dt = seconds_between(el.epoch, t);
    // Circular orbit: the argument of latitude advances with the mean anomaly.
    let u = el.mean_anomaly_at_epoch_deg.to_radians() + el.mean_motion() * dt;
    let (su, cu) = u.sin_cos();
    let (si, ci) = el.inclination_deg.to_radians().sin_cos();
    let (so, co) = el.raan_deg.to_radians().sin_cos();
    Ok(EciPosition::new(
        a * (co * cu - so * su * ci),
        a * (so * cu + co * su * ci),
        a * (su * si),
        t,
    ))
}

fn rotating_to_inertial(
    radius: f64,
    lat_rad: f64,
    lon_rad: f64,
    frame: &EarthFrame,
    t: DateTime<Utc>,
) -> EciPosition {
    let theta = lon_rad + frame.rotation_angle(t);
    let (sl, cl) = lat_rad.sin_cos();
    let (st, ct) = theta.sin_cos();
    EciPosition::new(radius * cl * ct, radius * cl * st, radius * sl, t)
}

pub fn site_position(site: &GroundSite, frame: &EarthFrame, t: DateTime<Utc>) -> EciPosition {
    rotating_to_inertial(
        EARTH_RADIUS_M + site.altitude_m,
        site.latitude_deg.to_radians(),
        site.longitude_deg.to_radians(),
        frame,
        t,
    )
}

pub fn geo_position(slot: &GeoSlot, frame: &EarthFrame, t: DateTime<Utc>) -> EciPosition {
    rotating_to_inertial(GEO_RADIUS_M, 0.0, slot.longitude_deg.to_radians(), frame, t)
}

/// True iff the segment a-b stays strictly outside the sphere of
/// `occlusion_radius_m` around the Earth's center.
pub fn line_of_sight(a: &EciPosition, b: &EciPosition, occlusion_radius_m: f64) -> bool {
    let d = b.r - a.r;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return a.norm() > occlusion_radius_m;
    }
    let s = (-a.r.dot(&d) / len2).clamp(0.0, 1.0);
    let closest = a.r + d * s;
    closest.norm() > occlusion_radius_m
}

/// Elevation of `sat_pos` above the local horizontal plane at `site_pos`.
pub fn elevation_deg(site_pos: &EciPosition, sat_pos: &EciPosition) -> Result<f64> {
    let rho = sat_pos.r - site_pos.r;
    let site_norm = site_pos.norm();
    if rho.norm() == 0.0 || site_norm == 0.0 {
        return Err(Error::UndefinedGeometry(
            "site and target positions coincide".into(),
        ));
    }
    let up = site_pos.r / site_norm;
    let vertical = rho.dot(&up);
    let horizontal = (rho - up * vertical).norm();
    Ok(vertical.atan2(horizontal).to_degrees())
}
