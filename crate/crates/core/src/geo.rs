//! Coordinates, great-circle math, and wind-driven advection.
//!
//! All angles are stored in degrees; radians appear only inside trig calls.
//! Horizontal kinematics use a local equirectangular approximation, which is
//! accurate to well below wind-model uncertainty at the ~150 km arena scale.

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Meters per degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEG: f64 = EARTH_RADIUS_KM * 1000.0 * std::f64::consts::PI / 180.0;

/// A point on (or above) the sphere. Longitude is kept in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

impl GeoCoord {
    pub fn new(latitude_deg: f64, longitude_deg: f64, altitude_m: f64) -> Self {
        Self {
            latitude_deg: latitude_deg.clamp(-90.0, 90.0),
            longitude_deg: wrap_longitude(longitude_deg),
            altitude_m,
        }
    }

    pub fn with_altitude(self, altitude_m: f64) -> Self {
        Self { altitude_m, ..self }
    }
}

/// Wrap a longitude into `[-180, 180)`.
pub fn wrap_longitude(lon: f64) -> f64 {
    let mut x = (lon + 180.0) % 360.0;
    if x < 0.0 {
        x += 360.0;
    }
    x - 180.0
}

/// Normalize an angle into `[0, 360)`.
pub fn normalize_bearing(deg: f64) -> f64 {
    let mut x = deg % 360.0;
    if x < 0.0 {
        x += 360.0;
    }
    // -1e-17 % 360 gives -0.0 followed by +360 rounding back to 360.0
    if x >= 360.0 {
        x = 0.0;
    }
    x
}

/// Fold an angular difference to `[0, 180]`.
pub fn fold_angle_deg(diff: f64) -> f64 {
    let d = normalize_bearing(diff);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Horizontal wind: `u` positive eastward, `v` positive northward, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindVector {
    pub u_ms: f64,
    pub v_ms: f64,
}

impl WindVector {
    pub fn new(u_ms: f64, v_ms: f64) -> Self {
        Self { u_ms, v_ms }
    }

    pub fn speed_ms(&self) -> f64 {
        self.u_ms.hypot(self.v_ms)
    }

    /// Bearing the air moves *toward*, degrees in `[0, 360)`, 0 = north.
    pub fn bearing_deg(&self) -> f64 {
        normalize_bearing(self.u_ms.atan2(self.v_ms).to_degrees())
    }
}

/// Great-circle surface distance in kilometers, ignoring altitude.
pub fn haversine_distance_km(a: &GeoCoord, b: &GeoCoord) -> f64 {
    let lat1 = a.latitude_deg.to_radians();
    let lat2 = b.latitude_deg.to_radians();
    let dlat = (b.latitude_deg - a.latitude_deg).to_radians();
    let dlon = (b.longitude_deg - a.longitude_deg).to_radians();

    let s1 = (dlat / 2.0).sin();
    let s2 = (dlon / 2.0).sin();
    let h = s1 * s1 + lat1.cos() * lat2.cos() * s2 * s2;
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing {
    /// Degrees in `[0, 360)`, 0 = north, 90 = east.
    pub degrees: f64,
    /// False when the points are horizontally coincident (within ~1 m) and
    /// the bearing fell back to 0.
    pub defined: bool,
}

pub fn bearing_between(a: &GeoCoord, b: &GeoCoord) -> Bearing {
    if haversine_distance_km(a, b) < 1e-3 {
        return Bearing {
            degrees: 0.0,
            defined: false,
        };
    }
    let lat1 = a.latitude_deg.to_radians();
    let lat2 = b.latitude_deg.to_radians();
    let dlon = (b.longitude_deg - a.longitude_deg).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    Bearing {
        degrees: normalize_bearing(y.atan2(x).to_degrees()),
        defined: true,
    }
}

/// Advect `start` by the wind for `dt` seconds on the local equirectangular
/// plane (longitude meters scaled by `cos(latitude)` at the start point).
/// Altitude is unchanged.
pub fn displace(start: &GeoCoord, wind: &WindVector, dt_s: f64) -> GeoCoord {
    let dlat = wind.v_ms * dt_s / METERS_PER_DEG;
    let coslat = start.latitude_deg.to_radians().cos().max(1e-9);
    let dlon = wind.u_ms * dt_s / (METERS_PER_DEG * coslat);
    GeoCoord::new(
        start.latitude_deg + dlat,
        start.longitude_deg + dlon,
        start.altitude_m,
    )
}
