//! WGS84 coordinates and great-circle distance.
//!
//! Distances use the spherical arc-cosine formula with a mean Earth radius
//! of 6371 km. The error vs. a true ellipsoidal geodesic is below 0.5%,
//! well under the shadowing noise this crate models.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A geographic position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// Latitude in decimal degrees, in `[-90, +90]`.
    pub lat_deg: f64,
    /// Longitude in decimal degrees, in `[-180, +180]`.
    pub lon_deg: f64,
}

impl GeoPoint {
    /// Builds a point, checking the coordinate ranges. Returns `None` when
    /// either coordinate is out of range or non-finite.
    pub fn new(lat_deg: f64, lon_deg: f64) -> Option<Self> {
        let p = Self { lat_deg, lon_deg };
        p.is_valid().then_some(p)
    }

    /// Whether both coordinates are finite and within range.
    pub fn is_valid(&self) -> bool {
        self.lat_deg.is_finite()
            && self.lon_deg.is_finite()
            && (-90.0..=90.0).contains(&self.lat_deg)
            && (-180.0..=180.0).contains(&self.lon_deg)
    }
}

/// Spherical Earth model: radius and the degrees-to-radians factor.
#[derive(Debug, Clone, Copy)]
pub struct EarthModel {
    /// Sphere radius in meters.
    pub radius_m: f64,
    /// Degrees-to-radians conversion constant.
    pub deg_to_rad: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            radius_m: EARTH_RADIUS_M,
            deg_to_rad: std::f64::consts::PI / 180.0,
        }
    }
}

impl EarthModel {
    /// Great-circle distance in meters between two points on this sphere.
    ///
    /// The arc-cosine argument is clamped to `[-1, 1]`: near-coincident
    /// points can push it past 1 in floating point, which would yield NaN.
    pub fn distance_m(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        let c = self.deg_to_rad;
        let (lat_a, lat_b) = (c * a.lat_deg, c * b.lat_deg);
        let dlon = c * (a.lon_deg - b.lon_deg);
        let cos_arc = lat_a.sin() * lat_b.sin() + lat_a.cos() * lat_b.cos() * dlon.cos();
        self.radius_m * cos_arc.clamp(-1.0, 1.0).acos()
    }
}

/// Great-circle distance in meters on the default Earth model.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    EarthModel::default().distance_m(a, b)
}
