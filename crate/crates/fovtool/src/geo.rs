//! Geodetic primitives and the field-of-view domain type.
//!
//! All distances use a fixed equirectangular projection with
//! `M_LAT` = 111,320 m per degree of latitude, so a 0.0001° cell comes out
//! as ~11 m × 11 m. Longitude is scaled by the cosine of the latitude.
//! Antimeridian-crossing and polar geometry are rejected at ingestion.

use serde::Serialize;

/// Meters per degree of latitude on the equirectangular plane.
pub const M_LAT: f64 = 111_320.0;

/// Two points closer than this (in degrees, per axis) are treated as
/// coincident for bearing purposes.
pub const COINCIDENT_EPS_DEG: f64 = 1e-12;

/// A geographic coordinate in decimal degrees.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Upright (axis-aligned) bounding rectangle in degrees.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Mbr {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Mbr {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Self {
        Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat_min.is_finite()
            && self.lat_max.is_finite()
            && self.lon_min.is_finite()
            && self.lon_max.is_finite()
            && self.lat_min <= self.lat_max
            && self.lon_min <= self.lon_max
    }

    /// Closed-interval overlap test on both axes; touching edges intersect.
    pub fn intersects(&self, other: &Mbr) -> bool {
        self.lat_min <= other.lat_max
            && other.lat_min <= self.lat_max
            && self.lon_min <= other.lon_max
            && other.lon_min <= self.lon_max
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.lat_min
            && p.lat <= self.lat_max
            && p.lon >= self.lon_min
            && p.lon <= self.lon_max
    }

    /// Smallest rectangle covering both, used when packing the R-tree.
    pub fn union(&self, other: &Mbr) -> Mbr {
        Mbr {
            lat_min: self.lat_min.min(other.lat_min),
            lat_max: self.lat_max.max(other.lat_max),
            lon_min: self.lon_min.min(other.lon_min),
            lon_max: self.lon_max.max(other.lon_max),
        }
    }

    /// Intersection of two rectangles; `None` when disjoint.
    pub fn intersection(&self, other: &Mbr) -> Option<Mbr> {
        if !self.intersects(other) {
            return None;
        }
        Some(Mbr {
            lat_min: self.lat_min.max(other.lat_min),
            lat_max: self.lat_max.min(other.lat_max),
            lon_min: self.lon_min.max(other.lon_min),
            lon_max: self.lon_max.min(other.lon_max),
        })
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(
            0.5 * (self.lat_min + self.lat_max),
            0.5 * (self.lon_min + self.lon_max),
        )
    }
}

/// Free-function form of the closed-interval overlap test.
pub fn mbr_intersects(a: &Mbr, b: &Mbr) -> bool {
    a.intersects(b)
}

/// One tagged scene: camera location, azimuth, visible distance and angle.
///
/// `mbr` is always recomputed at construction; it is never trusted from
/// external input.
#[derive(Clone, Debug, Serialize)]
pub struct FoV {
    pub video_id: String,
    /// Capture time, UNIX epoch seconds.
    pub t: i64,
    /// Camera location.
    pub p: GeoPoint,
    /// Azimuth, degrees clockwise from north, in [0, 360).
    pub theta: f64,
    /// Maximum visible distance, meters.
    pub r: f64,
    /// Visible angle, degrees, in (0, 360]. 360 means a circular FoV.
    pub alpha: f64,
    pub mbr: Mbr,
}

impl FoV {
    pub fn new(video_id: String, t: i64, p: GeoPoint, theta: f64, r: f64, alpha: f64) -> Self {
        let mbr = fov_mbr(p, theta, r, alpha);
        Self {
            video_id,
            t,
            p,
            theta,
            r,
            alpha,
            mbr,
        }
    }

    /// A 360° FoV captures its entire surrounding; the angular factor is 1.
    #[inline]
    pub fn is_circular(&self) -> bool {
        self.alpha >= 360.0
    }
}

/// Equirectangular distance in meters, with longitude scaled by the cosine
/// of the midpoint latitude.
pub fn geo_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let mid_lat = 0.5 * (a.lat + b.lat);
    let dy = (b.lat - a.lat) * M_LAT;
    let dx = (b.lon - a.lon) * M_LAT * mid_lat.to_radians().cos();
    (dx * dx + dy * dy).sqrt()
}

/// Bearing from `from` to `to` in degrees, 0 = north, clockwise positive,
/// result in [0, 360). Coincident points yield 0 by definition.
pub fn bearing(from: GeoPoint, to: GeoPoint) -> f64 {
    if (to.lat - from.lat).abs() < COINCIDENT_EPS_DEG
        && (to.lon - from.lon).abs() < COINCIDENT_EPS_DEG
    {
        return 0.0;
    }
    let mid_lat = 0.5 * (from.lat + to.lat);
    let dy = (to.lat - from.lat) * M_LAT;
    let dx = (to.lon - from.lon) * M_LAT * mid_lat.to_radians().cos();
    let deg = dx.atan2(dy).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

/// Smallest angular separation of two azimuths, in [0, 180].
pub fn angular_difference(theta: f64, bearing: f64) -> f64 {
    let d = (theta - bearing).abs();
    d.min(360.0 - d)
}

/// Exact upright bounding box of the pie-shaped FoV region.
///
/// Candidate extreme points are the camera location, the two arc endpoints
/// at `theta ± alpha/2`, and each cardinal bearing inside the angular span.
/// For `alpha` = 360 the box is the square of half-width `r` around `p`.
pub fn fov_mbr(p: GeoPoint, theta: f64, r: f64, alpha: f64) -> Mbr {
    let lat_per_m = 1.0 / M_LAT;
    let lon_per_m = 1.0 / (M_LAT * p.lat.to_radians().cos());

    if alpha >= 360.0 {
        return Mbr {
            lat_min: p.lat - r * lat_per_m,
            lat_max: p.lat + r * lat_per_m,
            lon_min: p.lon - r * lon_per_m,
            lon_max: p.lon + r * lon_per_m,
        };
    }

    let mut lat_min = p.lat;
    let mut lat_max = p.lat;
    let mut lon_min = p.lon;
    let mut lon_max = p.lon;
    let mut extend = |b_deg: f64| {
        let rad = b_deg.to_radians();
        let lat = p.lat + r * rad.cos() * lat_per_m;
        let lon = p.lon + r * rad.sin() * lon_per_m;
        lat_min = lat_min.min(lat);
        lat_max = lat_max.max(lat);
        lon_min = lon_min.min(lon);
        lon_max = lon_max.max(lon);
    };

    let half = 0.5 * alpha;
    extend(theta - half);
    extend(theta + half);
    for cardinal in [0.0, 90.0, 180.0, 270.0] {
        if angular_difference(theta.rem_euclid(360.0), cardinal) <= half {
            extend(cardinal);
        }
    }

    Mbr {
        lat_min,
        lat_max,
        lon_min,
        lon_max,
    }
}
