//! Gaussian capture-intention model.
//!
//! An FoV's contribution to a cell is the product of an angular factor and
//! a distance factor, each a truncated Gaussian density evaluated in the
//! model's native units (degrees for the angular factor, meters for the
//! distance factor). Circular FoVs have angular intention identically 1,
//! which allows skipping the angular computation entirely.

use serde::Serialize;

use crate::geo::{angular_difference, bearing, geo_distance, FoV, GeoPoint, COINCIDENT_EPS_DEG};

/// Spread parameters of the two Gaussian factors.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct ModelParams {
    /// Angular spread, degrees.
    pub sigma_a: f64,
    /// Distance spread, meters.
    pub sigma_d: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            sigma_a: 15.0,
            sigma_d: 25.0,
        }
    }
}

impl ModelParams {
    pub fn is_valid(&self) -> bool {
        self.sigma_a.is_finite()
            && self.sigma_d.is_finite()
            && self.sigma_a > 0.0
            && self.sigma_d > 0.0
    }
}

#[inline]
fn gaussian(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

#[inline]
fn angular_delta(fov: &FoV, target: GeoPoint) -> f64 {
    // Target coincident with the camera: maximal intention by definition.
    if (target.lat - fov.p.lat).abs() < COINCIDENT_EPS_DEG
        && (target.lon - fov.p.lon).abs() < COINCIDENT_EPS_DEG
    {
        return 0.0;
    }
    angular_difference(fov.theta, bearing(fov.p, target))
}

/// Angular capture intention. Exactly 1 for circular FoVs; otherwise the
/// truncated Gaussian of the angular difference, zero outside `alpha/2`.
pub fn ci_angular(fov: &FoV, target: GeoPoint, params: &ModelParams) -> f64 {
    if fov.is_circular() {
        return 1.0;
    }
    let delta = angular_delta(fov, target);
    if delta <= 0.5 * fov.alpha {
        gaussian(delta, params.sigma_a)
    } else {
        0.0
    }
}

/// Distance capture intention: truncated Gaussian of the camera-to-target
/// distance, zero beyond the visible distance `r`.
pub fn ci_distance(fov: &FoV, target: GeoPoint, params: &ModelParams) -> f64 {
    let d = geo_distance(fov.p, target);
    if d <= fov.r {
        gaussian(d, params.sigma_d)
    } else {
        0.0
    }
}

/// Capture intention of one FoV for one target, with the circular-FoV
/// shortcut: for `alpha` = 360 the angular factor is skipped entirely.
pub fn ci(fov: &FoV, target: GeoPoint, params: &ModelParams) -> f64 {
    if fov.is_circular() {
        return ci_distance(fov, target, params);
    }
    let a = ci_angular(fov, target, params);
    if a == 0.0 {
        return 0.0;
    }
    a * ci_distance(fov, target, params)
}

/// Capture intention evaluated without the shortcut: the angular factor is
/// always computed (bearing and angular difference included) even when the
/// FoV is circular and the factor is constant 1. Produces bit-identical
/// values to [`ci`]; exists so the cost of the shortcut can be measured.
pub fn ci_literal(fov: &FoV, target: GeoPoint, params: &ModelParams) -> f64 {
    let delta = angular_delta(fov, target);
    let a = if fov.is_circular() {
        1.0
    } else if delta <= 0.5 * fov.alpha {
        gaussian(delta, params.sigma_a)
    } else {
        0.0
    };
    if a == 0.0 {
        return 0.0;
    }
    a * ci_distance(fov, target, params)
}
