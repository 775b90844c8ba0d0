//! The s-Kelvin transform: inversion through a sphere with the weight that
//! intertwines (-Delta)^s. Supplies the verification suite with test
//! functions whose fractional Laplacian is known by reflection.
//!
//! For K(y) = x0 + r^2 (y - x0)/|y - x0|^2 and
//!   u_K(y) = (r / |y - x0|)^{n - 2s} u(K(y)),
//! the identity is
//!   (-Delta)^s u_K(y) = (r / |y - x0|)^{n + 2s} ((-Delta)^s u)(K(y)).

use super::AnalyticFn;
use crate::error::{Error, Result};
use std::sync::Arc;

/// Image of a point under inversion in the sphere |y - center| = radius.
/// The center itself has no image; it is the caller's responsibility to
/// keep arguments away from it.
pub fn kelvin_point(center: &[f64], radius: f64, y: &[f64]) -> [f64; 2] {
    let mut d2 = 0.0;
    for k in 0..y.len() {
        let d = y[k] - center[k];
        d2 += d * d;
    }
    let scale = radius * radius / d2;
    let mut out = [0.0; 2];
    for k in 0..y.len() {
        out[k] = center[k] + scale * (y[k] - center[k]);
    }
    out
}

/// Kelvin transform of a compactly supported function. Requires the support
/// to stay away from the inversion center: only then is the transform again
/// compactly supported (the support annulus [a, b] around the center maps to
/// [r^2/b, r^2/a]).
pub fn kelvin_transform(
    f: &AnalyticFn,
    center: [f64; 2],
    radius: f64,
    s: f64,
) -> Result<AnalyticFn> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParam(format!(
            "kelvin: radius must be positive, got {radius}"
        )));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParam(format!(
            "kelvin: s must lie in (0, 1), got {s}"
        )));
    }
    let dim = f.dim();
    let dmin = f.dist_to_support(&center[..dim]);
    if !(dmin > 0.0) {
        return Err(Error::SupportViolation(
            "kelvin: the support must exclude the inversion center".into(),
        ));
    }
    let dc: f64 = f
        .center()
        .iter()
        .zip(&center[..dim])
        .map(|(cf, c0)| (cf - c0) * (cf - c0))
        .sum::<f64>()
        .sqrt();
    let dmax = dc + f.support_outer();
    let inner = f.clone();
    let exponent = dim as f64 - 2.0 * s;
    let g = move |y: &[f64]| -> f64 {
        let mut d2 = 0.0;
        for k in 0..y.len() {
            let d = y[k] - center[k];
            d2 += d * d;
        }
        if d2 == 0.0 {
            return 0.0;
        }
        let scale = radius * radius / d2;
        let mut ky = [0.0; 2];
        for k in 0..y.len() {
            ky[k] = center[k] + scale * (y[k] - center[k]);
        }
        (radius / d2.sqrt()).powf(exponent) * inner.eval(&ky[..y.len()])
    };
    AnalyticFn::new(
        dim,
        center,
        radius * radius / dmax,
        radius * radius / dmin,
        Arc::new(g),
    )
}

/// The prefactor relating the two sides of the reflection identity:
/// (-Delta)^s u_K(y) = reflection_factor * ((-Delta)^s u)(K(y)).
pub fn reflection_factor(center: &[f64], radius: f64, s: f64, y: &[f64]) -> f64 {
    let d2: f64 = center
        .iter()
        .zip(y)
        .map(|(c, yi)| (yi - c) * (yi - c))
        .sum();
    (radius / d2.sqrt()).powf(y.len() as f64 + 2.0 * s)
}
