//! Exterior (Dirichlet) data profiles. A profile produces node samples of the
//! constrained data g; a run's exterior data is a sum of profile terms. The
//! data must vanish on Omega, where u is free.

use super::{bad_params, BuildCtx, Registry};
use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub trait ExteriorProfile: Send + Sync {
    fn name(&self) -> &'static str;
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>>;
}

pub fn registry() -> Registry<dyn ExteriorProfile> {
    let mut r = Registry::new("exterior");
    r.register("smooth_bump", build_smooth_bump);
    r.register("polynomial_spline", build_polynomial_spline);
    r.register("custom_samples", build_custom_samples);
    r
}

/// One additive term of the exterior data, as it appears in config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorTermSpec {
    pub profile: String,
    #[serde(default)]
    pub params: Value,
}

/// Builds and sums all terms, then checks the support constraint: the data
/// must vanish at every node of the open set Omega (including boundary-cell
/// nodes that the solver treats as constrained).
pub fn sample_terms(
    reg: &Registry<dyn ExteriorProfile>,
    terms: &[ExteriorTermSpec],
    domain: &DomainSpec,
) -> Result<Vec<f64>> {
    let grid = &domain.grid;
    let ctx = BuildCtx { grid: *grid };
    let mut g = vec![0.0; grid.node_count()];
    for term in terms {
        let p = reg.build(&term.profile, &term.params, &ctx)?;
        let sampled = p.sample(grid)?;
        for (gi, si) in g.iter_mut().zip(&sampled) {
            *gi += si;
        }
    }
    for (i, gi) in g.iter().enumerate() {
        let c = grid.coord(i);
        if domain.shape.contains(&c[..grid.dim()]) && *gi != 0.0 {
            return Err(Error::SupportViolation(format!(
                "exterior data is nonzero at {:?}, which lies in omega",
                &c[..grid.dim()]
            )));
        }
    }
    Ok(g)
}

fn bump_distance_sq(center: &[f64], x: &[f64]) -> f64 {
    center
        .iter()
        .zip(x)
        .map(|(c, xi)| (xi - c) * (xi - c))
        .sum()
}

struct SmoothBump {
    center: Vec<f64>,
    radius: f64,
    amplitude: f64,
}

impl ExteriorProfile for SmoothBump {
    fn name(&self) -> &'static str {
        "smooth_bump"
    }
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let dim = grid.dim();
        Ok((0..grid.node_count())
            .map(|i| {
                let c = grid.coord(i);
                let t2 = bump_distance_sq(&self.center, &c[..dim]) / (self.radius * self.radius);
                if t2 < 1.0 {
                    self.amplitude * (1.0 - 1.0 / (1.0 - t2)).exp()
                } else {
                    0.0
                }
            })
            .collect())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BumpParams {
    center: Vec<f64>,
    radius: f64,
    #[serde(default = "one")]
    amplitude: f64,
}

fn one() -> f64 {
    1.0
}

fn check_bump(name: &str, p: &BumpParams, ctx: &BuildCtx) -> Result<()> {
    if p.center.len() != ctx.grid.dim() {
        return Err(Error::InvalidParam(format!(
            "{name}: center has {} coordinates, grid dim is {}",
            p.center.len(),
            ctx.grid.dim()
        )));
    }
    if !(p.radius > 0.0) || !p.radius.is_finite() {
        return Err(Error::InvalidParam(format!(
            "{name}: radius must be positive, got {}",
            p.radius
        )));
    }
    if !p.amplitude.is_finite() {
        return Err(Error::InvalidParam(format!(
            "{name}: amplitude must be finite, got {}",
            p.amplitude
        )));
    }
    // The support must sit inside the truncation box with at least one cell
    // of margin: competitors vanish beyond the box, so this keeps the zero
    // extension exact rather than a modelling error.
    let margin = ctx.grid.half_width() - ctx.grid.spacing();
    for (k, c) in p.center.iter().enumerate() {
        if c.abs() + p.radius > margin {
            return Err(Error::InvalidParam(format!(
                "{name}: support [center {c} +- radius {}] on axis {k} leaves \
                 the grid box (needs margin of one cell, |x| <= {margin})",
                p.radius
            )));
        }
    }
    Ok(())
}

fn build_smooth_bump(params: &Value, ctx: &BuildCtx) -> Result<Box<dyn ExteriorProfile>> {
    let p: BumpParams =
        BumpParams::deserialize(params).map_err(|e| bad_params("exterior", "smooth_bump", e))?;
    check_bump("smooth_bump", &p, ctx)?;
    Ok(Box::new(SmoothBump {
        center: p.center,
        radius: p.radius,
        amplitude: p.amplitude,
    }))
}

struct PolynomialSpline {
    center: Vec<f64>,
    radius: f64,
    amplitude: f64,
    power: i32,
}

impl ExteriorProfile for PolynomialSpline {
    fn name(&self) -> &'static str {
        "polynomial_spline"
    }
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let dim = grid.dim();
        Ok((0..grid.node_count())
            .map(|i| {
                let c = grid.coord(i);
                let t2 = bump_distance_sq(&self.center, &c[..dim]) / (self.radius * self.radius);
                if t2 < 1.0 {
                    self.amplitude * (1.0 - t2).powi(self.power)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SplineParams {
    center: Vec<f64>,
    radius: f64,
    #[serde(default = "one")]
    amplitude: f64,
    #[serde(default = "three")]
    power: u32,
}

fn three() -> u32 {
    3
}

fn build_polynomial_spline(params: &Value, ctx: &BuildCtx) -> Result<Box<dyn ExteriorProfile>> {
    let p: SplineParams = SplineParams::deserialize(params)
        .map_err(|e| bad_params("exterior", "polynomial_spline", e))?;
    let bp = BumpParams {
        center: p.center,
        radius: p.radius,
        amplitude: p.amplitude,
    };
    check_bump("polynomial_spline", &bp, ctx)?;
    // power >= 3 keeps two derivatives continuous across the support edge,
    // which the operator's consistency rate relies on.
    if p.power < 3 {
        return Err(Error::InvalidParam(format!(
            "polynomial_spline: power must be >= 3, got {}",
            p.power
        )));
    }
    Ok(Box::new(PolynomialSpline {
        center: bp.center,
        radius: bp.radius,
        amplitude: bp.amplitude,
        power: p.power as i32,
    }))
}

struct CustomSamples {
    values: Vec<f64>,
}

impl ExteriorProfile for CustomSamples {
    fn name(&self) -> &'static str {
        "custom_samples"
    }
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if self.values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "custom_samples: {} values, grid has {} nodes",
                self.values.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "custom_samples: non-finite value {bad}"
            )));
        }
        Ok(self.values.clone())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    values: Vec<f64>,
}

fn build_custom_samples(params: &Value, _ctx: &BuildCtx) -> Result<Box<dyn ExteriorProfile>> {
    let p: CustomParams = CustomParams::deserialize(params)
        .map_err(|e| bad_params("exterior", "custom_samples", e))?;
    Ok(Box::new(CustomSamples { values: p.values }))
}
