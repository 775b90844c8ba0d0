//! Weight densities for the weighted L^p energies. A profile is any strictly
//! positive function on the truncation box; sampling normalises it into a
//! probability measure on the nodes so the p -> infinity comparison argument
//! applies verbatim at the discrete level.

use super::{bad_params, BuildCtx, Registry};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::util::compensated_sum;
use serde::Deserialize;
use serde_json::Value;

pub trait WeightProfile: Send + Sync {
    fn name(&self) -> &'static str;
    /// Density value at x; must be strictly positive and finite on the box.
    fn eval(&self, x: &[f64]) -> f64;
}

pub fn registry() -> Registry<dyn WeightProfile> {
    let mut r = Registry::new("weight");
    r.register("gaussian", build_gaussian);
    r.register("rational", build_rational);
    r
}

/// Samples the density at every node and returns the node measures
/// m_i = w_i h^n / sum_j w_j h^n, which sum to 1 up to rounding.
pub fn node_measure(w: &dyn WeightProfile, grid: &Grid) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let hn = grid.cell_volume();
    let mut raw = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        let c = grid.coord(i);
        let v = w.eval(&c[..dim]);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParam(format!(
                "weight profile {:?} is not strictly positive at {:?} (value {v})",
                w.name(),
                &c[..dim]
            )));
        }
        raw.push(v * hn);
    }
    let total = compensated_sum(raw.iter().copied());
    Ok(raw.into_iter().map(|v| v / total).collect())
}

struct Gaussian {
    inv_two_sigma_sq: f64,
}

impl WeightProfile for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2 * self.inv_two_sigma_sq).exp()
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct GaussianParams {
    sigma: Option<f64>,
}

fn build_gaussian(params: &Value, ctx: &BuildCtx) -> Result<Box<dyn WeightProfile>> {
    let p: GaussianParams = deser("gaussian", params)?;
    let sigma = p.sigma.unwrap_or(ctx.grid.half_width() / 3.0);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!(
            "gaussian weight: sigma must be positive, got {sigma}"
        )));
    }
    Ok(Box::new(Gaussian {
        inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
    }))
}

struct Rational {
    inv_scale_sq: f64,
    exponent: f64,
}

impl WeightProfile for Rational {
    fn name(&self) -> &'static str {
        "rational"
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (1.0 + r2 * self.inv_scale_sq).powf(-self.exponent)
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RationalParams {
    scale: Option<f64>,
}

fn build_rational(params: &Value, ctx: &BuildCtx) -> Result<Box<dyn WeightProfile>> {
    let p: RationalParams = deser("rational", params)?;
    let scale = p.scale.unwrap_or(1.0);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParam(format!(
            "rational weight: scale must be positive, got {scale}"
        )));
    }
    // Decay (1 + |x/scale|^2)^{-(n+2)}: integrable with room to spare, so
    // mass on the box dominates the neglected tail.
    Ok(Box::new(Rational {
        inv_scale_sq: 1.0 / (scale * scale),
        exponent: (ctx.grid.dim() + 2) as f64,
    }))
}

fn deser<'a, T: Deserialize<'a> + Default>(name: &str, params: &'a Value) -> Result<T> {
    if params.is_null() {
        return Ok(T::default());
    }
    T::deserialize(params).map_err(|e| bad_params("weight", name, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ctx() -> BuildCtx {
        BuildCtx {
            grid: Grid::new(1, 3.0, 0.25).unwrap(),
        }
    }

    #[test]
    fn measure_sums_to_one() {
        let ctx = ctx();
        for name in ["gaussian", "rational"] {
            let w = registry().build(name, &Value::Null, &ctx).unwrap();
            let m = node_measure(w.as_ref(), &ctx.grid).unwrap();
            let total = compensated_sum(m.iter().copied());
            assert!((total - 1.0).abs() < 1e-14, "{name}: total {total}");
            assert!(m.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn gaussian_default_sigma_is_third_of_half_width() {
        let ctx = ctx();
        let w = registry().build("gaussian", &Value::Null, &ctx).unwrap();
        // at |x| = L/3 the default density is e^{-1/2}
        let v = w.eval(&[1.0]);
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn explicit_sigma_respected() {
        let ctx = ctx();
        let w = registry()
            .build("gaussian", &json!({"sigma": 2.0}), &ctx)
            .unwrap();
        let v = w.eval(&[2.0]);
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rational_exponent_tracks_dimension() {
        let c1 = ctx();
        let w1 = registry().build("rational", &Value::Null, &c1).unwrap();
        assert!((w1.eval(&[1.0]) - 2f64.powi(-3)).abs() < 1e-15);
        let c2 = BuildCtx {
            grid: Grid::new(2, 1.0, 0.25).unwrap(),
        };
        let w2 = registry().build("rational", &Value::Null, &c2).unwrap();
        assert!((w2.eval(&[1.0, 0.0]) - 2f64.powi(-4)).abs() < 1e-15);
    }

    #[test]
    fn bad_params_rejected() {
        let ctx = ctx();
        assert!(registry()
            .build("gaussian", &json!({"sigma": -1.0}), &ctx)
            .is_err());
        assert!(registry()
            .build("gaussian", &json!({"sgima": 1.0}), &ctx)
            .is_err());
    }
}
