//! Supremand transforms: the scalar function F applied to the operator value
//! before the weighted norm, so the objective is || F(x, A u) || in the
//! weighted L^p norm. F(x, 0) = 0 and F' bounded between positive constants;
//! the identity recovers the plain norm and its exact duality identities.

use super::{bad_params, BuildCtx, Registry};
use crate::error::{Error, Result};
use serde::Deserialize;
use serde_json::Value;

pub trait Supremand: Send + Sync {
    fn name(&self) -> &'static str;
    fn eval(&self, x: &[f64], xi: f64) -> f64;
    /// Partial derivative in xi.
    fn dxi(&self, x: &[f64], xi: f64) -> f64;
    /// c with F'(x, xi) >= c > 0 everywhere.
    fn slope_lower_bound(&self) -> f64;
    /// C with F'(x, xi) <= C everywhere; the dual mass bound is
    /// sum |f| h^n <= C, with C = 1 in the identity case.
    fn slope_upper_bound(&self) -> f64;
    fn is_identity(&self) -> bool {
        false
    }
}

pub fn registry() -> Registry<dyn Supremand> {
    let mut r = Registry::new("supremand");
    r.register("identity", build_identity);
    r.register("tanh_tilt", build_tanh_tilt);
    r
}

struct Identity;

impl Supremand for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn eval(&self, _x: &[f64], xi: f64) -> f64 {
        xi
    }
    fn dxi(&self, _x: &[f64], _xi: f64) -> f64 {
        1.0
    }
    fn slope_lower_bound(&self) -> f64 {
        1.0
    }
    fn slope_upper_bound(&self) -> f64 {
        1.0
    }
    fn is_identity(&self) -> bool {
        true
    }
}

fn build_identity(params: &Value, _ctx: &BuildCtx) -> Result<Box<dyn Supremand>> {
    if !params.is_null() && params != &Value::Object(serde_json::Map::new()) {
        return Err(Error::InvalidParam(
            "identity supremand takes no params".into(),
        ));
    }
    Ok(Box::new(Identity))
}

/// F(xi) = xi + beta * ln cosh(xi): smooth, F(0) = 0, slope in
/// [1 - beta, 1 + beta]. Breaks the odd symmetry of the identity, which
/// exercises the solver away from the self-dual case.
struct TanhTilt {
    beta: f64,
}

/// ln cosh(xi) without overflow: |xi| - ln 2 + ln(1 + e^{-2|xi|}).
fn ln_cosh(xi: f64) -> f64 {
    let a = xi.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

impl Supremand for TanhTilt {
    fn name(&self) -> &'static str {
        "tanh_tilt"
    }
    fn eval(&self, _x: &[f64], xi: f64) -> f64 {
        xi + self.beta * ln_cosh(xi)
    }
    fn dxi(&self, _x: &[f64], xi: f64) -> f64 {
        1.0 + self.beta * xi.tanh()
    }
    fn slope_lower_bound(&self) -> f64 {
        1.0 - self.beta
    }
    fn slope_upper_bound(&self) -> f64 {
        1.0 + self.beta
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct TanhTiltParams {
    beta: Option<f64>,
}

fn build_tanh_tilt(params: &Value, _ctx: &BuildCtx) -> Result<Box<dyn Supremand>> {
    let p: TanhTiltParams = if params.is_null() {
        TanhTiltParams::default()
    } else {
        TanhTiltParams::deserialize(params).map_err(|e| bad_params("supremand", "tanh_tilt", e))?
    };
    let beta = p.beta.unwrap_or(0.25);
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParam(format!(
            "tanh_tilt: beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(Box::new(TanhTilt { beta }))
}
