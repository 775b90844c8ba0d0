//! The fractional Laplacian, twice: a discrete lattice operator used by the
//! solver ([`operator::FracLapOperator`]) and an independent pointwise
//! quadrature oracle ([`oracle::oracle_slap`]) used to cross-check it. The
//! two routes share the normalization constant and nothing else.

pub mod cns;
pub mod kelvin;
pub mod operator;
pub mod oracle;

use crate::error::{Error, Result};
use std::sync::Arc;

/// Shared pointwise evaluator behind an [`AnalyticFn`].
pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A closed-form function of one or two variables with compactly supported
/// values, packaged with enough support geometry for the oracle to truncate
/// its integrals exactly: the support lies in the (possibly degenerate)
/// annulus `support_inner <= |x - center| <= support_outer`.
#[derive(Clone)]
pub struct AnalyticFn {
    dim: usize,
    center: [f64; 2],
    support_inner: f64,
    support_outer: f64,
    f: EvalFn,
}

impl AnalyticFn {
    pub fn new(
        dim: usize,
        center: [f64; 2],
        support_inner: f64,
        support_outer: f64,
        f: EvalFn,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParam(format!(
                "AnalyticFn dim must be 1 or 2, got {dim}"
            )));
        }
        if !(support_outer > support_inner) || support_inner < 0.0 || !support_outer.is_finite() {
            return Err(Error::InvalidParam(format!(
                "AnalyticFn support annulus [{support_inner}, {support_outer}] is empty or invalid"
            )));
        }
        Ok(AnalyticFn {
            dim,
            center,
            support_inner,
            support_outer,
            f,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn support_inner(&self) -> f64 {
        self.support_inner
    }

    pub fn support_outer(&self) -> f64 {
        self.support_outer
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.f)(x)
    }

    /// Radius Z with f(y) = 0 whenever |y - x| >= Z.
    pub fn exit_radius(&self, x: &[f64]) -> f64 {
        let d2: f64 = self
            .center()
            .iter()
            .zip(x)
            .map(|(c, xi)| (xi - c) * (xi - c))
            .sum();
        d2.sqrt() + self.support_outer
    }

    /// Distance from a point to the support annulus (0 when inside it).
    pub fn dist_to_support(&self, x: &[f64]) -> f64 {
        let d2: f64 = self
            .center()
            .iter()
            .zip(x)
            .map(|(c, xi)| (xi - c) * (xi - c))
            .sum();
        let d = d2.sqrt();
        if d < self.support_inner {
            self.support_inner - d
        } else if d > self.support_outer {
            d - self.support_outer
        } else {
            0.0
        }
    }

    /// e^{-|x|^2}. Not compactly supported; the stated outer radius 8.5
    /// truncates at e^{-72.25} ~ 4e-32, far below double rounding.
    pub fn gaussian(dim: usize) -> Self {
        AnalyticFn::new(
            dim,
            [0.0; 2],
            0.0,
            8.5,
            Arc::new(|x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (-r2).exp()
            }),
        )
        .expect("static parameters")
    }

    /// amplitude * exp(1 - 1/(1 - t^2)) with t = |x - center| / radius.
    pub fn smooth_bump(dim: usize, center: [f64; 2], radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParam(format!(
                "smooth_bump radius must be positive, got {radius}"
            )));
        }
        let c = center;
        let r2inv = 1.0 / (radius * radius);
        AnalyticFn::new(
            dim,
            center,
            0.0,
            radius,
            Arc::new(move |x: &[f64]| {
                let d2: f64 = c[..x.len()]
                    .iter()
                    .zip(x)
                    .map(|(ci, xi)| (xi - ci) * (xi - ci))
                    .sum();
                let t2 = d2 * r2inv;
                if t2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - t2)).exp()
                } else {
                    0.0
                }
            }),
        )
    }

    /// (1 - |x|^2)_+^s, the profile whose fractional Laplacian of order s is
    /// constant inside the unit ball.
    pub fn solid_profile(dim: usize, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParam(format!(
                "solid_profile: s must lie in (0, 1), got {s}"
            )));
        }
        AnalyticFn::new(
            dim,
            [0.0; 2],
            0.0,
            1.0,
            Arc::new(move |x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 < 1.0 {
                    (1.0 - r2).powf(s)
                } else {
                    0.0
                }
            }),
        )
    }
}

impl std::fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticFn")
            .field("dim", &self.dim)
            .field("center", &self.center())
            .field("support_inner", &self.support_inner)
            .field("support_outer", &self.support_outer)
            .finish_non_exhaustive()
    }
}

/// Named test functions for operator cross-checks, keyed for the CLI.
pub fn test_function(name: &str, dim: usize, s: f64) -> Result<AnalyticFn> {
    match name {
        "gaussian" => Ok(AnalyticFn::gaussian(dim)),
        "bump" => AnalyticFn::smooth_bump(dim, [0.0; 2], 1.0, 1.0),
        "offset_bump" => {
            let mut c = [0.0; 2];
            c[0] = 2.0;
            AnalyticFn::smooth_bump(dim, c, 0.75, 1.0)
        }
        "solid_profile" => AnalyticFn::solid_profile(dim, s),
        other => Err(Error::InvalidParam(format!(
            "unknown test function {other:?}; available: bump, gaussian, offset_bump, solid_profile"
        ))),
    }
}
