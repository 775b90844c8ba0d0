//! Independent pointwise evaluation of (-Delta)^s f at a point, by adaptive
//! Gauss-Kronrod quadrature of a radial difference quotient. This route
//! shares no code with the lattice operator: it exists to cross-check it.
//!
//! The integrand uses the 4th-order central difference
//!   D4 f(x; z) = 6 f(x) - 4 f(x+z) - 4 f(x-z) + f(x+2z) + f(x-2z),
//! whose Fourier symbol is 4 (1 - cos(xi . z))^2, giving
//!   (-Delta)^s f(x) = c_{n,s} / rho(s) * int_0^inf D4 f(x; z e) z^{-1-2s} dz
//! per direction e, with rho(s) = 4 - 2^{2s}. Compared with the plain second
//! difference, D4 = O(z^4) keeps the integrand z^{3-2s}, nonsingular for all
//! s in (0, 1), and pushes the roundoff/truncation floor down to roughly
//! eps^{(4-2s)/4}: without this, cancellation noise makes s >= 1/2 hopeless
//! in doubles.

use super::cns::normalization_constant;
use super::AnalyticFn;
use crate::error::{Error, Result};
use crate::util::compensated_sum;
use std::cell::RefCell;
use std::f64::consts::PI;

/// Kronrod 15-point abscissae on [0, 1] side (positive half; last is 0).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights matching XGK.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Embedded 7-point Gauss weights: nodes XGK[1], XGK[3], XGK[5] (plus/minus)
/// and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7-15 panel: returns (Kronrod value, |K - G| estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let hl = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let dx = hl * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        resk += WGK[j] * pair;
        if j % 2 == 1 {
            resg += WG[j / 2] * pair;
        }
    }
    (resk * hl, ((resk - resg) * hl).abs())
}

pub(crate) struct QuadTol {
    pub epsabs: f64,
    pub epsrel: f64,
    pub max_panels: usize,
}

// Requested accuracies sit above the scheme's roundoff floor (~1e-10 at the
// worst s) so the refinement loop terminates instead of chasing noise.
const RADIAL_TOL: QuadTol = QuadTol {
    epsabs: 1e-12,
    epsrel: 1e-10,
    max_panels: 800,
};

const ANGULAR_TOL: QuadTol = QuadTol {
    epsabs: 1e-11,
    epsrel: 1e-9,
    max_panels: 400,
};

/// Globally adaptive GK 7-15 over a list of initial segments: repeatedly
/// bisects the segment with the largest error estimate. The initial
/// breakpoints must include any radius where the integrand's support starts
/// or ends, otherwise a sliver can be missed entirely.
pub(crate) fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    breakpoints: &[f64],
    tol: &QuadTol,
) -> Result<(f64, f64)> {
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(f, w[0], w[1]);
            panels.push((w[0], w[1], v, e));
        }
    }
    if panels.is_empty() {
        return Ok((0.0, 0.0));
    }
    let span: f64 = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    loop {
        // Exact re-summation every round is O(panels); with the panel cap in
        // the hundreds this stays cheap and avoids incremental-drift bugs.
        let val = compensated_sum(panels.iter().map(|p| p.2));
        let err = compensated_sum(panels.iter().map(|p| p.3));
        if !val.is_finite() {
            return Err(Error::InvalidParam(
                "quadrature integrand produced a non-finite value".into(),
            ));
        }
        if err <= tol.epsabs.max(tol.epsrel * val.abs()) {
            return Ok((val, err));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty");
        let (a, b, _, _) = panels.swap_remove(worst);
        if b - a <= 1e-15 * span {
            // Refinement has stalled on a kink; report what was achieved.
            return Ok((val, err));
        }
        if panels.len() + 2 > tol.max_panels {
            return Err(Error::QuadratureNoConverge {
                value: val,
                achieved: err,
                requested: tol.epsabs.max(tol.epsrel * val.abs()),
            });
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
    }
}

/// rho(s) = 4 - 2^{2s}: the symbol ratio between the 4th-order and 2nd-order
/// central differences. Positive on (0, 1).
fn rho(s: f64) -> f64 {
    4.0 - 4f64.powf(s)
}

/// int_{z_floor}^{Z} D4 f(x; z e) z^{-1-2s} dz plus the closed-form tail
/// 6 f(x) Z^{-2s} / (2s), where Z is past the support in every direction.
fn radial_integral(
    f: &AnalyticFn,
    x: &[f64],
    dir: &[f64],
    s: f64,
    fx: f64,
    z_exit: f64,
) -> Result<f64> {
    // Below z_floor the true D4 ~ z^4 signal drowns in rounding noise;
    // truncating there costs O(z_floor^{4-2s}), about 1e-10 at worst.
    let z_floor = f64::EPSILON.powf(0.25) * (0.25 * z_exit).max(1.0);
    let dim = f.dim();
    let integrand = |z: f64| {
        let mut p = [0.0; 2];
        let mut m = [0.0; 2];
        let mut p2 = [0.0; 2];
        let mut m2 = [0.0; 2];
        for k in 0..dim {
            p[k] = x[k] + z * dir[k];
            m[k] = x[k] - z * dir[k];
            p2[k] = x[k] + 2.0 * z * dir[k];
            m2[k] = x[k] - 2.0 * z * dir[k];
        }
        let d4 = 6.0 * fx - 4.0 * (f.eval(&p[..dim]) + f.eval(&m[..dim]))
            + f.eval(&p2[..dim])
            + f.eval(&m2[..dim]);
        d4 * z.powf(-1.0 - 2.0 * s)
    };
    // Breakpoints where some difference term can enter or leave the support.
    let d = f.dist_to_support(x);
    let mut bps = vec![z_floor, z_exit];
    for b in [d / 2.0, d, z_exit / 2.0, 1.0f64.min(0.5 * z_exit)] {
        if b > z_floor && b < z_exit {
            bps.push(b);
        }
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let (body, _) = adaptive_gk(&integrand, &bps, &RADIAL_TOL)?;
    let tail = 6.0 * fx * z_exit.powf(-2.0 * s) / (2.0 * s);
    Ok(body + tail)
}

/// Pointwise (-Delta)^s f(x) by adaptive quadrature. Valid for s in (0, 1)
/// in both dimensions; accuracy is roughly 1e-10 relative for smooth f,
/// degrading gracefully when f has Holder kinks at its support edge.
pub fn oracle_slap(f: &AnalyticFn, x: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParam(format!(
            "oracle: s must lie in (0, 1), got {s}"
        )));
    }
    if x.len() != f.dim() {
        return Err(Error::InvalidParam(format!(
            "oracle: point has {} coordinates, function dim is {}",
            x.len(),
            f.dim()
        )));
    }
    let c = normalization_constant(f.dim(), s);
    let fx = f.eval(x);
    let z_exit = f.exit_radius(x).max(1e-6);
    match f.dim() {
        1 => {
            let v = radial_integral(f, x, &[1.0], s, fx, z_exit)?;
            Ok(c / rho(s) * v)
        }
        _ => {
            // value = c/rho * int_0^pi radial(theta) dtheta; radial is
            // pi-periodic because D4 is symmetric under e -> -e.
            let inner_err: RefCell<Option<Error>> = RefCell::new(None);
            let integrand = |theta: f64| -> f64 {
                let dir = [theta.cos(), theta.sin()];
                match radial_integral(f, x, &dir, s, fx, z_exit) {
                    Ok(v) => v,
                    Err(e) => {
                        inner_err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            };
            // When x sees the support under a narrow cone, seed breakpoints
            // at the cone edges so the first panels cannot miss it.
            let mut bps = vec![0.0, PI];
            let dx = f.center()[0] - x[0];
            let dy = f.center()[1] - x[1];
            let dist = (dx * dx + dy * dy).sqrt();
            if dist > f.support_outer() {
                let phi = dy.atan2(dx).rem_euclid(PI);
                let alpha = (f.support_outer() / dist).asin();
                for k in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                    let b = (phi + 1.2 * alpha * k).rem_euclid(PI);
                    if b > 0.0 && b < PI {
                        bps.push(b);
                    }
                }
            }
            bps.sort_by(f64::total_cmp);
            bps.dedup();
            let (ang, _) = adaptive_gk(&integrand, &bps, &ANGULAR_TOL)?;
            if let Some(e) = inner_err.into_inner() {
                return Err(e);
            }
            Ok(c / rho(s) * ang)
        }
    }
}
