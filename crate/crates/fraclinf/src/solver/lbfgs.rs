//! Limited-memory BFGS with Armijo backtracking. Infinity-aware: the
//! objective may return +inf to veto a trial point (used by the p-energy to
//! reject steps that would overflow the power sum), which the line search
//! treats as "shrink and retry".

use crate::util::compensated_sum;

pub trait Objective {
    /// f(x) only; called during line search.
    fn value(&mut self, x: &[f64]) -> f64;
    /// f(x) and its gradient; called at accepted points.
    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Stop when the gradient 2-norm falls to or below this.
    pub grad_norm_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 200,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 60,
            grad_norm_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTol,
    MaxIters,
    LineSearchFailure,
    /// The objective was +inf at the start point.
    InfeasibleStart,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Observer for accepted iterates: sees (x, f, grad), returns true to stop.
pub type IterCallback<'a> = &'a mut dyn FnMut(&[f64], f64, &[f64]) -> bool;

/// Minimizes the objective from x0. The optional `accepted` callback sees
/// every accepted iterate (x, f, grad) and may stop the run early by
/// returning true.
pub fn minimize(
    obj: &mut dyn Objective,
    x0: &[f64],
    opts: &LbfgsOptions,
    mut accepted: Option<IterCallback>,
) -> LbfgsOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    if !f.is_finite() {
        return LbfgsOutcome {
            x,
            f,
            grad: g,
            iterations: 0,
            stop: StopReason::InfeasibleStart,
        };
    }
    // (s, y) pairs, newest last
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, y, 1/(y.s))
    let mut iterations = 0;
    let mut stop = StopReason::MaxIters;
    let mut skipped_updates = 0usize;

    'outer: while iterations < opts.max_iters {
        if norm2(&g) <= opts.grad_norm_tol {
            stop = StopReason::GradientTol;
            break;
        }
        // two-loop recursion for d = -H g
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = vec![0.0; pairs.len()];
        for (k, (sk, yk, inv_ys)) in pairs.iter().enumerate().rev() {
            let a = inv_ys * dot(sk, &d);
            alphas[k] = a;
            for i in 0..n {
                d[i] -= a * yk[i];
            }
        }
        if let Some((sk, yk, _)) = pairs.last() {
            let gamma = dot(sk, yk) / dot(yk, yk);
            for v in d.iter_mut() {
                *v *= gamma;
            }
        }
        for (k, (sk, yk, inv_ys)) in pairs.iter().enumerate() {
            let b = inv_ys * dot(yk, &d);
            let a = alphas[k];
            for i in 0..n {
                d[i] += (a - b) * sk[i];
            }
        }

        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            // not a descent direction: drop the history, go steepest
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            gd = -dot(&g, &g);
        }

        // Armijo backtracking, with a rounding-floor fallback: when the
        // requested sufficient decrease is below the objective's value
        // resolution, Armijo cannot certify progress even at a genuinely
        // better point. There, accept on a curvature window measured with
        // analytic gradients: |g(xt).d| <= 0.9 |g.d| marks an approximate
        // minimizer along the ray and implies y.s > 0 for the update pair.
        let eps_f = 16.0 * f64::EPSILON * f.abs();
        let mut t = 1.0;
        let mut accepted_step = false;
        let mut xt = vec![0.0; n];
        let mut trial_grad: Option<(f64, Vec<f64>)> = None;
        for _ in 0..=opts.max_backtracks {
            for i in 0..n {
                xt[i] = x[i] + t * d[i];
            }
            let ft = obj.value(&xt);
            if ft.is_finite() && ft <= f + opts.armijo_c1 * t * gd {
                accepted_step = true;
                trial_grad = None;
                break;
            }
            if ft.is_finite() && (opts.armijo_c1 * t * gd).abs() <= eps_f && ft <= f + eps_f {
                let mut gt = vec![0.0; n];
                let ft2 = obj.value_grad(&xt, &mut gt);
                if ft2.is_finite() && dot(&gt, &d).abs() <= 0.9 * gd.abs() {
                    accepted_step = true;
                    trial_grad = Some((ft2, gt));
                    break;
                }
            }
            t *= opts.backtrack_factor;
        }
        if !accepted_step {
            if !pairs.is_empty() {
                // retry from steepest descent before giving up
                pairs.clear();
                continue;
            }
            stop = StopReason::LineSearchFailure;
            break;
        }

        let (f_new, g_new) = match trial_grad {
            Some((ft, gt)) => (ft, gt),
            None => {
                let mut gt = vec![0.0; n];
                let ft = obj.value_grad(&xt, &mut gt);
                (ft, gt)
            }
        };
        iterations += 1;

        let s: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let ys = dot(&y, &s);
        // curvature guard: keep the inverse-Hessian model positive definite
        if ys > 1e-10 * norm2(&y) * norm2(&s) {
            if pairs.len() == opts.memory {
                pairs.remove(0);
            }
            pairs.push((s, y, 1.0 / ys));
            skipped_updates = 0;
        } else {
            // Armijo alone does not guarantee positive curvature; if updates
            // keep failing, the retained pairs (and their gamma scaling) are
            // stale and throttle the step length, so drop them.
            skipped_updates += 1;
            if skipped_updates >= 3 {
                pairs.clear();
                skipped_updates = 0;
            }
        }
        x = xt;
        f = f_new;
        g = g_new;

        if let Some(cb) = accepted.as_deref_mut() {
            if cb(&x, f, &g) {
                stop = StopReason::GradientTol;
                break 'outer;
            }
        }
    }
    if iterations >= opts.max_iters
        && stop == StopReason::MaxIters
        && norm2(&g) <= opts.grad_norm_tol
    {
        stop = StopReason::GradientTol;
    }
    LbfgsOutcome {
        x,
        f,
        grad: g,
        iterations,
        stop,
    }
}
