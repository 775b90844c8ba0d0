//! The p-continuation solver: minimize the weighted L^p norm of F(x, A u)
//! over fields that agree with the exterior data outside Omega, warm-starting
//! each p from the previous one along an increasing schedule. The weighted
//! norms are a probability-measure mean, so e_p grows in p toward the sup
//! norm and the p -> infinity limit is the minimal-sup-norm solution.

pub mod lbfgs;

use crate::dual;
use crate::error::{Error, Result};
use crate::fraclap::operator::{FracLapOperator, OperatorMode};
use crate::grid::DomainSpec;
use crate::profiles::supremand::Supremand;
use crate::profiles::weight::{node_measure, WeightProfile};
use crate::util::compensated_sum;
use lbfgs::{LbfgsOptions, Objective, StopReason};

/// Exponent of the largest power-sum term allowed before a trial point is
/// vetoed with +inf; e^600 is safely below the f64 overflow threshold.
const POWER_GUARD: f64 = 600.0;

pub struct Problem {
    pub domain: DomainSpec,
    pub op: FracLapOperator,
    /// Node measures m_i = w_i h^n / sum w h^n.
    pub measure: Vec<f64>,
    pub supremand: Box<dyn Supremand>,
    /// Exterior data at every node; zero at interior nodes by construction.
    pub exterior: Vec<f64>,
    /// True when the exterior data vanishes identically: the minimizer is 0.
    pub degenerate: bool,
}

impl Problem {
    pub fn assemble(
        domain: DomainSpec,
        s: f64,
        weight: &dyn WeightProfile,
        supremand: Box<dyn Supremand>,
        exterior: Vec<f64>,
    ) -> Result<Self> {
        let n = domain.grid.dim() as f64;
        // Standing hypothesis n > 2s: below it the exterior-data problem
        // loses the decay that makes the sup-norm minimization well posed.
        if 2.0 * s >= n {
            return Err(Error::InvalidParam(format!(
                "requires n > 2s: dim {} with s = {s}",
                domain.grid.dim()
            )));
        }
        if exterior.len() != domain.grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "exterior data has {} values, grid has {} nodes",
                exterior.len(),
                domain.grid.node_count()
            )));
        }
        for &i in domain.interior_nodes() {
            if exterior[i] != 0.0 {
                return Err(Error::SupportViolation(format!(
                    "exterior data nonzero at interior node {i}"
                )));
            }
        }
        let degenerate = exterior.iter().all(|&v| v == 0.0);
        let op = FracLapOperator::build(&domain.grid, s, OperatorMode::WithTail)?;
        let measure = node_measure(weight, &domain.grid)?;
        Ok(Problem {
            domain,
            op,
            measure,
            supremand,
            exterior,
            degenerate,
        })
    }

    pub fn interior_count(&self) -> usize {
        self.domain.interior_count()
    }

    /// Exterior data with the interior slots replaced by the unknowns.
    pub fn full_field(&self, interior: &[f64]) -> Vec<f64> {
        debug_assert_eq!(interior.len(), self.interior_count());
        let mut full = self.exterior.clone();
        for (k, &i) in self.domain.interior_nodes().iter().enumerate() {
            full[i] = interior[k];
        }
        full
    }

    pub fn interior_of(&self, full: &[f64]) -> Vec<f64> {
        self.domain
            .interior_nodes()
            .iter()
            .map(|&i| full[i])
            .collect()
    }

    /// F(x_i, (A u)_i) at every node.
    pub fn supremand_values(&self, au: &[f64]) -> Vec<f64> {
        let grid = &self.domain.grid;
        let dim = grid.dim();
        (0..au.len())
            .map(|i| {
                let c = grid.coord(i);
                self.supremand.eval(&c[..dim], au[i])
            })
            .collect()
    }

    /// E_p(u) = (sum_i m_i |F_i|^p)^{1/p}, evaluated in scaled form so large
    /// p cannot overflow the power sum.
    pub fn energy_from_supremand(&self, fv: &[f64], p: f64) -> f64 {
        let mx = fv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if mx == 0.0 {
            return 0.0;
        }
        let s = compensated_sum(fv.iter().zip(&self.measure).map(|(v, m)| {
            let r = v.abs() / mx;
            if r > 0.0 {
                m * (p * r.ln()).exp()
            } else {
                0.0
            }
        }));
        mx * (s.ln() / p).exp()
    }

    pub fn energy(&self, au: &[f64], p: f64) -> f64 {
        self.energy_from_supremand(&self.supremand_values(au), p)
    }
}

/// Frozen-scale stage objective for a given p, normalized at the energy of
/// the reference interior point. Exposed so callers (and tests) can probe
/// values and gradients of exactly what the solver minimizes.
pub fn stage_objective_at<'a>(
    prob: &'a Problem,
    p: f64,
    reference_interior: &[f64],
) -> Result<impl Objective + 'a> {
    let full = prob.full_field(reference_interior);
    let au = prob.op.apply_values(&full)?;
    let ehat = prob.energy(&au, p);
    if ehat <= 0.0 {
        return Err(Error::TrivialData(
            "stage objective undefined: e_p = 0 at the reference point".into(),
        ));
    }
    Ok(StageObjective {
        prob,
        p,
        ehat,
        applies: 0,
    })
}

/// Stage objective at frozen scale: phi(v) = sum_i m_i (|F_i| / ehat)^p.
/// Its gradient in the interior unknowns is (p / ehat) A(psi) with
/// psi_i = m_i (|F_i|/ehat)^{p-1} sign(F_i) F'_i, using the symmetry of A.
struct StageObjective<'a> {
    prob: &'a Problem,
    p: f64,
    ehat: f64,
    applies: usize,
}

impl StageObjective<'_> {
    fn phi_of(&self, fv: &[f64]) -> f64 {
        let mut overflow = false;
        let v = compensated_sum(fv.iter().zip(&self.prob.measure).map(|(v, m)| {
            let r = v.abs() / self.ehat;
            if r > 0.0 {
                let t = self.p * r.ln();
                if t > POWER_GUARD {
                    overflow = true;
                }
                m * t.exp()
            } else {
                0.0
            }
        }));
        if overflow {
            f64::INFINITY
        } else {
            v
        }
    }
}

impl Objective for StageObjective<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        let full = self.prob.full_field(x);
        let au = self
            .prob
            .op
            .apply_values(&full)
            .expect("field sized to grid");
        self.applies += 1;
        self.phi_of(&self.prob.supremand_values(&au))
    }

    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let full = self.prob.full_field(x);
        let au = self
            .prob
            .op
            .apply_values(&full)
            .expect("field sized to grid");
        self.applies += 1;
        let fv = self.prob.supremand_values(&au);
        let phi = self.phi_of(&fv);
        if !phi.is_finite() {
            for g in grad.iter_mut() {
                *g = 0.0;
            }
            return phi;
        }
        let grid = &self.prob.domain.grid;
        let dim = grid.dim();
        let psi: Vec<f64> = (0..fv.len())
            .map(|i| {
                let r = fv[i].abs() / self.ehat;
                if r > 0.0 {
                    let c = grid.coord(i);
                    let fp = self.prob.supremand.dxi(&c[..dim], au[i]);
                    self.prob.measure[i] * ((self.p - 1.0) * r.ln()).exp() * fv[i].signum() * fp
                } else {
                    0.0
                }
            })
            .collect();
        let apsi = self
            .prob
            .op
            .apply_values(&psi)
            .expect("field sized to grid");
        self.applies += 1;
        let scale = self.p / self.ehat;
        for (k, &i) in self.prob.domain.interior_nodes().iter().enumerate() {
            grad[k] = scale * apsi[i];
        }
        phi
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOptions {
    /// Strictly increasing, every entry >= 2.
    pub p_schedule: Vec<f64>,
    /// Stage converges when the dual-units gradient 2-norm falls below
    /// grad_tol_factor * sqrt(interior nodes) * e_p.
    pub grad_tol_factor: f64,
    pub max_stage_iters: usize,
    /// Iterations per fixed-scale epoch before ehat is re-estimated.
    pub epoch_iters: usize,
    pub lbfgs_memory: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            p_schedule: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            grad_tol_factor: 1e-9,
            max_stage_iters: 2000,
            epoch_iters: 150,
            lbfgs_memory: 10,
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.p_schedule.is_empty() {
            return Err(Error::InvalidParam("p schedule is empty".into()));
        }
        for w in self.p_schedule.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParam(format!(
                    "p schedule must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if self.p_schedule[0] < 2.0 || !self.p_schedule.iter().all(|p| p.is_finite()) {
            return Err(Error::InvalidParam(
                "p schedule entries must be finite and >= 2".into(),
            ));
        }
        if self.max_stage_iters == 0 || self.epoch_iters == 0 {
            return Err(Error::InvalidParam(
                "iteration budgets must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StageResult {
    pub p: f64,
    /// Full field at all nodes (exterior data + solved interior).
    pub u: Vec<f64>,
    /// E_p recomputed at the returned field.
    pub e_p: f64,
    /// ||grad E_p||_2 in dual units: h^n ||(A f)|_interior||_2.
    pub grad_dual_norm: f64,
    pub iterations: usize,
    pub operator_applies: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub stages: Vec<StageResult>,
    pub degenerate: bool,
}

impl ContinuationResult {
    pub fn last(&self) -> &StageResult {
        self.stages.last().expect("schedule is nonempty")
    }
}

/// One p-stage: epochs of fixed-scale L-BFGS with the scale re-estimated to
/// the current energy between epochs, until the exact dual-units gradient
/// test passes or the budget runs out.
pub fn solve_stage(
    prob: &Problem,
    p: f64,
    start_interior: &[f64],
    opts: &ContinuationOptions,
) -> Result<StageResult> {
    let hn = prob.domain.grid.cell_volume();
    let n_int = prob.interior_count();
    let mut u = start_interior.to_vec();
    let mut total_iters = 0;
    let mut total_applies = 0;
    let mut converged = false;
    let mut stalls = 0;
    let (e_final, g_final, u_full_final) = loop {
        let full = prob.full_field(&u);
        let au = prob.op.apply_values(&full)?;
        total_applies += 1;
        let e = prob.energy(&au, p);
        if e == 0.0 {
            break (0.0, 0.0, full);
        }
        let field = dual::dual_field(prob, &au, p, e);
        let af = prob.op.apply_values(&field)?;
        total_applies += 1;
        let gnorm = hn
            * compensated_sum(prob.domain.interior_nodes().iter().map(|&i| af[i] * af[i])).sqrt();
        let gtol = opts.grad_tol_factor * (n_int as f64).sqrt() * e;
        if gnorm <= gtol {
            converged = true;
            break (e, gnorm, full);
        }
        if total_iters >= opts.max_stage_iters || stalls >= 2 {
            break (e, gnorm, full);
        }
        let mut obj = StageObjective {
            prob,
            p,
            ehat: e,
            applies: 0,
        };
        // Translate the dual-units target into phi units: near phi = 1,
        // grad E_p ~ (ehat / p) grad phi.
        let inner_tol = (p / e) * gtol * 0.3;
        let budget = opts.epoch_iters.min(opts.max_stage_iters - total_iters);
        let out = lbfgs::minimize(
            &mut obj,
            &u,
            &LbfgsOptions {
                memory: opts.lbfgs_memory,
                max_iters: budget,
                grad_norm_tol: inner_tol,
                ..Default::default()
            },
            None,
        );
        total_iters += out.iterations;
        total_applies += obj.applies;
        if out.iterations == 0 || out.stop == StopReason::InfeasibleStart {
            stalls += 1;
        } else {
            stalls = 0;
        }
        u = out.x;
    };
    Ok(StageResult {
        p,
        u: u_full_final,
        e_p: e_final,
        grad_dual_norm: g_final,
        iterations: total_iters,
        operator_applies: total_applies,
        converged,
    })
}

/// Runs the full schedule, warm-starting each stage from the last. A None
/// start means the zero interior field.
pub fn solve_continuation(
    prob: &Problem,
    opts: &ContinuationOptions,
    start_interior: Option<&[f64]>,
) -> Result<ContinuationResult> {
    opts.validate()?;
    if prob.degenerate {
        // Zero data: the unique minimizer is identically zero at every p.
        let stages = opts
            .p_schedule
            .iter()
            .map(|&p| StageResult {
                p,
                u: prob.exterior.clone(),
                e_p: 0.0,
                grad_dual_norm: 0.0,
                iterations: 0,
                operator_applies: 0,
                converged: true,
            })
            .collect();
        return Ok(ContinuationResult {
            stages,
            degenerate: true,
        });
    }
    let mut u = match start_interior {
        Some(v) => {
            if v.len() != prob.interior_count() {
                return Err(Error::GridMismatch(format!(
                    "start field has {} values, interior has {} nodes",
                    v.len(),
                    prob.interior_count()
                )));
            }
            v.to_vec()
        }
        None => vec![0.0; prob.interior_count()],
    };
    let mut stages = Vec::with_capacity(opts.p_schedule.len());
    for &p in &opts.p_schedule {
        let st = solve_stage(prob, p, &u, opts)?;
        u = prob.interior_of(&st.u);
        stages.push(st);
    }
    Ok(ContinuationResult {
        stages,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, OmegaShape};
    use crate::profiles::{exterior, supremand, weight, BuildCtx};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::{json, Value};

    fn small_problem(supremand_name: &str) -> Problem {
        let grid = Grid::new(1, 2.0, 0.125).unwrap();
        let domain = DomainSpec::new(
            grid,
            OmegaShape::Interval {
                bounds: [-0.5, 0.5],
            },
        )
        .unwrap();
        let ctx = BuildCtx { grid };
        let w = weight::registry()
            .build("gaussian", &Value::Null, &ctx)
            .unwrap();
        let sup = supremand::registry()
            .build(supremand_name, &Value::Null, &ctx)
            .unwrap();
        let g = exterior::sample_terms(
            &exterior::registry(),
            &[exterior::ExteriorTermSpec {
                profile: "smooth_bump".into(),
                params: json!({"center": [1.25], "radius": 0.4}),
            }],
            &domain,
        )
        .unwrap();
        Problem::assemble(domain, 0.25, w.as_ref(), sup, g).unwrap()
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        for name in ["identity", "tanh_tilt"] {
            let prob = small_problem(name);
            let n = prob.interior_count();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
            for p in [2.0, 8.0] {
                let full = prob.full_field(&x);
                let au = prob.op.apply_values(&full).unwrap();
                let ehat = prob.energy(&au, p);
                let mut obj = StageObjective {
                    prob: &prob,
                    p,
                    ehat,
                    applies: 0,
                };
                let mut grad = vec![0.0; n];
                let f0 = obj.value_grad(&x, &mut grad);
                assert!(f0.is_finite());
                let eps = 1e-6;
                for k in [0usize, n / 2, n - 1] {
                    let mut xp = x.clone();
                    xp[k] += eps;
                    let mut xm = x.clone();
                    xm[k] -= eps;
                    let fd = (obj.value(&xp) - obj.value(&xm)) / (2.0 * eps);
                    let rel = (fd - grad[k]).abs() / grad[k].abs().max(1e-12);
                    assert!(
                        rel < 1e-5,
                        "{name} p={p} k={k}: fd {fd} vs grad {}, rel {rel:.2e}",
                        grad[k]
                    );
                }
            }
        }
    }

    /// Dense normal-equations solve for p = 2: minimize sum m (A u)^2 over
    /// the interior unknowns and compare against the stage solver.
    #[test]
    fn p2_stage_matches_dense_least_squares() {
        let prob = small_problem("identity");
        let grid = prob.domain.grid;
        let n = grid.node_count();
        let a = prob.op.to_dense().unwrap();
        let int = prob.domain.interior_nodes();
        let ni = int.len();
        // B_kl = sum_i m_i A_{ik} A_{il}; rhs_k = -sum_i m_i A_{ik} (A g)_i
        let g = &prob.exterior;
        let ag: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * g[j]).sum())
            .collect();
        let mut b = vec![0.0; ni * ni];
        let mut rhs = vec![0.0; ni];
        for (k, &ik) in int.iter().enumerate() {
            for (l, &il) in int.iter().enumerate() {
                b[k * ni + l] = (0..n)
                    .map(|i| prob.measure[i] * a[i * n + ik] * a[i * n + il])
                    .sum();
            }
            rhs[k] = -(0..n)
                .map(|i| prob.measure[i] * a[i * n + ik] * ag[i])
                .sum::<f64>();
        }
        // Gaussian elimination with partial pivoting
        let mut m = b;
        let mut r = rhs;
        for col in 0..ni {
            let piv = (col..ni)
                .max_by(|&i, &j| m[i * ni + col].abs().total_cmp(&m[j * ni + col].abs()))
                .unwrap();
            if piv != col {
                for c in 0..ni {
                    m.swap(col * ni + c, piv * ni + c);
                }
                r.swap(col, piv);
            }
            let d = m[col * ni + col];
            for row in col + 1..ni {
                let f = m[row * ni + col] / d;
                for c in col..ni {
                    m[row * ni + c] -= f * m[col * ni + c];
                }
                r[row] -= f * r[col];
            }
        }
        let mut direct = vec![0.0; ni];
        for row in (0..ni).rev() {
            let mut acc = r[row];
            for c in row + 1..ni {
                acc -= m[row * ni + c] * direct[c];
            }
            direct[row] = acc / m[row * ni + row];
        }

        let opts = ContinuationOptions::default();
        let st = solve_stage(&prob, 2.0, &vec![0.0; ni], &opts).unwrap();
        assert!(st.converged, "stage did not converge: {st:?}");
        let solved = prob.interior_of(&st.u);
        let scale = direct.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        for k in 0..ni {
            assert!(
                (solved[k] - direct[k]).abs() < 1e-7 * scale.max(1.0),
                "k={k}: {} vs {}",
                solved[k],
                direct[k]
            );
        }
    }

    #[test]
    fn continuation_energies_increase_with_p() {
        let prob = small_problem("identity");
        let opts = ContinuationOptions {
            p_schedule: vec![2.0, 4.0, 8.0],
            ..Default::default()
        };
        let res = solve_continuation(&prob, &opts, None).unwrap();
        assert_eq!(res.stages.len(), 3);
        for st in &res.stages {
            assert!(st.converged, "p={} not converged", st.p);
        }
        assert!(res.stages[0].e_p < res.stages[1].e_p);
        assert!(res.stages[1].e_p < res.stages[2].e_p);
    }

    #[test]
    fn degenerate_data_returns_zero_stages() {
        let grid = Grid::new(1, 2.0, 0.125).unwrap();
        let domain = DomainSpec::new(
            grid,
            OmegaShape::Interval {
                bounds: [-0.5, 0.5],
            },
        )
        .unwrap();
        let ctx = BuildCtx { grid };
        let w = weight::registry()
            .build("gaussian", &Value::Null, &ctx)
            .unwrap();
        let sup = supremand::registry()
            .build("identity", &Value::Null, &ctx)
            .unwrap();
        let prob =
            Problem::assemble(domain, 0.25, w.as_ref(), sup, vec![0.0; grid.node_count()]).unwrap();
        assert!(prob.degenerate);
        let res = solve_continuation(&prob, &ContinuationOptions::default(), None).unwrap();
        assert!(res.degenerate);
        for st in &res.stages {
            assert_eq!(st.e_p, 0.0);
            assert!(st.u.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn schedule_validation() {
        let mut o = ContinuationOptions {
            p_schedule: vec![2.0, 2.0],
            ..ContinuationOptions::default()
        };
        assert!(o.validate().is_err());
        o.p_schedule = vec![1.5, 4.0];
        assert!(o.validate().is_err());
        o.p_schedule = vec![];
        assert!(o.validate().is_err());
        o.p_schedule = vec![2.0, 3.5, 64.0];
        assert!(o.validate().is_ok());
    }
}
