//! Dual field of a stage solution and its measure-level diagnostics. At
//! exponent p the subgradient of E_p in the operator image is the density
//!   f_i = e_p^{1-p} (m_i / h^n) |F_i|^{p-2} F_i F'_i,
//! computed in log scale so large p stays finite. Exact discrete facts,
//! valid for any field and not just minimizers: the mass sum |f_i| h^n is
//! bounded by the supremand slope bound (Hoelder against the probability
//! measure), the pairing sum f_i (A u)_i h^n equals e_p when F is the
//! identity, and h^n (A f)|_interior is the gradient of E_p, so pairings
//! against interior test functions measure stationarity.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::solver::{Problem, StageResult};
use crate::util::compensated_sum;

/// Relative zero band: |f| <= DELTA_ZERO_REL * max|f| counts as vanishing
/// for sign and census purposes.
pub const DELTA_ZERO_REL: f64 = 1e-3;

/// Mass tolerance left outside the reported support radius.
pub const SUPPORT_MASS_EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DualField {
    pub p: f64,
    pub e_p: f64,
    /// Density at every node, in h^n units (sums against h^n).
    pub field: Vec<f64>,
    /// sum |f_i| h^n.
    pub mass: f64,
    /// sum f_i (A u)_i h^n.
    pub pairing: f64,
    /// |pairing - e_p| / e_p.
    pub duality_gap_rel: f64,
    /// Sign of f_i, with the zero band mapped to 0.
    pub sign: Vec<i8>,
    /// |f_i| <= DELTA_ZERO_REL * max|f|.
    pub zero_band: Vec<bool>,
}

/// f_i = (m_i / h^n) (|F_i| / e_p)^{p-1} sign(F_i) F'_i. The ratio form
/// keeps every factor representable: |F|/e_p <= m_min^{-1/p}.
pub fn dual_field(prob: &Problem, au: &[f64], p: f64, e_p: f64) -> Vec<f64> {
    let hn = prob.domain.grid.cell_volume();
    if e_p == 0.0 {
        return vec![0.0; au.len()];
    }
    let grid = &prob.domain.grid;
    let dim = grid.dim();
    let fv = prob.supremand_values(au);
    (0..au.len())
        .map(|i| {
            let r = fv[i].abs() / e_p;
            if r > 0.0 {
                let c = grid.coord(i);
                let fp = prob.supremand.dxi(&c[..dim], au[i]);
                (prob.measure[i] / hn) * ((p - 1.0) * r.ln()).exp() * fv[i].signum() * fp
            } else {
                0.0
            }
        })
        .collect()
}

/// Builds the dual field at a solved (or any) full field. Errors on trivial
/// data: the dual density is undefined when e_p = 0.
pub fn build(prob: &Problem, u_full: &[f64], p: f64) -> Result<DualField> {
    let hn = prob.domain.grid.cell_volume();
    let au = prob.op.apply_values(u_full)?;
    let fv = prob.supremand_values(&au);
    let e_p = prob.energy_from_supremand(&fv, p);
    if e_p == 0.0 {
        return Err(Error::TrivialData(
            "dual field undefined: e_p = 0 on trivial data".into(),
        ));
    }
    let field = dual_field(prob, &au, p, e_p);
    let mass = compensated_sum(field.iter().map(|f| f.abs() * hn));
    let pairing = compensated_sum(field.iter().zip(&au).map(|(f, a)| f * a * hn));
    let duality_gap_rel = (pairing - e_p).abs() / e_p;
    let max_f = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = DELTA_ZERO_REL * max_f;
    let zero_band: Vec<bool> = field.iter().map(|f| f.abs() <= cut).collect();
    let sign: Vec<i8> = field
        .iter()
        .zip(&zero_band)
        .map(|(f, &z)| {
            if z || *f == 0.0 {
                0
            } else if *f > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(DualField {
        p,
        e_p,
        field,
        mass,
        pairing,
        duality_gap_rel,
        sign,
        zero_band,
    })
}

/// Pairing of the dual density against A phi for a test function supported
/// strictly inside Omega, normalized by mass * max|A phi| so the result is
/// scale-free and bounded by 1. At a stationary point this is a weighted
/// combination of gradient components, hence solver-tolerance small.
pub fn sharmonicity_residual(prob: &Problem, dual: &DualField, phi: &ScalarField) -> Result<f64> {
    phi.check_grid(&prob.domain.grid)?;
    for i in prob.domain.exterior_nodes() {
        if phi.values[i] != 0.0 {
            return Err(Error::SupportViolation(format!(
                "test function nonzero at exterior node {i}"
            )));
        }
    }
    let hn = prob.domain.grid.cell_volume();
    let aphi = prob.op.apply_values(&phi.values)?;
    let pairing = compensated_sum(dual.field.iter().zip(&aphi).map(|(f, a)| f * a * hn));
    let max_aphi = aphi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = dual.mass * max_aphi;
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(pairing.abs() / scale)
}

/// Fraction of interior nodes with |f| <= delta (exact zeros for delta = 0).
pub fn zero_set_census(prob: &Problem, field: &[f64], delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "zero-set threshold must be nonnegative, got {delta}"
        )));
    }
    let int = prob.domain.interior_nodes();
    let hits = int.iter().filter(|&&i| field[i].abs() <= delta).count();
    Ok(hits as f64 / int.len() as f64)
}

/// One connected component (axis adjacency) of the dual support outside
/// Omega, with the set of signs present; mixed signs are a reported
/// violation of sign constancy, not an error.
#[derive(Debug, Clone)]
pub struct SignComponent {
    pub nodes: usize,
    pub has_positive: bool,
    pub has_negative: bool,
}

#[derive(Debug, Clone)]
pub struct MeasureDiagnostics {
    /// Mass restricted to interior nodes.
    pub interior_mass: f64,
    /// Mass restricted to exterior nodes; the two sum to the total mass.
    pub exterior_mass: f64,
    /// Smallest node radius R with mass outside B_R below SUPPORT_MASS_EPS.
    pub support_radius: f64,
    /// L1(Omega) differences between consecutive stage duals, paired with
    /// the later stage's p.
    pub cauchy_l1: Vec<(f64, f64)>,
    /// Connected sign regions of the dual support outside Omega.
    pub sign_components: Vec<SignComponent>,
    /// max over interior nodes of |f| at the final stage.
    pub max_omega_f: f64,
}

fn exterior_support_components(prob: &Problem, dual: &DualField) -> Vec<SignComponent> {
    let grid = &prob.domain.grid;
    let n = grid.node_count();
    let in_support: Vec<bool> = (0..n)
        .map(|i| !dual.zero_band[i] && !prob.domain.is_interior(i))
        .collect();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if !in_support[start] || seen[start] {
            continue;
        }
        let mut comp = SignComponent {
            nodes: 0,
            has_positive: false,
            has_negative: false,
        };
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.nodes += 1;
            match dual.sign[i] {
                1 => comp.has_positive = true,
                -1 => comp.has_negative = true,
                _ => {}
            }
            let mi = grid.multi_index(i);
            for axis in 0..grid.dim() {
                for step in [-1i64, 1] {
                    let v = mi[axis] as i64 + step;
                    if v < 0 || v >= grid.points_per_axis() as i64 {
                        continue;
                    }
                    let mut mj = mi;
                    mj[axis] = v as usize;
                    let j = grid.flat_index(mj);
                    if in_support[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out.sort_by_key(|c| std::cmp::Reverse(c.nodes));
    out
}

/// Measure-level limit diagnostics over a converged continuation: mass
/// split, support radius, interior Cauchy decrease, exterior sign census.
/// The plain last-stage dual is the f_infinity estimate; convergence of f_p
/// is locally uniform but comes with no rate, so the Cauchy column reports
/// what the run actually achieved. Needs at least 3 stages.
pub fn limit_extraction(
    prob: &Problem,
    stages: &[StageResult],
) -> Result<(MeasureDiagnostics, DualField)> {
    if stages.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "limit extraction needs at least 3 stages, got {}",
            stages.len()
        )));
    }
    let hn = prob.domain.grid.cell_volume();
    let duals: Vec<DualField> = stages
        .iter()
        .map(|st| build(prob, &st.u, st.p))
        .collect::<Result<_>>()?;
    let last = duals.last().unwrap();
    let interior_mass = compensated_sum(
        prob.domain
            .interior_nodes()
            .iter()
            .map(|&i| last.field[i].abs() * hn),
    );
    let exterior_mass = compensated_sum(
        prob.domain
            .exterior_nodes()
            .map(|i| last.field[i].abs() * hn),
    );
    // Smallest node radius R with mass strictly outside B_R under the cap:
    // sweep inward from the farthest node until the tail mass crosses it.
    let grid = &prob.domain.grid;
    let dim = grid.dim();
    let mut by_radius: Vec<(f64, f64)> = (0..last.field.len())
        .map(|i| {
            let c = grid.coord(i);
            let r = c[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
            (r, last.field[i].abs() * hn)
        })
        .collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tail = 0.0;
    let mut support_radius = 0.0;
    for &(r, m) in &by_radius {
        if tail + m >= SUPPORT_MASS_EPS {
            support_radius = r;
            break;
        }
        tail += m;
    }
    let cauchy_l1 = duals
        .windows(2)
        .map(|w| {
            let diff = compensated_sum(
                prob.domain
                    .interior_nodes()
                    .iter()
                    .map(|&i| (w[1].field[i] - w[0].field[i]).abs() * hn),
            );
            (w[1].p, diff)
        })
        .collect();
    let sign_components = exterior_support_components(prob, last);
    let max_omega_f = prob
        .domain
        .interior_nodes()
        .iter()
        .fold(0.0f64, |m, &i| m.max(last.field[i].abs()));
    let diag = MeasureDiagnostics {
        interior_mass,
        exterior_mass,
        support_radius,
        cauchy_l1,
        sign_components,
        max_omega_f,
    };
    Ok((diag, duals.into_iter().last().unwrap()))
}
