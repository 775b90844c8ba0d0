//! Invariant checks tying a continuation run to the theory it discretizes:
//! energy monotonicity in p, saturation of |A u| at the energy level, far
//! field decay of the operator image, dual s-harmonicity against interior
//! test bumps, uniqueness of the minimizer across solution paths, and the
//! two e_infinity estimates (last stage and 1/p extrapolation).

use crate::dual;
use crate::error::{Error, Result};
use crate::fraclap::cns::normalization_constant;
use crate::grid::{DomainSpec, ScalarField};
use crate::solver::{solve_continuation, ContinuationOptions, Problem, StageResult};
use crate::util::{compensated_sum, line_fit};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative slack for the e_p monotonicity check.
pub const TOL_MONOTONE_REL: f64 = 1e-10;
/// Slack on the dual mass bound.
pub const TOL_MASS: f64 = 1e-8;
/// Relative duality gap allowed at a converged stage.
pub const TOL_DUALITY: f64 = 1e-6;
/// Normalized s-harmonicity residual allowed at a converged stage.
pub const TOL_SHARMONICITY: f64 = 1e-6;
/// Default saturation margin: |ratio - 1| <= tau counts as saturated.
pub const SATURATION_TAU: f64 = 0.05;
/// Soft target for the band-excluded saturated fraction at the last stage.
pub const SATURATION_TARGET: f64 = 0.9;
/// Allowed relative deviation of the fitted decay exponent from n + 2s.
pub const DECAY_EXPONENT_SLACK: f64 = 0.3;
/// Relative max-norm agreement required between two solution paths.
pub const TOL_UNIQUENESS_REL: f64 = 1e-4;
/// Margin for the non-triviality checks (e > 0 and max |f| > margin * mass).
pub const NONTRIVIALITY_MARGIN: f64 = 1e-8;
/// Slack factor for the soft interior Cauchy-decrease trend of f_p.
pub const CAUCHY_SLACK: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// max over consecutive pairs of (e_k - e_{k+1}) / (1 + e_{k+1}).
    pub max_violation_rel: f64,
    pub pass: bool,
}

/// e_p must be nondecreasing along the schedule: the weights are a
/// probability measure, so the power means are ordered exactly and only
/// solver slack can perturb them.
pub fn check_monotone_ep(stages: &[StageResult]) -> Result<MonotonicityReport> {
    if stages.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "monotonicity needs at least 2 stages, got {}",
            stages.len()
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    for w in stages.windows(2) {
        let viol = (w[0].e_p - w[1].e_p) / (1.0 + w[1].e_p);
        worst = worst.max(viol);
    }
    Ok(MonotonicityReport {
        max_violation_rel: worst,
        pass: worst <= TOL_MONOTONE_REL,
    })
}

/// Deterministic family of test functions for the s-harmonicity pairing:
/// smooth bumps at 5 interior node centers (index quantiles of the interior
/// list) with 2 widths each, radius capped by the distance to the nearest
/// exterior node so every bump vanishes on the constrained nodes.
pub fn test_bumps(domain: &DomainSpec) -> Vec<ScalarField> {
    let grid = &domain.grid;
    let dim = grid.dim();
    let int = domain.interior_nodes();
    let exterior: Vec<[f64; 2]> = domain.exterior_nodes().map(|i| grid.coord(i)).collect();
    let mut out = Vec::with_capacity(10);
    for q in [1usize, 3, 5, 7, 9] {
        let center_node = int[(q * (int.len() - 1)) / 10];
        let c = grid.coord(center_node);
        let r_max = exterior
            .iter()
            .map(|e| {
                (0..dim)
                    .map(|k| (e[k] - c[k]) * (e[k] - c[k]))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        for scale in [1.0, 0.55] {
            let r = scale * r_max;
            out.push(ScalarField::from_fn(grid, |x| {
                let t2 = (0..dim).map(|k| (x[k] - c[k]) * (x[k] - c[k])).sum::<f64>() / (r * r);
                if t2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - t2)).exp()
                } else {
                    0.0
                }
            }));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct StageChecks {
    pub p: f64,
    pub e_p: f64,
    pub mass: f64,
    pub mass_pass: bool,
    pub duality_gap_rel: f64,
    pub duality_pass: bool,
    /// Normalized residual per test bump.
    pub sharmonicity: Vec<f64>,
    pub sharmonicity_pass: bool,
}

/// Mass bound, duality identity, and s-harmonicity residuals at one stage.
/// The duality identity holds exactly only for the identity supremand; for
/// tilted supremands only the slope-bounded mass check applies.
pub fn check_stage(
    prob: &Problem,
    stage: &StageResult,
    bumps: &[ScalarField],
) -> Result<StageChecks> {
    let d = dual::build(prob, &stage.u, stage.p)?;
    let mass_bound = prob.supremand.slope_upper_bound() + TOL_MASS;
    let sharmonicity: Vec<f64> = bumps
        .iter()
        .map(|phi| dual::sharmonicity_residual(prob, &d, phi))
        .collect::<Result<_>>()?;
    let sh_max = sharmonicity.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(StageChecks {
        p: stage.p,
        e_p: d.e_p,
        mass: d.mass,
        mass_pass: d.mass <= mass_bound,
        duality_gap_rel: d.duality_gap_rel,
        duality_pass: !prob.supremand.is_identity() || d.duality_gap_rel <= TOL_DUALITY,
        sharmonicity,
        sharmonicity_pass: sh_max <= TOL_SHARMONICITY,
    })
}

#[derive(Debug, Clone)]
pub struct SaturationReport {
    pub p: f64,
    pub e_p: f64,
    /// (tau, fraction over all interior nodes, fraction excluding the band).
    pub fractions: Vec<(f64, f64, f64)>,
    /// Interior nodes within one cell of a sign flip or zero band of f.
    pub band_size: usize,
    pub interior_count: usize,
    pub max_ratio: f64,
    /// Among exterior support nodes of f: fraction with ratio >= 1 - tau0.
    pub exterior_support_fraction: f64,
}

impl SaturationReport {
    /// Band-excluded saturated fraction at the given tau (must be listed).
    pub fn excluding_band_at(&self, tau: f64) -> Option<f64> {
        self.fractions
            .iter()
            .find(|(t, _, _)| *t == tau)
            .map(|(_, _, f)| *f)
    }
}

fn saturation_of(prob: &Problem, u_full: &[f64], p: f64, taus: &[f64]) -> Result<SaturationReport> {
    let d = dual::build(prob, u_full, p)?;
    let au = prob.op.apply_values(u_full)?;
    let fv = prob.supremand_values(&au);
    let grid = &prob.domain.grid;
    let ratio: Vec<f64> = fv.iter().map(|v| v.abs() / d.e_p).collect();
    // Sign band: the limit PDE fixes |A u| = e only off the zero set of f,
    // so nodes on or next to a sign change of f are expected outliers.
    let in_band = |i: usize| -> bool {
        if d.sign[i] == 0 {
            return true;
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
                if d.sign[grid.flat_index(mj)] != d.sign[i] {
                    return true;
                }
            }
        }
        false
    };
    let int = prob.domain.interior_nodes();
    let band: Vec<bool> = int.iter().map(|&i| in_band(i)).collect();
    let band_size = band.iter().filter(|&&b| b).count();
    let mut fractions = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut all = 0usize;
        let mut excl = 0usize;
        for (k, &i) in int.iter().enumerate() {
            if (ratio[i] - 1.0).abs() <= tau {
                all += 1;
                if !band[k] {
                    excl += 1;
                }
            }
        }
        let kept = int.len() - band_size;
        fractions.push((
            tau,
            all as f64 / int.len() as f64,
            if kept > 0 {
                excl as f64 / kept as f64
            } else {
                1.0
            },
        ));
    }
    let max_ratio = int.iter().fold(0.0f64, |m, &i| m.max(ratio[i]));
    let mut ext_support = 0usize;
    let mut ext_sat = 0usize;
    for i in prob.domain.exterior_nodes() {
        if !d.zero_band[i] {
            ext_support += 1;
            if ratio[i] >= 1.0 - SATURATION_TAU {
                ext_sat += 1;
            }
        }
    }
    Ok(SaturationReport {
        p,
        e_p: d.e_p,
        fractions,
        band_size,
        interior_count: int.len(),
        max_ratio,
        exterior_support_fraction: if ext_support > 0 {
            ext_sat as f64 / ext_support as f64
        } else {
            1.0
        },
    })
}

/// Saturation census per stage: the fraction of interior nodes where
/// |F(A u)| sits within tau of e_p, with and without the sign band of the
/// dual field. Errors on trivial data.
pub fn check_pde_saturation(
    prob: &Problem,
    stages: &[StageResult],
    taus: &[f64],
) -> Result<Vec<SaturationReport>> {
    stages
        .iter()
        .map(|st| saturation_of(prob, &st.u, st.p, taus))
        .collect()
}

/// The operator image of the full field at a point strictly outside the
/// grid box, where u vanishes identically: a plain midpoint kernel sum
///   (-A u)(x) = -c_{n,s} sum_j u_j h^n / |x - x_j|^{n+2s}.
/// Independent of both the discrete operator's kernel table and the
/// adaptive oracle; valid because the integrand is smooth out there.
pub fn far_field_slap(prob: &Problem, u_full: &[f64], x: &[f64]) -> Result<f64> {
    let grid = &prob.domain.grid;
    let dim = grid.dim();
    if x.len() != dim {
        return Err(Error::InvalidParam(format!(
            "far point has {} coordinates, grid dim is {dim}",
            x.len()
        )));
    }
    if x.iter().all(|v| v.abs() <= grid.half_width()) {
        return Err(Error::InvalidParam(format!(
            "far point {x:?} lies inside the grid box (half width {})",
            grid.half_width()
        )));
    }
    let s = prob.op.s();
    let c = normalization_constant(dim, s);
    let hn = grid.cell_volume();
    let expo = (dim as f64 + 2.0 * s) / 2.0;
    let sum = compensated_sum((0..u_full.len()).filter(|&j| u_full[j] != 0.0).map(|j| {
        let cj = grid.coord(j);
        let d2: f64 = (0..dim).map(|k| (x[k] - cj[k]) * (x[k] - cj[k])).sum();
        u_full[j] / d2.powf(expo)
    }));
    Ok(-c * hn * sum)
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    /// (shell radius, max |A u| over shell samples).
    pub shells: Vec<(f64, f64)>,
    pub nonincreasing: bool,
    /// Slope of -ln max vs ln R; None when a shell max vanishes.
    pub fitted_exponent: Option<f64>,
    pub expected_exponent: f64,
    pub exponent_pass: bool,
}

/// Far-field behaviour over shells |x| = 2L, 4L, 8L: the operator image
/// must decay, at the kernel rate n + 2s when the field has net mass.
pub fn check_exterior_behaviour(
    prob: &Problem,
    u_full: &[f64],
    shell_factors: &[f64],
) -> Result<DecayReport> {
    let grid = &prob.domain.grid;
    let dim = grid.dim();
    let l = grid.half_width();
    let s = prob.op.s();
    let expected = dim as f64 + 2.0 * s;
    let mut shells = Vec::with_capacity(shell_factors.len());
    for &factor in shell_factors {
        let r = factor * l;
        if r <= l * (dim as f64).sqrt() {
            return Err(Error::InvalidParam(format!(
                "shell radius {r} does not clear the grid box"
            )));
        }
        let points: Vec<Vec<f64>> = if dim == 1 {
            vec![vec![-r], vec![r]]
        } else {
            (0..16)
                .map(|j| {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / 16.0;
                    vec![r * th.cos(), r * th.sin()]
                })
                .collect()
        };
        let mut mx = 0.0f64;
        for pt in &points {
            mx = mx.max(far_field_slap(prob, u_full, pt)?.abs());
        }
        shells.push((r, mx));
    }
    let nonincreasing = shells.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12));
    let fitted = if shells.iter().all(|&(_, v)| v > 0.0) {
        let xs: Vec<f64> = shells.iter().map(|&(r, _)| r.ln()).collect();
        let ys: Vec<f64> = shells.iter().map(|&(_, v)| v.ln()).collect();
        let (_, slope) = line_fit(&xs, &ys);
        Some(-slope)
    } else {
        None
    };
    let exponent_pass = match fitted {
        Some(e) => (e - expected).abs() <= DECAY_EXPONENT_SLACK * expected,
        None => true,
    };
    Ok(DecayReport {
        shells,
        nonincreasing,
        fitted_exponent: fitted,
        expected_exponent: expected,
        exponent_pass,
    })
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub seed: u64,
    /// max-norm distance between the two paths' fields at the last stage.
    pub pair_distance: f64,
    /// pair_distance / (1 + max |u_a|).
    pub rel_pair_distance: f64,
    pub pass: bool,
    /// Band-excluded saturated fraction at SATURATION_TAU for each path and
    /// their average field.
    pub saturation_a: f64,
    pub saturation_b: f64,
    pub saturation_avg: f64,
    pub max_saturation_discrepancy: f64,
}

/// Two independent solution paths: plain continuation from zero and from a
/// seeded random interior start. Both must land on the same field, and the
/// averaged field must saturate like each path does (the averaging argument
/// behind uniqueness). Errors when any stage fails to converge.
pub fn uniqueness_experiment(
    prob: &Problem,
    opts: &ContinuationOptions,
    seed: u64,
) -> Result<UniquenessReport> {
    if prob.degenerate {
        return Err(Error::TrivialData(
            "uniqueness experiment needs non-trivial data".into(),
        ));
    }
    let res_a = solve_continuation(prob, opts, None)?;
    let amp = 0.5 * prob.exterior.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..prob.interior_count())
        .map(|_| rng.random_range(-amp..amp))
        .collect();
    let res_b = solve_continuation(prob, opts, Some(&start))?;
    for res in [&res_a, &res_b] {
        for st in &res.stages {
            if !st.converged {
                return Err(Error::InvalidParam(format!(
                    "uniqueness: stage p = {} did not converge (grad {:.3e})",
                    st.p, st.grad_dual_norm
                )));
            }
        }
    }
    let ua = &res_a.last().u;
    let ub = &res_b.last().u;
    let p_max = res_a.last().p;
    let pair_distance = ua
        .iter()
        .zip(ub)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = 1.0 + ua.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let avg: Vec<f64> = ua.iter().zip(ub).map(|(a, b)| 0.5 * (a + b)).collect();
    let taus = [SATURATION_TAU];
    let sat = |u: &[f64]| -> Result<f64> {
        Ok(saturation_of(prob, u, p_max, &taus)?
            .excluding_band_at(SATURATION_TAU)
            .expect("tau is listed"))
    };
    let sa = sat(ua)?;
    let sb = sat(ub)?;
    let sv = sat(&avg)?;
    let rel = pair_distance / scale;
    Ok(UniquenessReport {
        seed,
        pair_distance,
        rel_pair_distance: rel,
        pass: rel <= TOL_UNIQUENESS_REL,
        saturation_a: sa,
        saturation_b: sb,
        saturation_avg: sv,
        max_saturation_discrepancy: (sv - sa).abs().max((sv - sb).abs()),
    })
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    /// Last-stage energy: a monotone lower estimate of e_infinity.
    pub e_last: f64,
    /// Intercept of the e_p vs 1/p line fit over the trailing stages.
    pub e_extrapolated: f64,
    /// Max relative deviation of the fit from the fitted points.
    pub fit_residual_rel: f64,
    pub stages_used: usize,
    pub nontrivial: bool,
}

/// The two e_infinity estimates. e_p converges from below without a proven
/// rate, so the 1/p fit is reported alongside the guaranteed lower value,
/// never in its place.
pub fn extract_limit(stages: &[StageResult]) -> Result<LimitReport> {
    if stages.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "limit extraction needs at least 3 stages, got {}",
            stages.len()
        )));
    }
    let used = stages.len().min(4);
    let tail = &stages[stages.len() - used..];
    let xs: Vec<f64> = tail.iter().map(|st| 1.0 / st.p).collect();
    let ys: Vec<f64> = tail.iter().map(|st| st.e_p).collect();
    let (intercept, slope) = line_fit(&xs, &ys);
    let e_last = stages.last().unwrap().e_p;
    let resid = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (intercept + slope * x - y).abs())
        .fold(0.0f64, f64::max)
        / e_last.max(f64::MIN_POSITIVE);
    Ok(LimitReport {
        e_last,
        e_extrapolated: intercept,
        fit_residual_rel: resid,
        stages_used: used,
        nontrivial: e_last > NONTRIVIALITY_MARGIN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraclap::oracle::oracle_slap;
    use crate::fraclap::AnalyticFn;
    use crate::grid::{Grid, OmegaShape};
    use crate::profiles::{exterior, supremand, weight, BuildCtx};
    use serde_json::{json, Value};

    fn problem() -> Problem {
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

    fn fake_stage(p: f64, e_p: f64) -> StageResult {
        StageResult {
            p,
            u: vec![],
            e_p,
            grad_dual_norm: 0.0,
            iterations: 0,
            operator_applies: 0,
            converged: true,
        }
    }

    #[test]
    fn monotonicity_detects_order_and_violations() {
        let ok = [
            fake_stage(2.0, 1.0),
            fake_stage(4.0, 1.5),
            fake_stage(8.0, 1.6),
        ];
        let rep = check_monotone_ep(&ok).unwrap();
        assert!(rep.pass);
        assert!(rep.max_violation_rel <= 0.0);
        // shuffled stages must fail: the harness can see its own blind spots
        let bad = [fake_stage(2.0, 1.5), fake_stage(4.0, 1.0)];
        let rep = check_monotone_ep(&bad).unwrap();
        assert!(!rep.pass);
        assert!(check_monotone_ep(&ok[..1]).is_err());
    }

    #[test]
    fn test_bumps_are_admissible_and_distinct() {
        // Fine enough that both widths at every center cover distinct nodes.
        let grid = Grid::new(1, 2.0, 1.0 / 16.0).unwrap();
        let domain = DomainSpec::new(
            grid,
            OmegaShape::Interval {
                bounds: [-0.5, 0.5],
            },
        )
        .unwrap();
        let bumps = test_bumps(&domain);
        assert_eq!(bumps.len(), 10);
        for (k, b) in bumps.iter().enumerate() {
            assert!(b.max_abs() > 0.0, "bump {k} vanishes everywhere");
            for i in domain.exterior_nodes() {
                assert_eq!(b.values[i], 0.0, "bump {k} leaks outside omega");
            }
        }
        for i in 0..bumps.len() {
            for j in i + 1..bumps.len() {
                assert_ne!(bumps[i].values, bumps[j].values, "bumps {i} and {j} equal");
            }
        }
    }

    #[test]
    fn far_field_rejects_points_inside_the_box() {
        let prob = problem();
        let u = vec![0.0; prob.domain.grid.node_count()];
        assert!(far_field_slap(&prob, &u, &[1.5]).is_err());
        assert_eq!(far_field_slap(&prob, &u, &[3.0]).unwrap(), 0.0);
    }

    /// Cross-validation against the adaptive oracle: for a smooth compactly
    /// supported field the midpoint kernel sum at a far point must agree to
    /// the midpoint rule's accuracy.
    #[test]
    fn far_field_matches_oracle_outside_the_box() {
        // Midpoint-rule kernel sum is second order in h, so a fine grid is
        // needed for a tight cross-check against the adaptive oracle.
        let grid = Grid::new(1, 2.0, 1.0 / 64.0).unwrap();
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
        let g = exterior::sample_terms(
            &exterior::registry(),
            &[exterior::ExteriorTermSpec {
                profile: "smooth_bump".into(),
                params: json!({"center": [1.25], "radius": 0.4}),
            }],
            &domain,
        )
        .unwrap();
        let prob = Problem::assemble(domain, 0.25, w.as_ref(), sup, g).unwrap();
        let f = AnalyticFn::smooth_bump(1, [0.3, 0.0], 0.9, 1.0).unwrap();
        let u: Vec<f64> = (0..grid.node_count())
            .map(|i| f.eval(&grid.coord(i)[..1]))
            .collect();
        for x in [2.75, 4.0, -3.25] {
            let got = far_field_slap(&prob, &u, &[x]).unwrap();
            let want = oracle_slap(&f, &[x], 0.25).unwrap();
            assert!(
                (got - want).abs() <= 5e-4 * want.abs(),
                "x={x}: {got} vs {want}"
            );
        }
    }

    /// A single-node field makes the shell values exact powers of the
    /// radius, so the fitted exponent must equal n + 2s to rounding.
    #[test]
    fn decay_exponent_exact_for_point_mass() {
        let prob = problem();
        let grid = prob.domain.grid;
        let mut u = vec![0.0; grid.node_count()];
        let origin = (0..grid.node_count())
            .find(|&i| grid.coord(i)[0] == 0.0)
            .unwrap();
        u[origin] = 1.0;
        let rep = check_exterior_behaviour(&prob, &u, &[2.0, 4.0, 8.0]).unwrap();
        assert!(rep.nonincreasing);
        let fitted = rep.fitted_exponent.unwrap();
        assert!(
            (fitted - rep.expected_exponent).abs() < 1e-9,
            "fitted {fitted} vs {}",
            rep.expected_exponent
        );
        assert!(rep.exponent_pass);
    }

    #[test]
    fn decay_of_zero_field_is_all_zeros() {
        let prob = problem();
        let u = vec![0.0; prob.domain.grid.node_count()];
        let rep = check_exterior_behaviour(&prob, &u, &[2.0, 4.0, 8.0]).unwrap();
        assert!(rep.nonincreasing);
        assert!(rep.fitted_exponent.is_none());
        assert!(rep.exponent_pass);
        assert!(rep.shells.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn saturation_fractions_monotone_in_tau_and_reach_one() {
        let prob = problem();
        // An unsolved but nontrivial field exercises the census mechanics.
        let interior: Vec<f64> = (0..prob.interior_count())
            .map(|k| 0.05 * k as f64)
            .collect();
        let u = prob.full_field(&interior);
        let stage = StageResult {
            p: 8.0,
            u,
            e_p: 0.0,
            grad_dual_norm: 0.0,
            iterations: 0,
            operator_applies: 0,
            converged: false,
        };
        let reps =
            check_pde_saturation(&prob, std::slice::from_ref(&stage), &[0.02, 0.05, 0.2, 1e9])
                .unwrap();
        let rep = &reps[0];
        for w in rep.fractions.windows(2) {
            assert!(w[0].1 <= w[1].1, "all-node fraction not monotone in tau");
            assert!(w[1].2 >= w[0].2, "band-excluded fraction not monotone");
        }
        let last = rep.fractions.last().unwrap();
        assert_eq!(last.1, 1.0);
        assert_eq!(last.2, 1.0);
        // e_p averages over ALL nodes, so the interior max ratio can sit
        // below 1 for fields whose largest values live outside omega.
        assert!(rep.max_ratio > 0.0);
        assert!(rep.band_size <= rep.interior_count);
    }

    #[test]
    fn limit_fit_recovers_exact_one_over_p_law() {
        let stages: Vec<StageResult> = [2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&p| fake_stage(p, 1.0 - 1.0 / p))
            .collect();
        let rep = extract_limit(&stages).unwrap();
        assert!((rep.e_extrapolated - 1.0).abs() < 1e-12);
        assert!(rep.fit_residual_rel < 1e-12);
        assert_eq!(rep.stages_used, 4);
        assert!(rep.nontrivial);
        assert!(extract_limit(&stages[..2]).is_err());
    }

    #[test]
    fn uniqueness_paths_agree_on_small_problem() {
        let prob = problem();
        let opts = ContinuationOptions {
            p_schedule: vec![2.0, 4.0, 8.0],
            ..Default::default()
        };
        let rep = uniqueness_experiment(&prob, &opts, 7).unwrap();
        assert!(rep.pass, "rel distance {}", rep.rel_pair_distance);
        assert!(rep.max_saturation_discrepancy <= 0.02 + 1e-12);
        assert_eq!(rep.seed, 7);
    }

    #[test]
    fn stage_checks_pass_on_converged_stage() {
        let prob = problem();
        let opts = ContinuationOptions {
            p_schedule: vec![2.0, 4.0],
            ..Default::default()
        };
        let res = solve_continuation(&prob, &opts, None).unwrap();
        let bumps = test_bumps(&prob.domain);
        for st in &res.stages {
            let c = check_stage(&prob, st, &bumps).unwrap();
            assert!(c.mass_pass, "p={}: mass {}", st.p, c.mass);
            assert!(c.duality_pass, "p={}: gap {}", st.p, c.duality_gap_rel);
            assert!(
                c.sharmonicity_pass,
                "p={}: residuals {:?}",
                st.p, c.sharmonicity
            );
        }
    }
}
