//! Translation-invariant lattice discretization of (-Delta)^s on the
//! truncation box. One kernel weight per offset (exact or Gauss-Legendre
//! cell integrals of |z|^{-n-2s}), a z^2-moment correction folded into the
//! axis neighbors so the scheme is exact on quadratics over the near region,
//! and an analytic tail for the kernel mass outside the box.
//!
//! This module shares no quadrature code with the oracle route.

use super::cns::normalization_constant;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Half-width, in cells, of the moment-matched near region.
pub const MSTAR: usize = 16;

/// Gauss-Legendre 12-point abscissae (positive half) and weights.
const GL12_X: [f64; 6] = [
    0.125233408511469,
    0.367831498998180,
    0.587317954286617,
    0.769902674194305,
    0.904117256370475,
    0.981560634246719,
];
const GL12_W: [f64; 6] = [
    0.249147045813403,
    0.233492536538355,
    0.203167426723066,
    0.160078328543346,
    0.106939325995318,
    0.047175336386512,
];

fn gl12_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let mid = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    (0..12).map(move |k| {
        let (x, w) = if k < 6 {
            (-GL12_X[k], GL12_W[k])
        } else {
            (GL12_X[k - 6], GL12_W[k - 6])
        };
        (mid + hl * x, hl * w)
    })
}

fn gl12_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let step = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let pa = a + p as f64 * step;
        for (x, w) in gl12_nodes(pa, pa + step) {
            total += w * f(x);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    /// Kernel mass outside the box enters the diagonal: u is extended by 0.
    WithTail,
    /// Pure difference form: constants are annihilated exactly.
    DifferenceOnly,
}

pub struct FracLapOperator {
    grid: Grid,
    s: f64,
    cns: f64,
    mode: OperatorMode,
    /// 1D: kappa[m - 1] is the kernel cell integral at axis offset m >= 1.
    /// 2D: kappa[a * P + b] at absolute offset (a, b), entry (0, 0) unused.
    kappa: Vec<f64>,
    /// Per-node tail coefficient c * int_{outside box} |y - x_i|^{-n-2s} dy
    /// (zeros in DifferenceOnly mode).
    tail: Vec<f64>,
}

impl FracLapOperator {
    pub fn build(grid: &Grid, s: f64, mode: OperatorMode) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParam(format!(
                "operator: s must lie in (0, 1), got {s}"
            )));
        }
        let cns = normalization_constant(grid.dim(), s);
        let p = grid.points_per_axis();
        let h = grid.spacing();
        let kappa = match grid.dim() {
            1 => kappa_1d(p, h, s),
            _ => kappa_2d(p, h, s),
        };
        let tail = match mode {
            OperatorMode::DifferenceOnly => vec![0.0; grid.node_count()],
            OperatorMode::WithTail => {
                // Cells tile an enlarged box of half-width B = L + h/2; the
                // analytic tail integral starts there.
                let b = grid.half_width() + 0.5 * h;
                (0..grid.node_count())
                    .map(|i| {
                        let c = grid.coord(i);
                        match grid.dim() {
                            1 => cns * tail_1d(c[0], b, s),
                            _ => cns * tail_2d(c[0], c[1], b, s),
                        }
                    })
                    .collect()
            }
        };
        Ok(FracLapOperator {
            grid: *grid,
            s,
            cns,
            mode,
            kappa,
            tail,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn cns(&self) -> f64 {
        self.cns
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    /// Kernel weight at a lattice offset (cell integral of |z|^{-n-2s}),
    /// including the moment correction. None at offset zero.
    pub fn kernel_weight(&self, offset: [i64; 2]) -> Option<f64> {
        let p = self.grid.points_per_axis();
        let a = offset[0].unsigned_abs() as usize;
        let b = offset[1].unsigned_abs() as usize;
        match self.grid.dim() {
            1 => {
                if a == 0 || a >= p || offset[1] != 0 {
                    None
                } else {
                    Some(self.kappa[a - 1])
                }
            }
            _ => {
                if (a == 0 && b == 0) || a >= p || b >= p {
                    None
                } else {
                    Some(self.kappa[a * p + b])
                }
            }
        }
    }

    pub fn tail_coefficient(&self, i: usize) -> f64 {
        self.tail[i]
    }

    /// (A u)_i. The difference form c * sum_j kappa (u_i - u_j) annihilates
    /// constant fields exactly, term by term.
    // indexed loops keep the kernel offset |i - j| - 1 visible
    #[allow(clippy::needless_range_loop)]
    pub fn apply_row(&self, u: &[f64], i: usize) -> f64 {
        let ui = u[i];
        let acc = match self.grid.dim() {
            1 => {
                let n = u.len();
                let mut acc = 0.0;
                for j in 0..i {
                    acc += self.kappa[i - j - 1] * (ui - u[j]);
                }
                for j in i + 1..n {
                    acc += self.kappa[j - i - 1] * (ui - u[j]);
                }
                acc
            }
            _ => {
                let p = self.grid.points_per_axis();
                let ai = i / p;
                let bi = i % p;
                let mut acc = 0.0;
                for aj in 0..p {
                    let da = ai.abs_diff(aj);
                    let krow = &self.kappa[da * p..(da + 1) * p];
                    let urow = &u[aj * p..(aj + 1) * p];
                    if aj == ai {
                        for bj in 0..p {
                            if bj != bi {
                                acc += krow[bi.abs_diff(bj)] * (ui - urow[bj]);
                            }
                        }
                    } else {
                        for bj in 0..p {
                            acc += krow[bi.abs_diff(bj)] * (ui - urow[bj]);
                        }
                    }
                }
                acc
            }
        };
        self.cns * acc + self.tail[i] * ui
    }

    /// Full application, parallel over rows. Rows are written disjointly and
    /// each row sums in a fixed order, so results are run-to-run identical.
    pub fn apply_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "operator on {} nodes applied to {} values",
                self.grid.node_count(),
                u.len()
            )));
        }
        let mut out = vec![0.0; u.len()];
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = self.apply_row(u, i));
        Ok(out)
    }

    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        u.check_grid(&self.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self.apply_values(&u.values)?,
        })
    }

    /// Dense matrix, row-major, for export and small-grid inspection.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = self.grid.node_count();
        if n > 4096 {
            return Err(Error::InvalidParam(format!(
                "dense export limited to 4096 nodes, grid has {n}"
            )));
        }
        let p = self.grid.points_per_axis();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = match self.grid.dim() {
                    1 => self.kappa[i.abs_diff(j) - 1],
                    _ => {
                        let da = (i / p).abs_diff(j / p);
                        let db = (i % p).abs_diff(j % p);
                        self.kappa[da * p + db]
                    }
                };
                a[i * n + j] = -self.cns * k;
                diag += self.cns * k;
            }
            a[i * n + i] = diag + self.tail[i];
        }
        Ok(a)
    }
}

/// Exact 1D kernel cell integrals plus the near-region moment correction.
fn kappa_1d(p: usize, h: f64, s: f64) -> Vec<f64> {
    let mut kap: Vec<f64> = (1..p)
        .map(|m| {
            let m = m as f64;
            h.powf(-2.0 * s) / (2.0 * s) * ((m - 0.5).powf(-2.0 * s) - (m + 0.5).powf(-2.0 * s))
        })
        .collect();
    let mw = MSTAR.min(p - 1);
    let zs = (mw as f64 + 0.5) * h;
    let true_mom = 2.0 * zs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let mut sampled = 0.0;
    for m in 1..=mw {
        let z = m as f64 * h;
        sampled += 2.0 * z * z * kap[m - 1];
    }
    kap[0] += (true_mom - sampled) / (2.0 * h * h);
    kap
}

/// Kernel cell integral over the cell centred at (a h, b h) by tensor
/// Gauss-Legendre, subdivided near the singularity.
fn cell_integral_2d(a: usize, b: usize, h: f64, s: f64) -> f64 {
    let m = a.max(b);
    let sub = if m <= 2 {
        6
    } else if m <= 6 {
        2
    } else {
        1
    };
    let hh = h / sub as f64;
    let x0 = a as f64 * h - 0.5 * h;
    let y0 = b as f64 * h - 0.5 * h;
    let mut total = 0.0;
    for ia in 0..sub {
        for ib in 0..sub {
            let xa = x0 + ia as f64 * hh;
            let yb = y0 + ib as f64 * hh;
            for (x, wx) in gl12_nodes(xa, xa + hh) {
                for (y, wy) in gl12_nodes(yb, yb + hh) {
                    total += wx * wy * (x * x + y * y).powf(-1.0 - s);
                }
            }
        }
    }
    total
}

/// z1^2-moment of the kernel over the square [-bq, bq]^2:
/// int cos^2(t) R(t)^{2-2s} / (2-2s) dt with R the square's radial support.
fn square_moment_2d(bq: f64, s: f64) -> f64 {
    let f = |t: f64| {
        let r = bq / t.cos().abs().max(t.sin().abs());
        t.cos().powi(2) * r.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)
    };
    let mut total = 0.0;
    for k in 0..8 {
        let a = k as f64 * std::f64::consts::FRAC_PI_4;
        total += gl12_integrate(f, a, a + std::f64::consts::FRAC_PI_4, 4);
    }
    total
}

fn kappa_2d(p: usize, h: f64, s: f64) -> Vec<f64> {
    let mut kap = vec![0.0; p * p];
    // Rows are independent; the (a, b) <-> (b, a) symmetry halves the work.
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|a| {
            (0..p)
                .map(|b| {
                    if (a == 0 && b == 0) || b < a {
                        0.0
                    } else {
                        cell_integral_2d(a, b, h, s)
                    }
                })
                .collect()
        })
        .collect();
    for a in 0..p {
        for b in a..p {
            kap[a * p + b] = rows[a][b];
            kap[b * p + a] = rows[a][b];
        }
    }
    let mw = MSTAR.min(p - 1);
    let true_mom = square_moment_2d((mw as f64 + 0.5) * h, s);
    let mut sampled = 0.0;
    for a in -(mw as i64)..=mw as i64 {
        for b in -(mw as i64)..=mw as i64 {
            if a == 0 && b == 0 {
                continue;
            }
            let z = a as f64 * h;
            sampled += z * z * kap[(a.unsigned_abs() as usize) * p + b.unsigned_abs() as usize];
        }
    }
    let corr = (true_mom - sampled) / (2.0 * h * h);
    kap[1] += corr; // offset (0, 1)
    kap[p] += corr; // offset (1, 0)
    kap
}

/// int_{|z| > B +- x} |z|^{-1-2s} dz for the two 1D half-lines.
fn tail_1d(x: f64, b: f64, s: f64) -> f64 {
    ((b - x).powf(-2.0 * s) + (b + x).powf(-2.0 * s)) / (2.0 * s)
}

/// int over R^2 minus the enlarged box of |y - x|^{-2-2s} dy, via the
/// angular form int R(t)^{-2s} dt / (2s), split at the corner directions.
fn tail_2d(xp: f64, yp: f64, b: f64, s: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let ray_exit = |t: f64| -> f64 {
        let (st, ct) = t.sin_cos();
        let mut r = f64::INFINITY;
        if ct > 1e-300 {
            r = r.min((b - xp) / ct);
        }
        if ct < -1e-300 {
            r = r.min((-b - xp) / ct);
        }
        if st > 1e-300 {
            r = r.min((b - yp) / st);
        }
        if st < -1e-300 {
            r = r.min((-b - yp) / st);
        }
        r
    };
    let mut cuts: Vec<f64> = [
        (b - yp).atan2(b - xp),
        (b - yp).atan2(-b - xp),
        (-b - yp).atan2(-b - xp),
        (-b - yp).atan2(b - xp),
    ]
    .iter()
    .map(|t| t.rem_euclid(two_pi))
    .collect();
    cuts.sort_by(f64::total_cmp);
    let mut pts = vec![0.0];
    pts.extend(cuts);
    pts.push(two_pi);
    let mut total = 0.0;
    for w in pts.windows(2) {
        if w[1] - w[0] > 1e-15 {
            total += gl12_integrate(|t| ray_exit(t).powf(-2.0 * s), w[0], w[1], 8);
        }
    }
    total / (2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraclap::oracle::oracle_slap;
    use crate::fraclap::AnalyticFn;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gl12_exact_on_high_degree_polynomials() {
        // 12-point Gauss is exact through degree 23.
        let v = gl12_integrate(|x| x.powi(22), -1.0, 1.0, 1);
        assert!((v - 2.0 / 23.0).abs() < 1e-14, "got {v}");
        let w = gl12_integrate(|x| x.powi(23) + 1.0, -1.0, 1.0, 1);
        assert!((w - 2.0).abs() < 1e-14, "got {w}");
    }

    #[test]
    fn kappa_1d_matches_riemann_cell_integrals() {
        // Away from the corrected first entry, each weight is the plain
        // integral of |z|^{-1-2s} over its cell.
        let h = 0.125;
        let s = 0.3;
        let kap = kappa_1d(40, h, s);
        for m in [2usize, 5, 20] {
            let (a, b) = ((m as f64 - 0.5) * h, (m as f64 + 0.5) * h);
            let n = 100_000;
            let step = (b - a) / n as f64;
            let riemann: f64 = (0..n)
                .map(|k| step * (a + (k as f64 + 0.5) * step).powf(-1.0 - 2.0 * s))
                .sum();
            assert!(
                (kap[m - 1] - riemann).abs() < 1e-9 * riemann,
                "m={m}: {} vs {riemann}",
                kap[m - 1]
            );
        }
    }

    #[test]
    fn moment_matching_is_exact_1d() {
        let h = 1.0 / 64.0;
        let s = 0.4;
        let kap = kappa_1d(600, h, s);
        let zs = (MSTAR as f64 + 0.5) * h;
        let want = 2.0 * zs.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        let got: f64 = (1..=MSTAR)
            .map(|m| 2.0 * (m as f64 * h).powi(2) * kap[m - 1])
            .sum();
        assert!((got - want).abs() < 1e-13 * want, "{got} vs {want}");
    }

    #[test]
    fn moment_matching_is_exact_2d() {
        let h = 1.0 / 8.0;
        let s = 0.5;
        let p = 40;
        let kap = kappa_2d(p, h, s);
        let want = square_moment_2d((MSTAR as f64 + 0.5) * h, s);
        let mut got = 0.0;
        for a in -(MSTAR as i64)..=MSTAR as i64 {
            for b in -(MSTAR as i64)..=MSTAR as i64 {
                if a == 0 && b == 0 {
                    continue;
                }
                let z = a as f64 * h;
                got += z * z * kap[(a.unsigned_abs() as usize) * p + b.unsigned_abs() as usize];
            }
        }
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
    }

    #[test]
    fn difference_only_annihilates_constants_bit_exactly() {
        let grid = Grid::new(1, 2.0, 0.125).unwrap();
        let op = FracLapOperator::build(&grid, 0.3, OperatorMode::DifferenceOnly).unwrap();
        let u = vec![3.7; grid.node_count()];
        let au = op.apply_values(&u).unwrap();
        assert!(
            au.iter().all(|&v| v == 0.0),
            "constants must map to 0.0 exactly"
        );

        let grid2 = Grid::new(2, 1.0, 0.25).unwrap();
        let op2 = FracLapOperator::build(&grid2, 0.6, OperatorMode::DifferenceOnly).unwrap();
        let u2 = vec![-1.25; grid2.node_count()];
        let au2 = op2.apply_values(&u2).unwrap();
        assert!(au2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_matrix_is_symmetric_and_diagonally_dominant() {
        let grid = Grid::new(1, 2.0, 0.25).unwrap();
        let op = FracLapOperator::build(&grid, 0.25, OperatorMode::WithTail).unwrap();
        let n = grid.node_count();
        let a = op.to_dense().unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(a[i * n + j], a[j * n + i]);
            }
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i * n + j].abs()).sum();
            // Strict dominance margin is exactly the tail coefficient.
            let margin = a[i * n + i] - off;
            assert!(
                (margin - op.tail_coefficient(i)).abs() < 1e-12 * a[i * n + i],
                "node {i}"
            );
            assert!(margin > 0.0);
        }
    }

    #[test]
    fn apply_matches_dense_multiply() {
        let grid = Grid::new(2, 1.0, 0.25).unwrap();
        let op = FracLapOperator::build(&grid, 0.5, OperatorMode::WithTail).unwrap();
        let n = grid.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = op.to_dense().unwrap();
        let via_dense: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * u[j]).sum())
            .collect();
        let via_apply = op.apply_values(&u).unwrap();
        let scale = via_dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!(
                (via_apply[i] - via_dense[i]).abs() < 1e-11 * scale,
                "row {i}: {} vs {}",
                via_apply[i],
                via_dense[i]
            );
        }
    }

    #[test]
    fn tail_2d_closed_form_at_centre_half_order() {
        // At the centre, R(t) = B / max(|cos|, |sin|), so for s = 1/2 the
        // angular integral is 8 sin(pi/4) / B and the tail is 4 sqrt(2) / B
        // divided by 2s = 1.
        let b = 1.5;
        let got = tail_2d(0.0, 0.0, b, 0.5);
        let want = 4.0 * 2f64.sqrt() / b;
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
    }

    #[test]
    fn tail_is_symmetric_and_grows_toward_edge() {
        let grid = Grid::new(2, 1.0, 0.125).unwrap();
        let op = FracLapOperator::build(&grid, 0.5, OperatorMode::WithTail).unwrap();
        let n = grid.node_count();
        for i in 0..n {
            let j = n - 1 - i; // x -> -x
            let rel =
                (op.tail_coefficient(i) - op.tail_coefficient(j)).abs() / op.tail_coefficient(i);
            assert!(rel < 1e-12, "node {i}");
        }
        // along the positive x-axis the tail increases with |x|
        let p = grid.points_per_axis();
        let mid = p / 2;
        let mut prev = 0.0;
        for a in mid..p {
            let t = op.tail_coefficient(a * p + mid);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn operator_tracks_oracle_1d() {
        // Cross-route check: lattice operator vs quadrature oracle on a
        // Gaussian; the box at L = 8 truncates e^{-x^2} below rounding.
        let grid = Grid::new(1, 8.0, 1.0 / 32.0).unwrap();
        let f = AnalyticFn::gaussian(1);
        let u: Vec<f64> = (0..grid.node_count())
            .map(|i| f.eval(&grid.coord(i)[..1]))
            .collect();
        for s in [0.25, 0.4] {
            let op = FracLapOperator::build(&grid, s, OperatorMode::WithTail).unwrap();
            for x in [0.0, 0.5, 1.25] {
                let i = (0..grid.node_count())
                    .find(|&i| (grid.coord(i)[0] - x).abs() < 1e-12)
                    .unwrap();
                let got = op.apply_row(&u, i);
                let want = oracle_slap(&f, &[x], s).unwrap();
                let rel = (got - want).abs() / want.abs();
                assert!(rel < 1e-3, "s={s} x={x}: {got} vs {want}, rel {rel:.2e}");
            }
        }
    }

    #[test]
    fn operator_tracks_oracle_2d_smoke() {
        let grid = Grid::new(2, 6.0, 0.125).unwrap();
        let f = AnalyticFn::gaussian(2);
        let u: Vec<f64> = (0..grid.node_count())
            .map(|i| f.eval(&grid.coord(i)[..2]))
            .collect();
        let s = 0.5;
        let op = FracLapOperator::build(&grid, s, OperatorMode::WithTail).unwrap();
        for x in [0.0, 0.5] {
            let i = (0..grid.node_count())
                .find(|&i| {
                    let c = grid.coord(i);
                    (c[0] - x).abs() < 1e-12 && c[1].abs() < 1e-12
                })
                .unwrap();
            let got = op.apply_row(&u, i);
            let want = oracle_slap(&f, &[x, 0.0], s).unwrap();
            let rel = (got - want).abs() / want.abs();
            assert!(rel < 5e-3, "x={x}: {got} vs {want}, rel {rel:.2e}");
        }
    }

    #[test]
    fn even_input_gives_even_output() {
        let grid = Grid::new(1, 4.0, 0.125).unwrap();
        let op = FracLapOperator::build(&grid, 0.25, OperatorMode::WithTail).unwrap();
        let n = grid.node_count();
        let u: Vec<f64> = (0..n)
            .map(|i| {
                let x = grid.coord(i)[0];
                (-x * x).exp()
            })
            .collect();
        let au = op.apply_values(&u).unwrap();
        let scale = au.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!((au[i] - au[n - 1 - i]).abs() <= 1e-13 * scale, "node {i}");
        }
    }
}
