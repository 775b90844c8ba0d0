//! Uniform lattice on the truncation box [-L, L]^n and the partition of its
//! nodes into interior (free) and exterior (constrained) sets.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform tensor grid on [-L, L]^n, n in {1, 2}. Nodes sit at integer
/// multiples of the spacing, so 0 is always a node and the node set is
/// symmetric under x -> -x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    spacing: f64,
    /// Nodes per axis: 2*(L/h) + 1.
    points_per_axis: usize,
}

impl Grid {
    /// Requires L/h to be an integer (within 1e-9 relative). Use
    /// [`Grid::with_rounded_spacing`] to round a non-divisible spacing down.
    pub fn new(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParam(format!(
                "dim must be 1 or 2, got {dim}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParam(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        if !(spacing > 0.0) || spacing > half_width {
            return Err(Error::InvalidParam(format!(
                "spacing must lie in (0, half_width], got {spacing}"
            )));
        }
        let ratio = half_width / spacing;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParam(format!(
                "half_width/spacing = {ratio} is not an integer; nearest divisor spacing is {}",
                half_width / ratio.ceil()
            )));
        }
        let n0 = k as usize;
        Ok(Grid {
            dim,
            half_width,
            spacing: half_width / k,
            points_per_axis: 2 * n0 + 1,
        })
    }

    /// Rounds the spacing down to the nearest exact divisor of L and records
    /// the adjustment. Returns the grid and `Some(adjusted_spacing)` when the
    /// requested spacing was changed.
    pub fn with_rounded_spacing(
        dim: usize,
        half_width: f64,
        spacing: f64,
    ) -> Result<(Self, Option<f64>)> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParam(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let spacing = spacing.min(half_width);
        match Self::new(dim, half_width, spacing) {
            Ok(g) => Ok((g, None)),
            Err(_) => {
                let k = (half_width / spacing).ceil();
                let g = Self::new(dim, half_width, half_width / k)?;
                Ok((g, Some(g.spacing)))
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn node_count(&self) -> usize {
        match self.dim {
            1 => self.points_per_axis,
            _ => self.points_per_axis * self.points_per_axis,
        }
    }

    /// Cell volume h^n.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Axis coordinate of the k-th node, computed as a signed integer times
    /// the spacing so that x and -x have bit-identical magnitudes.
    pub fn axis_coord(&self, k: usize) -> f64 {
        let n0 = (self.points_per_axis / 2) as i64;
        (k as i64 - n0) as f64 * self.spacing
    }

    /// Multi-index of a flat node index (second entry 0 in 1D).
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        match self.dim {
            1 => [i, 0],
            _ => [i / self.points_per_axis, i % self.points_per_axis],
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        match self.dim {
            1 => mi[0],
            _ => mi[0] * self.points_per_axis + mi[1],
        }
    }

    /// Node coordinates; only the first `dim` entries are meaningful.
    pub fn coord(&self, i: usize) -> [f64; 2] {
        let mi = self.multi_index(i);
        [self.axis_coord(mi[0]), self.axis_coord(mi[1])]
    }

    /// Euclidean distance from node i to the box boundary.
    pub fn dist_to_box_boundary(&self, i: usize) -> f64 {
        let c = self.coord(i);
        c[..self.dim]
            .iter()
            .fold(f64::INFINITY, |d, ck| d.min(self.half_width - ck.abs()))
    }

    /// True if the node lies on the outermost layer of the box.
    pub fn on_outer_layer(&self, i: usize) -> bool {
        let mi = self.multi_index(i);
        (0..self.dim).any(|k| mi[k] == 0 || mi[k] == self.points_per_axis - 1)
    }
}

/// Node-indexed scalar samples bound to the grid they were sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: *grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(ScalarField {
            grid: *grid,
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|i| {
                let c = grid.coord(i);
                f(&c[..grid.dim()])
            })
            .collect();
        ScalarField {
            grid: *grid,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid != *grid {
            return Err(Error::GridMismatch(
                "field was sampled on a different grid".into(),
            ));
        }
        Ok(())
    }
}

/// Parametric open region Omega. Interval and box bounds are per-axis;
/// unions may overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaShape {
    Interval { bounds: [f64; 2] },
    Ball { center: Vec<f64>, radius: f64 },
    Box2 { bounds: [[f64; 2]; 2] },
    Union { parts: Vec<OmegaShape> },
}

impl OmegaShape {
    pub fn validate(&self, dim: usize) -> std::result::Result<(), String> {
        match self {
            OmegaShape::Interval { bounds } => {
                if dim != 1 {
                    return Err("interval omega requires dim = 1".into());
                }
                if !(bounds[0] < bounds[1]) {
                    return Err(format!(
                        "interval bounds must be increasing, got [{}, {}]",
                        bounds[0], bounds[1]
                    ));
                }
                Ok(())
            }
            OmegaShape::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(format!(
                        "ball center has {} coordinates, dim is {dim}",
                        center.len()
                    ));
                }
                if !(*radius > 0.0) {
                    return Err(format!("ball radius must be positive, got {radius}"));
                }
                Ok(())
            }
            OmegaShape::Box2 { bounds } => {
                if dim != 2 {
                    return Err("box omega requires dim = 2".into());
                }
                for (k, b) in bounds.iter().enumerate() {
                    if !(b[0] < b[1]) {
                        return Err(format!(
                            "box bounds on axis {k} must be increasing, got [{}, {}]",
                            b[0], b[1]
                        ));
                    }
                }
                Ok(())
            }
            OmegaShape::Union { parts } => {
                if parts.is_empty() {
                    return Err("union omega must have at least one part".into());
                }
                for p in parts {
                    p.validate(dim)?;
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            OmegaShape::Interval { bounds } => bounds[0] < x[0] && x[0] < bounds[1],
            OmegaShape::Ball { center, radius } => {
                let d2: f64 = center
                    .iter()
                    .zip(x)
                    .map(|(c, xi)| (xi - c) * (xi - c))
                    .sum();
                d2 < radius * radius
            }
            OmegaShape::Box2 { bounds } => {
                (0..2).all(|k| bounds[k][0] < x[k] && x[k] < bounds[k][1])
            }
            OmegaShape::Union { parts } => parts.iter().any(|p| p.contains(x)),
        }
    }

    /// Axis-aligned bounding box, as (lower, upper) per axis.
    pub fn bounding_box(&self, dim: usize) -> ([f64; 2], [f64; 2]) {
        match self {
            OmegaShape::Interval { bounds } => ([bounds[0], 0.0], [bounds[1], 0.0]),
            OmegaShape::Ball { center, radius } => {
                let mut lo = [0.0; 2];
                let mut hi = [0.0; 2];
                for k in 0..dim {
                    lo[k] = center[k] - radius;
                    hi[k] = center[k] + radius;
                }
                (lo, hi)
            }
            OmegaShape::Box2 { bounds } => {
                ([bounds[0][0], bounds[1][0]], [bounds[0][1], bounds[1][1]])
            }
            OmegaShape::Union { parts } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for p in parts {
                    let (plo, phi) = p.bounding_box(dim);
                    for k in 0..dim {
                        lo[k] = lo[k].min(plo[k]);
                        hi[k] = hi[k].max(phi[k]);
                    }
                }
                (lo, hi)
            }
        }
    }
}

/// Grid plus node classification. A node is interior when its closed cell
/// [x - h/2, x + h/2]^n lies inside the open set Omega; a cell that touches
/// or straddles the boundary makes its node exterior. For a single convex
/// shape the corner test below is exact; for unions it is the natural
/// conservative extension (all corners and the centre must lie in Omega).
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub grid: Grid,
    pub shape: OmegaShape,
    interior_mask: Vec<bool>,
    interior_nodes: Vec<usize>,
}

impl DomainSpec {
    pub fn new(grid: Grid, shape: OmegaShape) -> Result<Self> {
        shape.validate(grid.dim()).map_err(Error::InvalidParam)?;

        // Omega must sit strictly inside the box with at least one cell of
        // clearance, so the exterior region near the box edge is genuine.
        let margin = grid.half_width() - grid.spacing();
        let (lo, hi) = shape.bounding_box(grid.dim());
        for k in 0..grid.dim() {
            if lo[k] < -margin || hi[k] > margin {
                return Err(Error::InvalidParam(format!(
                    "omega must lie inside the box with >= 1 cell margin: axis {k} extent [{}, {}] vs [{}, {}]",
                    lo[k], hi[k], -margin, margin
                )));
            }
        }

        let h2 = grid.spacing() / 2.0;
        let dim = grid.dim();
        let mut interior_mask = vec![false; grid.node_count()];
        let mut interior_nodes = Vec::new();
        for (i, mask) in interior_mask.iter_mut().enumerate() {
            let c = grid.coord(i);
            let mut inside = shape.contains(&c[..dim]);
            if inside {
                let corners: &[[f64; 2]] = match dim {
                    1 => &[[-h2, 0.0], [h2, 0.0]],
                    _ => &[[-h2, -h2], [-h2, h2], [h2, -h2], [h2, h2]],
                };
                for off in corners {
                    let p = [c[0] + off[0], c[1] + off[1]];
                    if !shape.contains(&p[..dim]) {
                        inside = false;
                        break;
                    }
                }
            }
            if inside {
                *mask = true;
                interior_nodes.push(i);
            }
        }
        if interior_nodes.is_empty() {
            return Err(Error::InvalidParam(
                "omega contains no interior node at this spacing".into(),
            ));
        }
        Ok(DomainSpec {
            grid,
            shape,
            interior_mask,
            interior_nodes,
        })
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior_mask[i]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Exterior nodes inside the box (complement of the interior set).
    pub fn exterior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.node_count()).filter(|&i| !self.interior_mask[i])
    }
}
