//! Uniform periodic grids on the torus (1D and 2D) with the differential
//! operators and quadrature the time loop needs.

use crate::error::{McasError, Result};

/// Minimum resolution per axis; anything coarser is rejected as under-resolved.
pub const MIN_POINTS_PER_AXIS: usize = 16;

/// Quadrature rule for [`Field::integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Plain Riemann/trapezoid sum; spectrally accurate on a periodic grid.
    Trapezoid,
    /// Composite Simpson with periodic wrap; requires an even node count.
    Simpson,
}

/// A uniform periodic grid covering `[0, extent)` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    extent: f64,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(McasError::config(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(McasError::config(format!("extent must be positive, got {extent}")));
        }
        if points_per_axis < MIN_POINTS_PER_AXIS {
            return Err(McasError::config(format!(
                "points_per_axis must be at least {MIN_POINTS_PER_AXIS}, got {points_per_axis}"
            )));
        }
        if points_per_axis % 2 != 0 {
            return Err(McasError::config(format!(
                "points_per_axis must be even, got {points_per_axis}"
            )));
        }
        Ok(GridSpec { dim, extent, points_per_axis })
    }

    /// Default 1D grid: 256 nodes on a 10 um cell.
    pub fn default_1d() -> Self {
        GridSpec { dim: 1, extent: 10.0, points_per_axis: 256 }
    }

    /// Default 2D grid: 128x128 on a 10x10 um torus.
    pub fn default_2d() -> Self {
        GridSpec { dim: 2, extent: 10.0, points_per_axis: 128 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Grid spacing h = extent / points_per_axis (same on every axis).
    pub fn spacing(&self) -> f64 {
        self.extent / self.points_per_axis as f64
    }

    /// Total number of nodes.
    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Measure of the torus: extent^dim.
    pub fn domain_measure(&self) -> f64 {
        self.extent.powi(self.dim as i32)
    }

    /// Measure of one cell: h^dim.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Node-centered coordinate along one axis: x_j = j * h.
    pub fn coord(&self, index: usize) -> f64 {
        index as f64 * self.spacing()
    }

    /// Coordinate of a flattened node index along axis 0 (x position).
    /// Fields are stored row-major with axis 0 fastest.
    pub fn x_of(&self, flat: usize) -> f64 {
        self.coord(flat % self.points_per_axis)
    }
}

/// A real scalar field sampled at the grid nodes.
///
/// Storage is row-major with axis 0 fastest: `values[ix + n*iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field { grid, values: vec![0.0; grid.node_count()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Field { grid, values: vec![c; grid.node_count()] }
    }

    /// Build from per-node values; checks count and finiteness.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(McasError::config(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        let f = Field { grid, values };
        f.check_finite(0.0)?;
        Ok(f)
    }

    /// Evaluate `f(coords)` at every node. 1D closures receive `[x, 0]`.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.points_per_axis;
        let mut values = Vec::with_capacity(grid.node_count());
        match grid.dim {
            1 => {
                for ix in 0..n {
                    values.push(f(grid.coord(ix), 0.0));
                }
            }
            _ => {
                for iy in 0..n {
                    let y = grid.coord(iy);
                    for ix in 0..n {
                        values.push(f(grid.coord(ix), y));
                    }
                }
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_finite(&self, time: f64) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(McasError::Integrity { time, message: "field contains NaN or Inf".into() })
        }
    }

    /// Second-order central-difference Laplacian with periodic wrap.
    /// In 2D the per-axis stencils are summed.
    pub fn laplacian(&self) -> Field {
        let n = self.grid.points_per_axis;
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let v = &self.values;
        let mut out = vec![0.0; v.len()];
        match self.grid.dim {
            1 => {
                for i in 0..n {
                    let l = v[(i + n - 1) % n];
                    let r = v[(i + 1) % n];
                    out[i] = (l - 2.0 * v[i] + r) * inv_h2;
                }
            }
            _ => {
                for iy in 0..n {
                    let row = iy * n;
                    let up = ((iy + n - 1) % n) * n;
                    let dn = ((iy + 1) % n) * n;
                    for ix in 0..n {
                        let l = v[row + (ix + n - 1) % n];
                        let r = v[row + (ix + 1) % n];
                        let c = v[row + ix];
                        out[row + ix] =
                            (l + r + v[up + ix] + v[dn + ix] - 4.0 * c) * inv_h2;
                    }
                }
            }
        }
        Field { grid: self.grid, values: out }
    }

    /// Quadrature over the torus.
    pub fn integrate(&self, rule: QuadratureRule) -> f64 {
        match rule {
            QuadratureRule::Trapezoid => {
                // On a periodic uniform grid the trapezoid rule is the plain
                // Riemann sum.
                self.grid.cell_measure() * self.values.iter().sum::<f64>()
            }
            QuadratureRule::Simpson => {
                let n = self.grid.points_per_axis;
                let h = self.grid.spacing();
                // Periodic composite Simpson: w_j = 2h/3 (even j), 4h/3 (odd j).
                let w = |j: usize| if j % 2 == 0 { 2.0 * h / 3.0 } else { 4.0 * h / 3.0 };
                match self.grid.dim {
                    1 => (0..n).map(|i| w(i) * self.values[i]).sum(),
                    _ => {
                        let mut total = 0.0;
                        for iy in 0..n {
                            let wy = w(iy);
                            for ix in 0..n {
                                total += wy * w(ix) * self.values[iy * n + ix];
                            }
                        }
                        total
                    }
                }
            }
        }
    }

    /// Discrete L2 norm sqrt(h^d * sum v^2).
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_measure() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Max-norm.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
