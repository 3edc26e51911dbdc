//! Discrete Fourier utilities: forward/inverse transforms, Sobolev norms and
//! the diagonal solve used by the 2D implicit diffusion step.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{McasError, Result};
use crate::grid::{Field, GridSpec};

/// Fourier coefficients of a Field, unnormalized DFT convention
/// (`coeffs[k] = sum_j v[j] exp(-2 pi i j k / N)` per axis).
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Transform along both axes of a row-major square 2D buffer (axis 0 fastest).
fn fft_2d(buf: &mut [Complex64], n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    // Rows (contiguous).
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    // Columns via transpose-process-transpose.
    let mut col = vec![Complex64::default(); n];
    for ix in 0..n {
        for iy in 0..n {
            col[iy] = buf[iy * n + ix];
        }
        fft.process(&mut col);
        for iy in 0..n {
            buf[iy * n + ix] = col[iy];
        }
    }
}

/// Forward transform of a field.
pub fn transform(f: &Field) -> Spectrum {
    let grid = *f.grid();
    let n = grid.points_per_axis();
    let mut coeffs: Vec<Complex64> =
        f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    match grid.dim() {
        1 => plan(n, false).process(&mut coeffs),
        _ => fft_2d(&mut coeffs, n, false),
    }
    Spectrum { grid, coeffs }
}

/// Inverse transform, returning a real field (imaginary parts dropped).
pub fn inverse(s: &Spectrum) -> Field {
    let n = s.grid.points_per_axis();
    let mut buf = s.coeffs.clone();
    match s.grid.dim() {
        1 => plan(n, true).process(&mut buf),
        _ => fft_2d(&mut buf, n, true),
    }
    let norm = 1.0 / s.grid.node_count() as f64;
    let values: Vec<f64> = buf.iter().map(|c| c.re * norm).collect();
    Field::from_values(s.grid, values).expect("inverse transform produced non-finite values")
}

impl Spectrum {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Signed integer mode number for a raw index along one axis.
    pub fn mode_number(n: usize, idx: usize) -> i64 {
        if idx <= n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// Physical wavevector component 2 pi m / extent for a raw index.
    pub fn wavevector(&self, idx: usize) -> f64 {
        let n = self.grid.points_per_axis();
        2.0 * std::f64::consts::PI * Self::mode_number(n, idx) as f64 / self.grid.extent()
    }

    /// |k|^2 of a flattened coefficient index.
    pub fn k_squared(&self, flat: usize) -> f64 {
        let n = self.grid.points_per_axis();
        match self.grid.dim() {
            1 => {
                let k = self.wavevector(flat);
                k * k
            }
            _ => {
                let kx = self.wavevector(flat % n);
                let ky = self.wavevector(flat / n);
                kx * kx + ky * ky
            }
        }
    }
}

/// Spectral Sobolev norm ( sum_k (1+|k|^2)^s |c_k|^2 )^(1/2) with the
/// normalization that makes s=0 the discrete L2 norm.
pub fn sobolev_norm(f: &Field, s: u32) -> Result<f64> {
    let grid = f.grid();
    if s as usize > grid.points_per_axis() / 4 {
        return Err(McasError::config(format!(
            "sobolev order s={s} too high for {} points per axis (aliasing)",
            grid.points_per_axis()
        )));
    }
    let spec = transform(f);
    // c_k = h^d * coeffs[k] approximates the Fourier integral; Parseval on the
    // torus gives ||f||^2 = (1/|T|) sum |c_k|^2.
    let scale = grid.cell_measure() * grid.cell_measure() / grid.domain_measure();
    let mut total = 0.0;
    for (flat, c) in spec.coeffs().iter().enumerate() {
        let w = (1.0 + spec.k_squared(flat)).powi(s as i32);
        total += w * c.norm_sqr();
    }
    Ok((scale * total).sqrt())
}

/// Eigenvalue of the central-difference Laplacian for one axis mode index.
pub fn fd_laplacian_eigenvalue(grid: &GridSpec, idx: usize) -> f64 {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let theta = 2.0 * std::f64::consts::PI * idx as f64 / n as f64;
    (2.0 * theta.cos() - 2.0) / (h * h)
}

/// Solve (a0 I - c * Lap_fd) u = rhs on a 2D grid by diagonalizing the
/// finite-difference Laplacian in Fourier space.
pub fn solve_helmholtz_2d(rhs: &Field, a0: f64, c: f64) -> Field {
    let grid = *rhs.grid();
    let n = grid.points_per_axis();
    let mut spec = transform(rhs);
    for iy in 0..n {
        let ly = fd_laplacian_eigenvalue(&grid, iy);
        for ix in 0..n {
            let lx = fd_laplacian_eigenvalue(&grid, ix);
            spec.coeffs[iy * n + ix] /= a0 - c * (lx + ly);
        }
    }
    inverse(&spec)
}
