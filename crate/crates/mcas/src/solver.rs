//! Cyclic (periodic) tridiagonal solve via Thomas + Sherman-Morrison, used by
//! the 1D implicit diffusion step. The system has constant coefficients:
//! diagonal `d`, off-diagonals `e`, with periodic corner entries `e`.

/// Solve the non-cyclic constant-coefficient tridiagonal system in place.
/// `diag` holds the per-row diagonal (rows 0 and n-1 may differ after the
/// Sherman-Morrison rank-one correction), `off` the constant off-diagonal.
fn thomas_const(diag: &[f64], off: f64, rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    let mut beta = diag[0];
    rhs[0] /= beta;
    for j in 1..n {
        scratch[j] = off / beta;
        beta = diag[j] - off * scratch[j];
        rhs[j] = (rhs[j] - off * rhs[j - 1]) / beta;
    }
    for j in (0..n - 1).rev() {
        rhs[j] -= scratch[j + 1] * rhs[j + 1];
    }
}

/// Solve `A x = rhs` where `A` is the n x n cyclic tridiagonal matrix with
/// constant diagonal `d`, constant off-diagonal `e`, and corner entries `e`
/// (the periodic second-difference shape). `rhs` is overwritten with `x`.
pub fn solve_cyclic_const(d: f64, e: f64, rhs: &mut [f64]) {
    let n = rhs.len();
    assert!(n >= 3, "cyclic tridiagonal solve needs n >= 3");
    if e == 0.0 {
        for v in rhs.iter_mut() {
            *v /= d;
        }
        return;
    }
    // Sherman-Morrison: A = B + u v^T with u = (gamma, 0, .., 0, e)^T,
    // v = (1, 0, .., 0, e/gamma)^T; B tridiagonal with modified corners.
    let gamma = -d;
    let mut diag = vec![d; n];
    diag[0] = d - gamma;
    diag[n - 1] = d - e * e / gamma;

    let mut scratch = vec![0.0; n];
    // z = B^{-1} rhs
    thomas_const(&diag, e, rhs, &mut scratch);
    // q = B^{-1} u
    let mut q = vec![0.0; n];
    q[0] = gamma;
    q[n - 1] = e;
    thomas_const(&diag, e, &mut q, &mut scratch);

    let vz = rhs[0] + e / gamma * rhs[n - 1];
    let vq = q[0] + e / gamma * q[n - 1];
    let factor = vz / (1.0 + vq);
    for j in 0..n {
        rhs[j] -= factor * q[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_cyclic(d: f64, e: f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| d * x[i] + e * x[(i + n - 1) % n] + e * x[(i + 1) % n])
            .collect()
    }

    #[test]
    fn recovers_known_solution() {
        let n = 64;
        let d = 1.5 + 2.0 * 0.7;
        let e = -0.7;
        let x: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin() + 0.1).collect();
        let mut rhs = apply_cyclic(d, e, &x);
        solve_cyclic_const(d, e, &mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn diagonal_case() {
        let mut rhs = vec![2.0, 4.0, 6.0, 8.0];
        solve_cyclic_const(2.0, 0.0, &mut rhs);
        assert_eq!(rhs, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn constant_vector_eigenpair() {
        // (d + 2e) is the eigenvalue for the constant vector.
        let n = 16;
        let d = 3.0;
        let e = -0.5;
        let mut rhs = vec![d + 2.0 * e; n];
        solve_cyclic_const(d, e, &mut rhs);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
