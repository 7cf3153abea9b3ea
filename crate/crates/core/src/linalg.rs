//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default cap on the system dimension `d` (superoperators are `d^2 x d^2`).
pub const DEFAULT_MAX_DIM: usize = 16;

/// Environment variable that overrides [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "NONMARKOV_MAX_DIM";

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&d| d > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub fn check_dim_budget(dim: usize) -> Result<()> {
    let max = max_dim();
    if dim > max {
        return Err(Error::DimensionBudget { dim, max });
    }
    Ok(())
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}

/// `|0><1|`, the raising operator in the convention `sigma_z |0> = |0>`.
pub fn sigma_plus() -> CMatrix {
    matrix_unit(2, 0, 1)
}

pub fn sigma_minus() -> CMatrix {
    matrix_unit(2, 1, 0)
}

/// `E_ij = |i><j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = c64(1., 0.);
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

pub fn require_square(a: &CMatrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Eigenvalues (ascending) of the Hermitian part `(A + A^†)/2`.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = (a + a.adjoint()) * c64(0.5, 0.);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_hermitian_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// Eigen-decomposition of the Hermitian part: ascending eigenvalues with
/// eigenvectors as matching columns.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (a + a.adjoint()) * c64(0.5, 0.);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = a.nrows();
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (order.iter().map(|&i| eig.eigenvalues[i]).collect(), vecs)
}

/// Complex eigenvalues of a general square matrix from its Schur form.
pub fn eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let t = match Schur::try_new(a.clone(), f64::EPSILON, 0) {
        Some(s) => s.unpack().1,
        None => return Vec::new(),
    };
    let mut out = Vec::with_capacity(n);
    let mut m = 0;
    while m < n {
        if m + 1 < n && t[(m + 1, m)].norm() > 0.0 {
            // Leftover 2x2 block: solve its characteristic polynomial.
            let (p, q, r, s) = (t[(m, m)], t[(m, m + 1)], t[(m + 1, m)], t[(m + 1, m + 1)]);
            let half_tr = (p + s) * 0.5;
            let det = p * s - q * r;
            let disc = (half_tr * half_tr - det).sqrt();
            out.push(half_tr + disc);
            out.push(half_tr - disc);
            m += 2;
        } else {
            out.push(t[(m, m)]);
            m += 1;
        }
    }
    out
}

pub fn min_abs_eigenvalue(a: &CMatrix) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
}

/// Matrix exponential (Pade scaling and squaring).
pub fn expm(a: &CMatrix) -> CMatrix {
    a.exp()
}

/// `exp(-i t H) = U diag(exp(-i t e_k)) U^†` for Hermitian `H`.
pub fn unitary_evolution(h: &CMatrix, t: f64) -> CMatrix {
    let (ev, u) = hermitian_eigen(h);
    let phases = CMatrix::from_diagonal(&CVector::from_iterator(
        ev.len(),
        ev.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
    ));
    &u * phases * u.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis (as columns) of the `k`-dimensional approximate null
/// space of `a`, together with the largest singular value that was treated
/// as zero.
pub fn approximate_null_space(a: &CMatrix, k: usize) -> (CMatrix, f64) {
    let n = a.ncols();
    // Thin SVD only yields min(rows, cols) right vectors; pad to square.
    let padded = if a.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut basis = CMatrix::zeros(n, k);
    let mut worst: f64 = 0.0;
    for (col, &i) in order.iter().take(k).enumerate() {
        worst = worst.max(svd.singular_values[i]);
        for r in 0..n {
            basis[(r, col)] = v_t[(i, r)].conj();
        }
    }
    (basis, worst)
}

/// Three-point finite-difference derivative of a sampled series on a
/// (possibly non-uniform) grid: central in the interior, one-sided
/// second order at both ends. Requires at least 3 samples.
pub fn derivative_weights(grid: &[f64], index: usize) -> [(usize, f64); 3] {
    let n = grid.len();
    debug_assert!(n >= 3);
    let (i0, i1, i2) = if index == 0 {
        (0, 1, 2)
    } else if index == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (index - 1, index, index + 1)
    };
    let (x0, x1, x2) = (grid[i0], grid[i1], grid[i2]);
    let x = grid[index];
    // Derivative of the Lagrange interpolant through the three nodes.
    let w0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    let w1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    let w2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    [(i0, w0), (i1, w1), (i2, w2)]
}

pub fn finite_difference(grid: &[f64], values: &[CMatrix], index: usize) -> CMatrix {
    let [(i0, w0), (i1, w1), (i2, w2)] = derivative_weights(grid, index);
    &values[i0] * c64(w0, 0.) + &values[i1] * c64(w1, 0.) + &values[i2] * c64(w2, 0.)
}

pub fn finite_difference_scalar(grid: &[f64], values: &[Complex64], index: usize) -> Complex64 {
    derivative_weights(grid, index)
        .iter()
        .map(|&(i, w)| values[i] * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_is_exact_on_quadratics() {
        let grid = [0.0, 0.1, 0.25, 0.45, 0.7];
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let vals: Vec<Complex64> = grid.iter().map(|&x| c64(f(x), 0.0)).collect();
        for i in 0..grid.len() {
            let d = finite_difference_scalar(&grid, &vals, i);
            assert!((d.re - (6.0 * grid[i] - 2.0)).abs() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(-1., 0.), c64(1., 0.), c64(0., 0.)]);
        let mut ev = eigenvalues(&a);
        ev.sort_by(|x, y| x.im.total_cmp(&y.im));
        assert!((ev[0] - c64(0., -1.)).norm() < 1e-12);
        assert!((ev[1] - c64(0., 1.)).norm() < 1e-12);
    }

    #[test]
    fn unitary_evolution_matches_expm() {
        let h = sigma_x() * c64(0.3, 0.) + sigma_z() * c64(0.7, 0.);
        let u = unitary_evolution(&h, 1.7);
        let e = expm(&(h * c64(0., -1.7)));
        assert!(max_abs_diff(&u, &e) < 1e-12);
    }

    #[test]
    fn null_space_of_projector() {
        let p = CMatrix::from_diagonal(&CVector::from_vec(vec![c64(1., 0.), c64(0., 0.), c64(1., 0.)]));
        let (basis, worst) = approximate_null_space(&p, 1);
        assert!(worst < 1e-14);
        assert!((basis[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }
}
