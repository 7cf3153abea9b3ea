//! Damping-basis spectral decomposition of dynamical maps, the formal
//! inverse, and two independent routes to the time-local generator
//! `L(tau) = dLambda/dtau * Lambda^{-1}(tau)`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::superop::{self, Superoperator};
use crate::trajectory::{GeneratorTrajectory, MapTrajectory};

/// Eigenvalues closer than this (relative to `max(1, |lambda|)`) share an eigenspace.
pub const CLUSTER_TOL: f64 = 1e-7;
/// Eigenvector matrices with a larger condition number are treated as defective.
pub const MAX_CONDITION: f64 = 1e10;
/// Default invertibility threshold on `|lambda_mu|`.
pub const INVERTIBILITY_TOL: f64 = 1e-8;
/// Minimum overlap accepted when matching eigenvectors across grid points.
pub const MIN_TRACKING_OVERLAP: f64 = 0.5;

const NULL_SPACE_TOL: f64 = 1e-6;

/// Eigenvalues `lambda_mu` with biorthonormal right and left eigen-operators,
/// `Tr(F_mu G_nu^†) = delta_mu_nu`, so that
/// `Lambda(rho) = sum_mu lambda_mu F_mu Tr(G_mu^† rho)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingBasis {
    pub tau: f64,
    pub eigenvalues: Vec<Complex64>,
    #[serde(with = "crate::matrix_json::vec")]
    pub right_ops: Vec<CMatrix>,
    #[serde(with = "crate::matrix_json::vec")]
    pub left_ops: Vec<CMatrix>,
    /// Eigenspace label of each eigenvalue; equal labels mark degeneracy.
    pub groups: Vec<usize>,
}

impl DampingBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.right_ops.first().map_or(0, |f| f.nrows())
    }

    /// `gamma_mu = log lambda_mu` (principal branch).
    pub fn log_eigenvalues(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|l| l.ln()).collect()
    }

    /// Columns `vec(F_mu)`.
    fn right_matrix(&self) -> CMatrix {
        columns(&self.right_ops)
    }

    /// Rows `vec(G_mu)^†`.
    fn left_matrix(&self) -> CMatrix {
        columns(&self.left_ops).adjoint()
    }

    /// `sum_mu g(lambda_mu) |F_mu>><<G_mu|`.
    fn spectral_map(&self, g: impl Fn(Complex64) -> Complex64) -> Superoperator {
        let v = self.right_matrix();
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(self.len(), self.eigenvalues.iter().map(|&l| g(l))));
        Superoperator::from_matrix(self.dim(), v * diag * self.left_matrix()).expect("basis spans the operator space")
    }

    pub fn reconstruct(&self) -> Superoperator {
        self.spectral_map(|l| l)
    }

    /// Largest `|Tr(F_mu G_nu^†) - delta_mu_nu|`.
    pub fn biorthonormality_defect(&self) -> f64 {
        let overlap = self.left_matrix() * self.right_matrix();
        linalg::max_abs_diff(&overlap, &linalg::identity(self.len()))
    }

    /// Formal inverse on this basis; fails on the first `|lambda_mu| <= tol`.
    pub fn inverse(&self, tol: f64) -> Result<Superoperator> {
        if let Some((index, l)) = self.eigenvalues.iter().enumerate().find(|(_, l)| l.norm() <= tol) {
            return Err(Error::NotInvertible {
                index,
                modulus: l.norm(),
            });
        }
        Ok(self.spectral_map(|l| l.inv()))
    }

    pub fn group_count(&self) -> usize {
        let mut g = self.groups.clone();
        g.sort_unstable();
        g.dedup();
        g.len()
    }

    fn from_vectors(tau: f64, source: &CMatrix, v: CMatrix, groups: Vec<usize>) -> Result<Self> {
        let cond = linalg::condition_number(&v);
        if cond > MAX_CONDITION {
            return Err(Error::DefectiveMap(format!("eigenvector condition number {cond:e}")));
        }
        let w = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DefectiveMap("eigenvector matrix is singular".into()))?;
        let diag = &w * source * &v;
        let d = (source.nrows() as f64).sqrt().round() as usize;
        let n = v.ncols();
        let right_ops = (0..n)
            .map(|k| CMatrix::from_column_slice(d, d, v.column(k).as_slice()))
            .collect();
        let left_ops = (0..n)
            .map(|k| {
                let g: Vec<Complex64> = w.row(k).iter().map(|z| z.conj()).collect();
                CMatrix::from_column_slice(d, d, &g)
            })
            .collect();
        Ok(DampingBasis {
            tau,
            eigenvalues: (0..n).map(|k| diag[(k, k)]).collect(),
            right_ops,
            left_ops,
            groups,
        })
    }
}

fn columns(ops: &[CMatrix]) -> CMatrix {
    let n = ops.len();
    let mut m = CMatrix::zeros(ops.first().map_or(0, |f| f.len()), n);
    for (k, op) in ops.iter().enumerate() {
        m.set_column(k, &DVector::from_column_slice(op.as_slice()));
    }
    m
}

fn cluster(values: &[Complex64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let close = |j: &usize| (values[*j] - v).norm() <= CLUSTER_TOL * v.norm().max(1.0);
        match groups.iter_mut().find(|g| g.iter().any(close)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Damping basis of `s` at time `tau = 0`; see [`damping_basis_at`].
pub fn damping_basis(s: &Superoperator) -> Result<DampingBasis> {
    damping_basis_at(s, 0.0)
}

/// Eigen-decomposition of the `d^2 x d^2` matrix. Each cluster of (nearly)
/// equal eigenvalues gets an orthonormal basis of its eigenspace; the left
/// operators come from the inverse of the eigenvector matrix, which makes the
/// pair biorthonormal by construction.
pub fn damping_basis_at(s: &Superoperator, tau: f64) -> Result<DampingBasis> {
    let a = s.matrix();
    let n = a.nrows();
    let eig = linalg::eigenvalues(a);
    if eig.len() != n {
        return Err(Error::DefectiveMap("Schur iteration did not converge".into()));
    }
    let scale = linalg::frobenius(a).max(1.0);
    let mut v = CMatrix::zeros(n, n);
    let mut groups = vec![0; n];
    let mut col = 0;
    for (g, members) in cluster(&eig).into_iter().enumerate() {
        let k = members.len();
        let mean: Complex64 = members.iter().map(|&i| eig[i]).sum::<Complex64>() / k as f64;
        let shifted = a - linalg::identity(n) * mean;
        let (basis, worst) = linalg::approximate_null_space(&shifted, k);
        if worst > NULL_SPACE_TOL * scale {
            return Err(Error::DefectiveMap(format!(
                "eigenvalue {mean} has algebraic multiplicity {k} but a smaller eigenspace (residual {worst:e})"
            )));
        }
        for j in 0..k {
            v.set_column(col, &basis.column(j));
            groups[col] = g;
            col += 1;
        }
    }
    DampingBasis::from_vectors(tau, a, v, groups)
}

pub fn formal_inverse(s: &Superoperator, tol: f64) -> Result<Superoperator> {
    damping_basis(s)?.inverse(tol)
}

/// Re-expresses `current` in the basis that continues `reference`: every
/// reference eigenvector is projected onto the eigenspace of `current` it
/// overlaps most, keeping its label and phase. Degenerate eigenspaces thus
/// inherit a smooth basis from their neighbour.
fn align(current: &DampingBasis, reference: &DampingBasis, index: usize) -> Result<DampingBasis> {
    let n = current.len();
    let v_cur = current.right_matrix();
    let w_cur = current.left_matrix();
    let v_ref = reference.right_matrix();

    let mut labels: Vec<usize> = current.groups.clone();
    labels.sort_unstable();
    labels.dedup();

    let projections: Vec<CMatrix> = labels
        .iter()
        .map(|&g| {
            let members: Vec<usize> = (0..n).filter(|&k| current.groups[k] == g).collect();
            let mut p = CMatrix::zeros(n, n);
            for &k in &members {
                p += v_cur.column(k) * w_cur.row(k);
            }
            p * &v_ref
        })
        .collect();

    let mut candidates = Vec::with_capacity(labels.len() * n);
    for (gi, proj) in projections.iter().enumerate() {
        for r in 0..n {
            let overlap = proj.column(r).norm() / v_ref.column(r).norm();
            candidates.push((overlap, gi, r));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut capacity: Vec<usize> = labels
        .iter()
        .map(|&g| current.groups.iter().filter(|&&x| x == g).count())
        .collect();
    let mut assigned: Vec<Option<(usize, f64)>> = vec![None; n];
    for (overlap, gi, r) in candidates {
        if assigned[r].is_none() && capacity[gi] > 0 {
            assigned[r] = Some((gi, overlap));
            capacity[gi] -= 1;
        }
    }

    let mut v = CMatrix::zeros(n, n);
    let mut groups = vec![0; n];
    for r in 0..n {
        let (gi, overlap) = assigned[r].expect("capacities sum to the basis size");
        if overlap < MIN_TRACKING_OVERLAP {
            return Err(Error::BasisTrackingLost { index, overlap });
        }
        let col = projections[gi].column(r).into_owned();
        let norm = col.norm();
        v.set_column(r, &(col / c64(norm, 0.)));
        groups[r] = labels[gi];
    }
    if linalg::condition_number(&v) > MAX_CONDITION {
        return Err(Error::BasisTrackingLost { index, overlap: 0.0 });
    }
    let source = current.reconstruct().into_matrix();
    DampingBasis::from_vectors(current.tau, &source, v, groups)
}

/// Makes labels and eigenvector phases consistent along a sequence of bases.
/// Tracking starts from the sample with the most distinct eigenspaces and
/// proceeds outward in both directions.
pub fn track_bases(bases: &[DampingBasis]) -> Result<Vec<DampingBasis>> {
    let mut out = bases.to_vec();
    if out.is_empty() {
        return Ok(out);
    }
    let anchor = (0..out.len())
        .max_by_key(|&i| (out[i].group_count(), std::cmp::Reverse(i)))
        .expect("non-empty");
    for i in anchor + 1..out.len() {
        out[i] = align(&out[i], &out[i - 1], i)?;
    }
    for i in (0..anchor).rev() {
        out[i] = align(&out[i], &out[i + 1], i)?;
    }
    Ok(out)
}

/// Direct route: `L = dLambda/dtau * Lambda^{-1}` with second-order finite
/// differences. Points where some `|lambda_mu| <= tol` (or the LU inverse
/// fails) are flagged singular.
pub fn tcl_generator_from_map(traj: &MapTrajectory, tol: f64) -> Result<GeneratorTrajectory> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::GridTooCoarse { points: n });
    }
    let grid = traj.grid();
    let maps: Vec<CMatrix> = traj.maps().iter().map(|m| m.matrix().clone()).collect();
    let dim = traj.dim();
    let generators = (0..n)
        .into_par_iter()
        .map(|k| {
            if linalg::min_abs_eigenvalue(&maps[k]) <= tol {
                return None;
            }
            let inv = maps[k].clone().try_inverse()?;
            let deriv = linalg::finite_difference(grid, &maps, k);
            let g = Superoperator::from_matrix(dim, deriv * inv).ok()?;
            g.is_finite().then_some(g)
        })
        .collect();
    GeneratorTrajectory::new(grid.to_vec(), generators)
}

/// Spectral route: assembles
/// `L rho = sum_{mu,nu} L_{mu nu} Tr(G_nu^† rho)` with
/// `L_{mu nu} = (lambda'_mu/lambda_nu F_mu + lambda_mu/lambda_nu F'_mu) delta_{mu nu}
///            + lambda_mu/lambda_nu F_mu Tr(G'_mu^† F_nu)`
/// from a tracked sequence of damping bases, derivatives by finite differences.
pub fn generator_from_damping_basis(bases: &[DampingBasis], tol: f64) -> Result<GeneratorTrajectory> {
    let n = bases.len();
    if n < 3 {
        return Err(Error::GridTooCoarse { points: n });
    }
    let grid: Vec<f64> = bases.iter().map(|b| b.tau).collect();
    crate::trajectory::check_grid(&grid)?;
    let size = bases[0].len();
    if bases.iter().any(|b| b.len() != size) {
        return Err(Error::DimensionMismatch("damping bases of different sizes".into()));
    }
    let tracked = track_bases(bases)?;
    let dim = tracked[0].dim();

    let lambda_series: Vec<Vec<Complex64>> = (0..size)
        .map(|mu| tracked.iter().map(|b| b.eigenvalues[mu]).collect())
        .collect();
    let f_series: Vec<Vec<CMatrix>> = (0..size)
        .map(|mu| tracked.iter().map(|b| b.right_ops[mu].clone()).collect())
        .collect();
    let g_series: Vec<Vec<CMatrix>> = (0..size)
        .map(|mu| tracked.iter().map(|b| b.left_ops[mu].clone()).collect())
        .collect();

    let generators = (0..n)
        .into_par_iter()
        .map(|k| {
            let b = &tracked[k];
            if b.eigenvalues.iter().any(|l| l.norm() <= tol) {
                return None;
            }
            let lam = &b.eigenvalues;
            let dlam: Vec<Complex64> = (0..size)
                .map(|mu| linalg::finite_difference_scalar(&grid, &lambda_series[mu], k))
                .collect();
            let df: Vec<CMatrix> = (0..size).map(|mu| linalg::finite_difference(&grid, &f_series[mu], k)).collect();
            let dg: Vec<CMatrix> = (0..size).map(|mu| linalg::finite_difference(&grid, &g_series[mu], k)).collect();

            let mut m = CMatrix::zeros(size, size);
            for nu in 0..size {
                // Column operator sum_mu L_{mu nu}.
                let mut col = &b.right_ops[nu] * (dlam[nu] / lam[nu]) + &df[nu];
                for mu in 0..size {
                    let overlap = (dg[mu].adjoint() * &b.right_ops[nu]).trace();
                    col += &b.right_ops[mu] * (lam[mu] / lam[nu] * overlap);
                }
                let g_vec = DVector::from_column_slice(b.left_ops[nu].as_slice());
                m += DVector::from_column_slice(col.as_slice()) * g_vec.adjoint();
            }
            let g = Superoperator::from_matrix(dim, m).ok()?;
            g.is_finite().then_some(g)
        })
        .collect();
    GeneratorTrajectory::new(grid, generators)
}

/// Damping bases of every map of a trajectory, stamped with elapsed time.
pub fn damping_bases_of(traj: &MapTrajectory) -> Result<Vec<DampingBasis>> {
    traj.maps()
        .par_iter()
        .zip(traj.elapsed())
        .map(|(m, tau)| damping_basis_at(m, tau))
        .collect()
}

/// Checks `Lambda Lambda^{-1} = Lambda^{-1} Lambda = identity` and returns the
/// larger max-entry defect.
pub fn inverse_defect(s: &Superoperator, inv: &Superoperator) -> Result<f64> {
    let id = Superoperator::identity(s.dim());
    let a = superop::compose(s, inv)?.max_entry_distance(&id);
    let b = superop::compose(inv, s)?.max_entry_distance(&id);
    Ok(a.max(b))
}
