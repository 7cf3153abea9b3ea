//! Operator and superoperator algebra.
//!
//! Operators are vectorized by **column stacking**: for a `d x d` matrix `A`,
//! `vec(A)[i + j*d] = A[(i, j)]`. Under this convention
//! `vec(A X B) = (B^T (x) A) vec(X)`, so composition of maps is the plain
//! matrix product of their `d^2 x d^2` representations. Every module uses
//! this convention.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
/// Default lower bound on the minimum Choi eigenvalue for complete positivity.
pub const CP_TOL: f64 = 1e-9;
pub const TP_TOL: f64 = 1e-10;

pub fn vectorize(a: &CMatrix) -> Result<CVector> {
    linalg::require_square(a, "operator")?;
    // nalgebra storage is column-major, which is exactly column stacking.
    Ok(CVector::from_column_slice(a.as_slice()))
}

pub fn devectorize(v: &CVector) -> Result<CMatrix> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {n} is not a vectorized square matrix"
        )));
    }
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Position of the matrix element `(i, j)` inside `vec(A)`.
#[inline]
pub fn vec_index(d: usize, i: usize, j: usize) -> usize {
    i + j * d
}

/// A `d x d` Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixRepr", into = "DensityMatrixRepr")]
pub struct DensityMatrix {
    matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRepr {
    #[serde(with = "crate::matrix_json")]
    matrix: CMatrix,
}

impl TryFrom<DensityMatrixRepr> for DensityMatrix {
    type Error = Error;
    fn try_from(r: DensityMatrixRepr) -> Result<Self> {
        DensityMatrix::new(r.matrix)
    }
}

impl From<DensityMatrix> for DensityMatrixRepr {
    fn from(d: DensityMatrix) -> Self {
        DensityMatrixRepr { matrix: d.matrix }
    }
}

/// Violations of the density-matrix invariants; all zero for a valid state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDefects {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl StateDefects {
    pub fn of(m: &CMatrix) -> Self {
        StateDefects {
            hermiticity: linalg::hermiticity_defect(m),
            trace: (m.trace() - c64(1., 0.)).norm(),
            min_eigenvalue: linalg::min_hermitian_eigenvalue(m),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.hermiticity <= HERMITIAN_TOL && self.trace <= TRACE_TOL && self.min_eigenvalue >= -PSD_TOL
    }
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let d = linalg::require_square(&matrix, "density matrix")?;
        if d == 0 {
            return Err(Error::InvalidState("empty matrix".into()));
        }
        let defects = StateDefects::of(&matrix);
        if defects.hermiticity > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {:e})",
                defects.hermiticity
            )));
        }
        if defects.trace > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace differs from 1 by {:e}",
                defects.trace
            )));
        }
        if defects.min_eigenvalue < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                defects.min_eigenvalue
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            matrix: linalg::identity(d) * c64(1.0 / d as f64, 0.),
        }
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / c64(norm, 0.);
        Self::new(&psi * psi.adjoint())
    }

    /// The two-qubit Bell state `(|00> + |11>)/sqrt(2)` as a density matrix.
    pub fn phi_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVector::from_vec(vec![c64(s, 0.), c64(0., 0.), c64(0., 0.), c64(s, 0.)]);
        Self::pure(&psi).expect("Bell state is valid")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

/// A linear map on `d x d` operators stored as its `d^2 x d^2` matrix
/// acting on column-stacked vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superoperator {
    dim: usize,
    #[serde(with = "crate::matrix_json")]
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "superoperator on dimension {dim} needs a {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Superoperator { dim, matrix })
    }

    /// Reconstructs the system dimension from a `d^2 x d^2` matrix.
    pub fn from_square_matrix(matrix: CMatrix) -> Result<Self> {
        let n = linalg::require_square(&matrix, "superoperator")?;
        let d = (n as f64).sqrt().round() as usize;
        Self::from_matrix(d, matrix)
    }

    /// Builds the matrix of `f` column by column from its action on the
    /// matrix units `E_ij`.
    pub fn from_fn(dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let n = dim * dim;
        let mut matrix = CMatrix::zeros(n, n);
        for j in 0..dim {
            for i in 0..dim {
                let out = f(&linalg::matrix_unit(dim, i, j));
                if out.nrows() != dim || out.ncols() != dim {
                    return Err(Error::DimensionMismatch("map changes the operator dimension".into()));
                }
                matrix.set_column(vec_index(dim, i, j), &DVector::from_column_slice(out.as_slice()));
            }
        }
        Ok(Superoperator { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: linalg::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// `rho -> U rho U^†`.
    pub fn conjugation(u: &CMatrix) -> Result<Self> {
        let d = linalg::require_square(u, "conjugating operator")?;
        Self::from_matrix(d, linalg::kron(&u.conjugate(), u))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix * s,
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c64(s, 0.))
    }

    pub fn add(&self, other: &Superoperator) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Superoperator) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: &self.matrix - &other.matrix,
        })
    }

    /// `exp(t S)` by scaling and squaring.
    pub fn exp_scaled(&self, t: f64) -> Self {
        Superoperator {
            dim: self.dim,
            matrix: linalg::expm(&(&self.matrix * c64(t, 0.))),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    /// Frobenius distance between the two matrix representations.
    pub fn distance(&self, other: &Superoperator) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        linalg::frobenius(&(&self.matrix - &other.matrix))
    }

    pub fn max_entry_distance(&self, other: &Superoperator) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn same_dim(&self, other: &Superoperator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "superoperators on dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// Map composition `first` then `second`, i.e. `second ∘ first`.
pub fn compose(second: &Superoperator, first: &Superoperator) -> Result<Superoperator> {
    second.same_dim(first)?;
    Ok(Superoperator {
        dim: first.dim,
        matrix: &second.matrix * &first.matrix,
    })
}

pub fn apply(s: &Superoperator, a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != s.dim || a.ncols() != s.dim {
        return Err(Error::DimensionMismatch(format!(
            "cannot apply a map on dimension {} to a {}x{} operator",
            s.dim,
            a.nrows(),
            a.ncols()
        )));
    }
    devectorize(&(&s.matrix * vectorize(a)?))
}

/// Hamiltonian and jump operators of a Lindblad generator (hbar = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladSpec {
    #[serde(with = "crate::matrix_json")]
    h: CMatrix,
    #[serde(with = "crate::matrix_json::vec")]
    lindblad_ops: Vec<CMatrix>,
}

impl LindbladSpec {
    pub fn new(h: CMatrix, lindblad_ops: Vec<CMatrix>) -> Result<Self> {
        let d = linalg::require_square(&h, "Hamiltonian")?;
        let defect = linalg::hermiticity_defect(&h);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!("Hamiltonian is not Hermitian (defect {defect:e})")));
        }
        for (k, v) in lindblad_ops.iter().enumerate() {
            if v.nrows() != d || v.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "Lindblad operator {k} is {}x{}, Hamiltonian is {d}x{d}",
                    v.nrows(),
                    v.ncols()
                )));
            }
        }
        Ok(LindbladSpec { h, lindblad_ops })
    }

    /// Pure dissipation with no Hamiltonian part.
    pub fn dissipative(d: usize, lindblad_ops: Vec<CMatrix>) -> Result<Self> {
        Self::new(CMatrix::zeros(d, d), lindblad_ops)
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn lindblad_ops(&self) -> &[CMatrix] {
        &self.lindblad_ops
    }
}

/// Matrix of `rho -> -i[H, rho] + sum_a (V_a rho V_a^† - 1/2 {V_a^† V_a, rho})`.
pub fn lindblad_superop(spec: &LindbladSpec) -> Superoperator {
    let d = spec.dim();
    let id = linalg::identity(d);
    let minus_i = c64(0., -1.);
    // vec(H rho) = (I (x) H) vec(rho); vec(rho H) = (H^T (x) I) vec(rho)
    let mut m = (linalg::kron(&id, &spec.h) - linalg::kron(&spec.h.transpose(), &id)) * minus_i;
    for v in &spec.lindblad_ops {
        let vdv = v.adjoint() * v;
        m += linalg::kron(&v.conjugate(), v);
        m -= (linalg::kron(&id, &vdv) + linalg::kron(&vdv.transpose(), &id)) * c64(0.5, 0.);
    }
    Superoperator { dim: d, matrix: m }
}

/// Choi matrix `C = sum_ij |i><j| (x) S(|i><j|)`, indexed `C[(i*d + a), (j*d + b)]`.
pub fn choi_of(s: &Superoperator) -> CMatrix {
    let d = s.dim;
    let mut c = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let col = vec_index(d, i, j);
            for b in 0..d {
                for a in 0..d {
                    c[(i * d + a, j * d + b)] = s.matrix[(vec_index(d, a, b), col)];
                }
            }
        }
    }
    c
}

/// Inverse of [`choi_of`].
pub fn superop_from_choi(choi: &CMatrix) -> Result<Superoperator> {
    let s = Superoperator::from_square_matrix(choi.clone())?;
    let d = s.dim;
    let mut m = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            for b in 0..d {
                for a in 0..d {
                    m[(vec_index(d, a, b), vec_index(d, i, j))] = choi[(i * d + a, j * d + b)];
                }
            }
        }
    }
    Superoperator::from_matrix(d, m)
}

/// `rho -> sum_k K_k rho K_k^†`.
pub fn kraus_to_superop(ops: &[CMatrix]) -> Result<Superoperator> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidOperator("empty Kraus list".into()))?;
    let d = linalg::require_square(first, "Kraus operator")?;
    let mut m = CMatrix::zeros(d * d, d * d);
    for (k, op) in ops.iter().enumerate() {
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch(format!("Kraus operator {k} has the wrong shape")));
        }
        m += linalg::kron(&op.conjugate(), op);
    }
    Superoperator::from_matrix(d, m)
}

/// Kraus operators from the eigen-decomposition of the Choi matrix.
pub fn superop_to_kraus(s: &Superoperator, tol: f64) -> Result<Vec<CMatrix>> {
    let d = s.dim;
    let (ev, vecs) = linalg::hermitian_eigen(&choi_of(s));
    let min = ev.first().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
    }
    let scale = ev.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = scale * 1e-15;
    let mut out = Vec::new();
    for (k, &mu) in ev.iter().enumerate() {
        if mu <= cutoff {
            continue;
        }
        let root = mu.sqrt();
        let mut op = CMatrix::zeros(d, d);
        for i in 0..d {
            for a in 0..d {
                op[(a, i)] = vecs[(i * d + a, k)] * root;
            }
        }
        out.push(op);
    }
    Ok(out)
}

/// Outcome of a numerical diagnostic: the verdict and the number it rests on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub holds: bool,
    pub value: f64,
}

/// CP iff the minimum eigenvalue of the Hermitian part of the Choi matrix is
/// at least `-tol`. The witness value is that minimum eigenvalue.
pub fn is_completely_positive(s: &Superoperator, tol: f64) -> Witness {
    let value = linalg::min_hermitian_eigenvalue(&choi_of(s));
    Witness {
        holds: value >= -tol,
        value,
    }
}

/// TP iff the dual map fixes the identity; the witness is the largest
/// deviation `|(S^†(I) - I)_k|`.
pub fn is_trace_preserving(s: &Superoperator, tol: f64) -> Witness {
    let value = trace_defect(s, 1.0);
    Witness {
        holds: value <= tol,
        value,
    }
}

/// Largest `|Tr S(E_ij) - target * delta_ij|` over matrix units. `target = 1`
/// measures trace preservation, `target = 0` trace annihilation.
pub fn trace_defect(s: &Superoperator, target: f64) -> f64 {
    let d = s.dim;
    let mut worst: f64 = 0.0;
    for j in 0..d {
        for i in 0..d {
            let col = vec_index(d, i, j);
            let tr: Complex64 = (0..d).map(|k| s.matrix[(vec_index(d, k, k), col)]).sum();
            let expected = if i == j { target } else { 0.0 };
            worst = worst.max((tr - expected).norm());
        }
    }
    worst
}

/// Diagnostics deciding whether a superoperator generates a CPTP semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladFormReport {
    pub trace_annihilation: f64,
    pub hermiticity_preservation: f64,
    /// Minimum eigenvalue of the Choi matrix compressed to the orthogonal
    /// complement of the maximally entangled vector (the GKS matrix).
    pub min_gks_eigenvalue: f64,
}

impl LindbladFormReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.trace_annihilation <= tol && self.hermiticity_preservation <= tol && self.min_gks_eigenvalue >= -tol
    }
}

/// A generator has Lindblad form iff it is Hermiticity preserving, trace
/// annihilating and conditionally completely positive.
pub fn lindblad_form_report(l: &Superoperator) -> LindbladFormReport {
    let d = l.dim;
    let n = d * d;
    let choi = choi_of(l);
    let mut omega = CMatrix::zeros(1, n);
    for i in 0..d {
        omega[(0, i * d + i)] = c64(1., 0.);
    }
    let (complement, _) = linalg::approximate_null_space(&omega, n - 1);
    let gks = complement.adjoint() * &choi * &complement;
    LindbladFormReport {
        trace_annihilation: trace_defect(l, 0.0),
        hermiticity_preservation: linalg::hermiticity_defect(&choi),
        min_gks_eigenvalue: if n > 1 { linalg::min_hermitian_eigenvalue(&gks) } else { 0.0 },
    }
}

/// Which tensor factor a channel or partial trace refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    First,
    Second,
}

/// Extends `s` by the identity channel on an equally sized partner system;
/// `Factor::Second` gives `I (x) S`, `Factor::First` gives `S (x) I`.
pub fn extend_channel(s: &Superoperator, acts_on: Factor) -> Result<Superoperator> {
    extend_channel_with(s, s.dim, acts_on)
}

pub fn extend_channel_with(s: &Superoperator, partner_dim: usize, acts_on: Factor) -> Result<Superoperator> {
    let d = s.dim;
    let total = d * partner_dim;
    linalg::check_dim_budget(total)?;
    let unit_image = |a: usize, b: usize| devectorize(&s.matrix.column(vec_index(d, a, b)).into_owned());
    let n = total * total;
    let mut m = CMatrix::zeros(n, n);
    for q in 0..total {
        for p in 0..total {
            let out = match acts_on {
                Factor::Second => {
                    let (i, a) = (p / d, p % d);
                    let (j, b) = (q / d, q % d);
                    linalg::kron(&linalg::matrix_unit(partner_dim, i, j), &unit_image(a, b)?)
                }
                Factor::First => {
                    let (a, i) = (p / partner_dim, p % partner_dim);
                    let (b, j) = (q / partner_dim, q % partner_dim);
                    linalg::kron(&unit_image(a, b)?, &linalg::matrix_unit(partner_dim, i, j))
                }
            };
            m.set_column(vec_index(total, p, q), &DVector::from_column_slice(out.as_slice()));
        }
    }
    Superoperator::from_matrix(total, m)
}

/// Traces out one factor of an operator on `C^{dims.0} (x) C^{dims.1}`.
pub fn partial_trace(a: &CMatrix, dims: (usize, usize), traced: Factor) -> Result<CMatrix> {
    let (d1, d2) = dims;
    if a.nrows() != d1 * d2 || a.ncols() != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, expected {} for factors {d1}x{d2}",
            a.nrows(),
            a.ncols(),
            d1 * d2
        )));
    }
    Ok(match traced {
        Factor::Second => CMatrix::from_fn(d1, d1, |i, j| (0..d2).map(|k| a[(i * d2 + k, j * d2 + k)]).sum()),
        Factor::First => CMatrix::from_fn(d2, d2, |i, j| (0..d1).map(|k| a[(k * d2 + i, k * d2 + j)]).sum()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_minus, sigma_plus, sigma_x, sigma_z};

    #[test]
    fn vectorize_identity_is_column_stacked() {
        let v = vectorize(&linalg::identity(2)).unwrap();
        let expected = [1.0, 0.0, 0.0, 1.0];
        for (z, e) in v.iter().zip(expected) {
            assert_eq!(*z, c64(e, 0.));
        }
    }

    #[test]
    fn vectorize_matrix_unit_by_enumeration() {
        // |0><1| sits in column 1, row 0: index 0 + 1*2 = 2.
        for d in 1..5 {
            for i in 0..d {
                for j in 0..d {
                    let v = vectorize(&linalg::matrix_unit(d, i, j)).unwrap();
                    let ones: Vec<usize> = v.iter().enumerate().filter(|(_, z)| z.re == 1.0).map(|(k, _)| k).collect();
                    assert_eq!(ones, vec![i + j * d]);
                }
            }
        }
        let v = vectorize(&sigma_plus()).unwrap();
        assert_eq!(v[2], c64(1., 0.));
    }

    #[test]
    fn devectorize_rejects_non_square_length() {
        assert!(matches!(devectorize(&CVector::zeros(3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn empty_lindblad_is_zero() {
        let l = lindblad_superop(&LindbladSpec::new(CMatrix::zeros(3, 3), vec![]).unwrap());
        assert_eq!(linalg::max_abs(l.matrix()), 0.0);
    }

    #[test]
    fn dephasing_lindblad_action() {
        let l = lindblad_superop(&LindbladSpec::dissipative(2, vec![sigma_z()]).unwrap());
        for op in [sigma_plus(), sigma_minus()] {
            let out = apply(&l, &op).unwrap();
            assert!(linalg::max_abs_diff(&out, &(&op * c64(-2., 0.))) < 1e-14);
        }
        for op in [linalg::identity(2), sigma_z()] {
            assert!(linalg::max_abs(&apply(&l, &op).unwrap()) < 1e-14);
        }
        // Same as rho -> sigma_z rho sigma_z - rho.
        let direct = Superoperator::conjugation(&sigma_z()).unwrap().sub(&Superoperator::identity(2)).unwrap();
        assert!(l.max_entry_distance(&direct) < 1e-14);
    }

    #[test]
    fn hamiltonian_commutator_action() {
        let l = lindblad_superop(&LindbladSpec::new(sigma_z(), vec![]).unwrap());
        let out = apply(&l, &sigma_plus()).unwrap();
        assert!(linalg::max_abs_diff(&out, &(sigma_plus() * c64(0., -2.))) < 1e-14);
    }

    #[test]
    fn lindblad_spec_rejects_bad_input() {
        let h = CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(0., 0.), c64(0., 0.)]);
        assert!(matches!(LindbladSpec::new(h, vec![]), Err(Error::InvalidOperator(_))));
        assert!(matches!(
            LindbladSpec::new(sigma_z(), vec![linalg::identity(3)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn identity_choi_is_maximally_entangled_projector() {
        let d = 3;
        let ev = linalg::hermitian_eigenvalues(&choi_of(&Superoperator::identity(d)));
        assert!((ev[ev.len() - 1] - d as f64).abs() < 1e-12);
        assert!(ev[..ev.len() - 1].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let t = Superoperator::from_fn(2, |a| a.transpose()).unwrap();
        let choi = choi_of(&t);
        // The Choi matrix of the transpose is SWAP.
        let mut swap = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                swap[(i * 2 + j, j * 2 + i)] = c64(1., 0.);
            }
        }
        assert!(linalg::max_abs_diff(&choi, &swap) < 1e-15);
        let ev = linalg::hermitian_eigenvalues(&choi);
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!(ev[1..].iter().all(|x| (x - 1.0).abs() < 1e-12));
        let w = is_completely_positive(&t, CP_TOL);
        assert!(!w.holds);
        assert!(matches!(superop_to_kraus(&t, CP_TOL), Err(Error::NotCompletelyPositive { .. })));
    }

    #[test]
    fn unitary_conjugation_is_cptp() {
        let u = linalg::unitary_evolution(&(sigma_x() + sigma_z() * c64(0.4, 0.)), 0.9);
        let s = Superoperator::conjugation(&u).unwrap();
        assert!(is_completely_positive(&s, CP_TOL).holds);
        assert!(is_trace_preserving(&s, TP_TOL).holds);
    }

    #[test]
    fn choi_inverse_round_trip() {
        let s = lindblad_superop(&LindbladSpec::new(sigma_x(), vec![sigma_minus()]).unwrap()).exp_scaled(0.3);
        let back = superop_from_choi(&choi_of(&s)).unwrap();
        assert!(s.max_entry_distance(&back) < 1e-15);
    }

    #[test]
    fn compose_with_identity() {
        let s = lindblad_superop(&LindbladSpec::new(sigma_x(), vec![sigma_minus()]).unwrap());
        let c = compose(&s, &Superoperator::identity(2)).unwrap();
        assert_eq!(c, s);
        assert!(compose(&s, &Superoperator::identity(3)).is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let rho = DensityMatrix::pure(&CVector::from_vec(vec![c64(0.6, 0.), c64(0., 0.8)])).unwrap();
        let omega = linalg::identity(3) * c64(2.0, 0.);
        let prod = linalg::kron(rho.matrix(), &omega);
        let reduced = partial_trace(&prod, (2, 3), Factor::Second).unwrap();
        assert!(linalg::max_abs_diff(&reduced, &(rho.matrix() * c64(6.0, 0.))) < 1e-14);
        let other = partial_trace(&prod, (2, 3), Factor::First).unwrap();
        assert!(linalg::max_abs_diff(&other, &omega) < 1e-14);
    }

    #[test]
    fn extend_identity_is_identity() {
        for side in [Factor::First, Factor::Second] {
            let e = extend_channel(&Superoperator::identity(2), side).unwrap();
            assert_eq!(e.dim(), 4);
            assert!(e.max_entry_distance(&Superoperator::identity(4)) < 1e-15);
        }
    }

    #[test]
    fn extended_dephasing_on_bell_state() {
        // Coherence factor c on the second qubit.
        let c = 0.37;
        let p = 0.5 * (1.0 - c);
        let deph = Superoperator::identity(2)
            .scale_re(1.0 - p)
            .add(&Superoperator::conjugation(&sigma_z()).unwrap().scale_re(p))
            .unwrap();
        let ext = extend_channel(&deph, Factor::Second).unwrap();
        let out = apply(&ext, DensityMatrix::phi_plus().matrix()).unwrap();
        assert!((out[(0, 3)] - c64(c / 2.0, 0.)).norm() < 1e-15);
        assert!((out[(0, 0)] - c64(0.5, 0.)).norm() < 1e-15);
        assert!(out[(1, 1)].norm() < 1e-15 && out[(1, 2)].norm() < 1e-15);
    }

    #[test]
    fn extension_respects_dimension_budget() {
        let big = Superoperator::identity(5);
        assert!(matches!(extend_channel(&big, Factor::First), Err(Error::DimensionBudget { .. })));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(linalg::identity(2)).is_err());
        let not_psd = CMatrix::from_row_slice(2, 2, &[c64(1.5, 0.), c64(0., 0.), c64(0., 0.), c64(-0.5, 0.)]);
        assert!(DensityMatrix::new(not_psd).is_err());
        assert!(DensityMatrix::new(DensityMatrix::maximally_mixed(3).into_matrix()).is_ok());
    }

    #[test]
    fn lindblad_form_report_distinguishes_generators() {
        let l = lindblad_superop(&LindbladSpec::new(sigma_x(), vec![sigma_minus(), sigma_z()]).unwrap());
        assert!(lindblad_form_report(&l).holds(1e-10));
        // Negative dephasing rate is trace annihilating but not conditionally CP.
        let neg = l.scale_re(-1.0);
        let r = lindblad_form_report(&neg);
        assert!(r.trace_annihilation < 1e-12);
        assert!(r.min_gks_eigenvalue < -0.1);
    }
}
