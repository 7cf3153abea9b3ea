//! Concrete open-system models: projection channels, two-qubit X states and
//! their concurrence, pure decoherence with a finite reservoir, the singular
//! dephasing model with oscillating coherence, and reduced dynamics of a
//! Markovian dilation.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_scaled_generator, RateFunction};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::propagate::{MemoryKernel, TimeLocalGenerator};
use crate::superop::{self, vec_index, DensityMatrix, Factor, LindbladSpec, Superoperator};
use crate::trajectory::MapTrajectory;

/// Tolerance on entries outside the X pattern.
pub const X_PATTERN_TOL: f64 = 1e-12;
/// `|c_mn|` at or below this makes the pure-decoherence generator singular.
pub const COHERENCE_ZERO_TOL: f64 = 1e-10;

/// `rho -> omega Tr(rho)`.
pub fn projection_channel(omega: &DensityMatrix) -> Superoperator {
    let d = omega.dim();
    let target = superop::vectorize(omega.matrix()).expect("square");
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        m.set_column(vec_index(d, i, i), &target);
    }
    Superoperator::from_matrix(d, m).expect("consistent dimensions")
}

/// Removes every off-diagonal entry in the computational (product) basis.
pub fn diagonal_projection(d: usize) -> Superoperator {
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        let k = vec_index(d, i, i);
        m[(k, k)] = c64(1., 0.);
    }
    Superoperator::from_matrix(d, m).expect("consistent dimensions")
}

/// `rho -> sigma_z rho sigma_z - rho`.
pub fn sigma_z_dephasing() -> Superoperator {
    superop::lindblad_superop(&LindbladSpec::dissipative(2, vec![linalg::sigma_z()]).expect("valid"))
}

/// Two-qubit state supported on the diagonal and the anti-diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "XStateRepr", into = "XStateRepr")]
pub struct XState {
    populations: [f64; 4],
    rho14: Complex64,
    rho23: Complex64,
}

#[derive(Serialize, Deserialize)]
struct XStateRepr {
    rho11: f64,
    rho22: f64,
    rho33: f64,
    rho44: f64,
    rho14: [f64; 2],
    rho23: [f64; 2],
}

impl TryFrom<XStateRepr> for XState {
    type Error = Error;
    fn try_from(r: XStateRepr) -> Result<Self> {
        XState::new(
            [r.rho11, r.rho22, r.rho33, r.rho44],
            c64(r.rho14[0], r.rho14[1]),
            c64(r.rho23[0], r.rho23[1]),
        )
    }
}

impl From<XState> for XStateRepr {
    fn from(x: XState) -> Self {
        let [rho11, rho22, rho33, rho44] = x.populations;
        XStateRepr {
            rho11,
            rho22,
            rho33,
            rho44,
            rho14: [x.rho14.re, x.rho14.im],
            rho23: [x.rho23.re, x.rho23.im],
        }
    }
}

impl XState {
    pub fn new(populations: [f64; 4], rho14: Complex64, rho23: Complex64) -> Result<Self> {
        if populations.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidState(format!("negative population in {populations:?}")));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > superop::TRACE_TOL {
            return Err(Error::InvalidState(format!("populations sum to {total}")));
        }
        let [p1, p2, p3, p4] = populations;
        if rho14.norm_sqr() > p1 * p4 + 1e-12 {
            return Err(Error::InvalidState(format!("|rho14|^2 = {} exceeds rho11 rho44 = {}", rho14.norm_sqr(), p1 * p4)));
        }
        if rho23.norm_sqr() > p2 * p3 + 1e-12 {
            return Err(Error::InvalidState(format!("|rho23|^2 = {} exceeds rho22 rho33 = {}", rho23.norm_sqr(), p2 * p3)));
        }
        Ok(XState { populations, rho14, rho23 })
    }

    pub fn phi_plus() -> Self {
        XState::new([0.5, 0.0, 0.0, 0.5], c64(0.5, 0.), c64(0., 0.)).expect("valid")
    }

    pub fn maximally_mixed() -> Self {
        XState::new([0.25; 4], c64(0., 0.), c64(0., 0.)).expect("valid")
    }

    /// Reads an X state off a 4x4 matrix, rejecting entries outside the pattern.
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        if m.nrows() != 4 || m.ncols() != 4 {
            return Err(Error::DimensionMismatch(format!("X state needs a 4x4 matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        let defect = x_pattern_defect(m);
        if defect > X_PATTERN_TOL {
            return Err(Error::InvalidState(format!("entries outside the X pattern up to {defect:e}")));
        }
        DensityMatrix::new(m.clone())?;
        XState::new([m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re], m[(0, 3)], m[(1, 2)])
    }

    pub fn populations(&self) -> [f64; 4] {
        self.populations
    }

    pub fn rho14(&self) -> Complex64 {
        self.rho14
    }

    pub fn rho23(&self) -> Complex64 {
        self.rho23
    }

    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (i, p) in self.populations.iter().enumerate() {
            m[(i, i)] = c64(*p, 0.);
        }
        m[(0, 3)] = self.rho14;
        m[(3, 0)] = self.rho14.conj();
        m[(1, 2)] = self.rho23;
        m[(2, 1)] = self.rho23.conj();
        m
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        DensityMatrix::new(self.to_matrix()).expect("validated on construction")
    }

    /// The same populations with both coherences multiplied by `scale`.
    pub fn with_scaled_coherences(&self, scale: f64) -> Result<Self> {
        XState::new(self.populations, self.rho14 * scale, self.rho23 * scale)
    }
}

/// Largest modulus among entries outside the X pattern.
pub fn x_pattern_defect(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && i + j != 3 {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// `2 max{|rho23| - sqrt(rho11 rho44), |rho14| - sqrt(rho22 rho33), 0}`.
pub fn concurrence_x(x: &XState) -> f64 {
    let [p1, p2, p3, p4] = x.populations;
    let c1 = x.rho23.norm() - (p1 * p4).sqrt();
    let c2 = x.rho14.norm() - (p2 * p3).sqrt();
    2.0 * c1.max(c2).max(0.0)
}

/// Wootters concurrence of an arbitrary two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("concurrence needs a two-qubit state, got dimension {}", rho.dim())));
    }
    let yy = linalg::kron(&linalg::sigma_y(), &linalg::sigma_y());
    let m = rho.matrix();
    let flipped = &yy * m.conjugate() * &yy;
    let root = hermitian_sqrt(m);
    let mut lambdas: Vec<f64> = linalg::hermitian_eigenvalues(&(&root * flipped * &root))
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let (ev, u) = linalg::hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(ev.len(), ev.iter().map(|v| c64(v.max(0.0).sqrt(), 0.))));
    &u * diag * u.adjoint()
}

/// Concurrence of the long-time limit of the semi-Markov dephasing
/// `rho_kl -> (1 - F) rho_kl` when `F -> epsilon`.
pub fn asymptotic_concurrence(x0: &XState, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::ParameterDomain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let [p1, p2, p3, p4] = x0.populations;
    let c1 = (1.0 - epsilon) * x0.rho23.norm() - (p1 * p4).sqrt();
    let c2 = (1.0 - epsilon) * x0.rho14.norm() - (p2 * p3).sqrt();
    Ok(2.0 * c1.max(c2).max(0.0))
}

/// `rho -> sum_mn c_mn P_m rho P_n`: entry-wise multiplication by `c`.
pub fn pure_decoherence_map(c: &CMatrix) -> Result<Superoperator> {
    let d = linalg::require_square(c, "coherence matrix")?;
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let k = vec_index(d, i, j);
            m[(k, k)] = c[(i, j)];
        }
    }
    Superoperator::from_matrix(d, m)
}

/// System levels coupled to a finite reservoir through
/// `H = sum_n P_n (x) (e_n 1 + H_R + B_n)`; populations are conserved and
/// coherences pick up the factors `c_mn(t) = Tr(exp(-i Z_m t) w_R exp(i Z_n t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureDecoherenceModel {
    energies: Vec<f64>,
    #[serde(with = "crate::matrix_json")]
    reservoir_hamiltonian: CMatrix,
    #[serde(with = "crate::matrix_json::vec")]
    couplings: Vec<CMatrix>,
    reservoir_state: DensityMatrix,
}

struct Propagators {
    z: Vec<CMatrix>,
    eigen: Vec<(Vec<f64>, CMatrix)>,
}

impl PureDecoherenceModel {
    pub fn new(
        energies: Vec<f64>,
        reservoir_hamiltonian: CMatrix,
        couplings: Vec<CMatrix>,
        reservoir_state: DensityMatrix,
    ) -> Result<Self> {
        let r = linalg::require_square(&reservoir_hamiltonian, "reservoir Hamiltonian")?;
        linalg::check_dim_budget(r * energies.len().max(1))?;
        if energies.is_empty() || couplings.len() != energies.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} energies and {} couplings",
                energies.len(),
                couplings.len()
            )));
        }
        if reservoir_state.dim() != r {
            return Err(Error::DimensionMismatch(format!(
                "reservoir state of dimension {} for a reservoir of dimension {r}",
                reservoir_state.dim()
            )));
        }
        if linalg::hermiticity_defect(&reservoir_hamiltonian) > superop::HERMITIAN_TOL {
            return Err(Error::InvalidOperator("reservoir Hamiltonian is not Hermitian".into()));
        }
        for (n, b) in couplings.iter().enumerate() {
            if b.nrows() != r || b.ncols() != r {
                return Err(Error::DimensionMismatch(format!("coupling {n} is not {r}x{r}")));
            }
            if linalg::hermiticity_defect(b) > superop::HERMITIAN_TOL {
                return Err(Error::InvalidOperator(format!("coupling {n} is not Hermitian")));
            }
        }
        Ok(PureDecoherenceModel {
            energies,
            reservoir_hamiltonian,
            couplings,
            reservoir_state,
        })
    }

    /// Qubit on a single-qubit reservoir: `H_R = sigma_z`,
    /// `B_n = +-0.4 sigma_x`, `e_n = +-0.5`, `w_R = diag(0.7, 0.3)`.
    /// The decoherence factor is non-monotone but stays away from zero on `[0, 10]`.
    pub fn qubit_default() -> Self {
        let state = DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_vec(vec![c64(0.7, 0.), c64(0.3, 0.)])))
            .expect("valid");
        PureDecoherenceModel::new(
            vec![0.5, -0.5],
            linalg::sigma_z(),
            vec![linalg::sigma_x() * c64(0.4, 0.), linalg::sigma_x() * c64(-0.4, 0.)],
            state,
        )
        .expect("valid")
    }

    pub fn system_dim(&self) -> usize {
        self.energies.len()
    }

    pub fn reservoir_dim(&self) -> usize {
        self.reservoir_hamiltonian.nrows()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn reservoir_hamiltonian(&self) -> &CMatrix {
        &self.reservoir_hamiltonian
    }

    pub fn couplings(&self) -> &[CMatrix] {
        &self.couplings
    }

    pub fn reservoir_state(&self) -> &DensityMatrix {
        &self.reservoir_state
    }

    /// `Z_n = e_n 1 + H_R + B_n`.
    pub fn z(&self, n: usize) -> CMatrix {
        let r = self.reservoir_dim();
        linalg::identity(r) * c64(self.energies[n], 0.) + &self.reservoir_hamiltonian + &self.couplings[n]
    }

    fn propagators(&self) -> Propagators {
        let z: Vec<CMatrix> = (0..self.system_dim()).map(|n| self.z(n)).collect();
        let eigen = z.iter().map(linalg::hermitian_eigen).collect();
        Propagators { z, eigen }
    }

    fn evolutions(p: &Propagators, t: f64) -> Vec<CMatrix> {
        p.eigen
            .iter()
            .map(|(ev, u)| {
                let phases = CMatrix::from_diagonal(&CVector::from_iterator(
                    ev.len(),
                    ev.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
                ));
                u * phases * u.adjoint()
            })
            .collect()
    }

    /// The matrix of decoherence factors `c_mn(t)`.
    pub fn cmn(&self, t: f64) -> CMatrix {
        let p = self.propagators();
        let u = Self::evolutions(&p, t);
        let w = self.reservoir_state.matrix();
        let d = self.system_dim();
        CMatrix::from_fn(d, d, |m, n| (&u[m] * w * u[n].adjoint()).trace())
    }

    /// `c_mn(t)` and its exact time derivative.
    pub fn cmn_with_derivative(&self, t: f64) -> (CMatrix, CMatrix) {
        let p = self.propagators();
        let u = Self::evolutions(&p, t);
        let w = self.reservoir_state.matrix();
        let d = self.system_dim();
        let i = c64(0., 1.);
        let mut c = CMatrix::zeros(d, d);
        let mut dc = CMatrix::zeros(d, d);
        for m in 0..d {
            for n in 0..d {
                let core = &u[m] * w * u[n].adjoint();
                c[(m, n)] = core.trace();
                // d/dt exp(-i Z_m t) w exp(i Z_n t) = -i Z_m (...) + (...) i Z_n
                dc[(m, n)] = (&p.z[m] * &core * (-i) + &core * &p.z[n] * i).trace();
            }
        }
        (c, dc)
    }

    pub fn map(&self, t: f64) -> Superoperator {
        pure_decoherence_map(&self.cmn(t)).expect("square")
    }

    /// The time-local generator `rho_mn -> (dc_mn / c_mn) rho_mn`.
    pub fn generator(&self, t: f64) -> Result<Superoperator> {
        let (c, dc) = self.cmn_with_derivative(t);
        let d = self.system_dim();
        let mut alpha = CMatrix::zeros(d, d);
        for m in 0..d {
            for n in 0..d {
                let modulus = c[(m, n)].norm();
                if modulus <= COHERENCE_ZERO_TOL {
                    return Err(Error::CoherenceZeroCrossing { m, n, t, modulus });
                }
                alpha[(m, n)] = dc[(m, n)] / c[(m, n)];
            }
        }
        pure_decoherence_map(&alpha)
    }

    pub fn time_local_generator(&self) -> TimeLocalGenerator {
        let model = self.clone();
        TimeLocalGenerator::new(self.system_dim(), move |t| model.generator(t))
    }

    /// Smallest GKS eigenvalue of the generator over `times`, with its time.
    /// A negative value certifies that the generator is not of Lindblad form there.
    pub fn lindblad_witness(&self, times: &[f64]) -> Result<GksScan> {
        let mut scan = GksScan {
            min_gks_eigenvalue: f64::INFINITY,
            at: f64::NAN,
        };
        for &t in times {
            let v = superop::lindblad_form_report(&self.generator(t)?).min_gks_eigenvalue;
            if v < scan.min_gks_eigenvalue {
                scan = GksScan {
                    min_gks_eigenvalue: v,
                    at: t,
                };
            }
        }
        Ok(scan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GksScan {
    pub min_gks_eigenvalue: f64,
    pub at: f64,
}

/// Qubit dephasing whose coherence oscillates as `cos(tau)`: a time-local
/// generator with poles at `(n + 1/2) pi`, the corresponding constant memory
/// kernel, and the closed-form map.
#[derive(Debug, Clone)]
pub struct TanDephasingModel {
    pub generator: TimeLocalGenerator,
    pub kernel: MemoryKernel,
}

impl TanDephasingModel {
    /// `(1 + cos tau)/2 id + (1 - cos tau)/2 (sigma_z . sigma_z)`.
    pub fn analytic_map(&self, tau: f64) -> Superoperator {
        tan_dephasing_map(tau)
    }
}

pub fn tan_dephasing_map(tau: f64) -> Superoperator {
    let flip = Superoperator::conjugation(&linalg::sigma_z()).expect("square");
    Superoperator::identity(2)
        .scale_re(0.5 * (1.0 + tau.cos()))
        .add(&flip.scale_re(0.5 * (1.0 - tau.cos())))
        .expect("same dimension")
}

/// Generator `tan(tau) L0 / 2` (coherence eigenvalue `-tan tau`) with poles
/// up to `horizon`, and kernel `L0 / 2`, where `L0 rho = sigma_z rho sigma_z - rho`.
pub fn tan_dephasing_model(horizon: f64) -> Result<TanDephasingModel> {
    let half = sigma_z_dephasing().scale_re(0.5);
    Ok(TanDephasingModel {
        generator: build_scaled_generator(&RateFunction::tangent(horizon), &half, horizon)?,
        kernel: MemoryKernel::constant(half),
    })
}

/// A Lindblad generator on system (x) ancilla with the ancilla's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationModel {
    system_dim: usize,
    total_generator: Superoperator,
    ancilla_state: DensityMatrix,
}

impl DilationModel {
    pub fn new(system_dim: usize, total_generator: Superoperator, ancilla_state: DensityMatrix) -> Result<Self> {
        let da = ancilla_state.dim();
        if system_dim * da != total_generator.dim() {
            return Err(Error::DimensionMismatch(format!(
                "generator on dimension {} for system {system_dim} and ancilla {da}",
                total_generator.dim()
            )));
        }
        linalg::check_dim_budget(total_generator.dim())?;
        let report = superop::lindblad_form_report(&total_generator);
        if report.trace_annihilation > 1e-10 {
            return Err(Error::NotLindblad {
                index: 0,
                witness: report.trace_annihilation,
            });
        }
        if !report.holds(crate::kernels::LINDBLAD_TOL) {
            return Err(Error::NotLindblad {
                index: 0,
                witness: report.hermiticity_preservation.max(-report.min_gks_eigenvalue),
            });
        }
        Ok(DilationModel {
            system_dim,
            total_generator,
            ancilla_state,
        })
    }

    /// System qubit exchanging excitations (strength `g`) with an ancilla qubit
    /// that decays at rate `gamma` and starts in its ground state.
    pub fn coupled_qubits(g: f64, gamma: f64) -> Result<Self> {
        let sp = linalg::sigma_plus();
        let sm = linalg::sigma_minus();
        let id = linalg::identity(2);
        let h = (linalg::kron(&sp, &sm) + linalg::kron(&sm, &sp)) * c64(g, 0.);
        let decay = linalg::kron(&id, &sm) * c64(gamma.sqrt(), 0.);
        let l = superop::lindblad_superop(&LindbladSpec::new(h, vec![decay])?);
        // sigma_minus = |1><0| sends 0 to 1, so |1> is the ground state.
        let ground = DensityMatrix::pure(&CVector::from_vec(vec![c64(0., 0.), c64(1., 0.)]))?;
        DilationModel::new(2, l, ground)
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn total_generator(&self) -> &Superoperator {
        &self.total_generator
    }

    pub fn ancilla_state(&self) -> &DensityMatrix {
        &self.ancilla_state
    }

    /// `rho -> Tr_a[exp((t - t0) L)(rho (x) w)]`.
    pub fn reduce(&self, t: f64, t0: f64) -> Result<Superoperator> {
        dilation_reduce(self, t, t0)
    }

    /// Reduced maps on `t0 + taus`.
    pub fn trajectory(&self, t0: f64, taus: &[f64]) -> Result<MapTrajectory> {
        MapTrajectory::from_fn(t0, taus, |tau| self.reduce(t0 + tau, t0))
    }
}

pub fn dilation_reduce(m: &DilationModel, t: f64, t0: f64) -> Result<Superoperator> {
    if !(t >= t0) {
        return Err(Error::InvalidInterval { t0, t1: t });
    }
    let ds = m.system_dim;
    let da = m.ancilla_state.dim();
    let total = m.total_generator.exp_scaled(t - t0);
    let omega = m.ancilla_state.matrix();
    let reduced = Superoperator::from_fn(ds, |rho| {
        let joint = superop::apply(&total, &linalg::kron(rho, omega)).expect("dimensions checked");
        superop::partial_trace(&joint, (ds, da), Factor::Second).expect("dimensions checked")
    })?;
    let cp = superop::is_completely_positive(&reduced, superop::CP_TOL);
    if !cp.holds {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: cp.value });
    }
    Ok(reduced)
}

/// Bell state `(|00> + |11>)/sqrt 2`.
pub fn bell_vector() -> CVector {
    CVector::from_vec(vec![c64(FRAC_1_SQRT_2, 0.), c64(0., 0.), c64(0., 0.), c64(FRAC_1_SQRT_2, 0.)])
}

/// `rho -> (1 - F) rho + F P rho` on two qubits with `P` the diagonal projection,
/// i.e. coherences scaled by `1 - F`.
pub fn xstate_dephasing_map(big_f: f64) -> Superoperator {
    let p = diagonal_projection(4);
    Superoperator::identity(4)
        .scale_re(1.0 - big_f)
        .add(&p.scale_re(big_f))
        .expect("same dimension")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_channel_is_cptp_idempotent() {
        let omega = DensityMatrix::new(CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64(0.8, 0.),
            (1, 1) => c64(0.2, 0.),
            (0, 1) => c64(0.1, 0.2),
            _ => c64(0.1, -0.2),
        }))
        .unwrap();
        let p = projection_channel(&omega);
        crate::kernels::check_projection(&p).unwrap();
        let out = superop::apply(&p, &linalg::sigma_x()).unwrap();
        assert!(out.iter().all(|z| z.norm() < 1e-15));
        crate::kernels::check_projection(&diagonal_projection(4)).unwrap();
    }

    #[test]
    fn x_state_validation() {
        assert!(XState::new([0.01, 0.49, 0.49, 0.01], c64(0., 0.), c64(0.5, 0.)).is_err());
        assert!(XState::new([0.01, 0.49, 0.49, 0.01], c64(0., 0.), c64(0.48, 0.)).is_ok());
        assert!(XState::new([0.5, 0.5, 0.0, 0.1], c64(0., 0.), c64(0., 0.)).is_err());
        let mut m = XState::phi_plus().to_matrix();
        assert_eq!(XState::from_matrix(&m).unwrap(), XState::phi_plus());
        m[(0, 1)] = c64(1e-6, 0.);
        assert!(XState::from_matrix(&m).is_err());
    }

    #[test]
    fn concurrence_closed_form_matches_wootters() {
        let states = [
            XState::phi_plus(),
            XState::maximally_mixed(),
            XState::new([0.01, 0.49, 0.49, 0.01], c64(0.005, 0.005), c64(0.3, -0.3)).unwrap(),
            XState::new([0.4, 0.1, 0.2, 0.3], c64(0.2, 0.25), c64(0.1, 0.)).unwrap(),
        ];
        for x in states {
            let general = concurrence(&x.to_density_matrix()).unwrap();
            assert!((general - concurrence_x(&x)).abs() < 1e-7, "{x:?}: {general}");
        }
        assert!((concurrence_x(&XState::phi_plus()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dilation_without_coupling_reduces_to_system_semigroup() {
        let sys = superop::lindblad_superop(
            &LindbladSpec::new(linalg::sigma_x() * c64(0.3, 0.), vec![linalg::sigma_minus() * c64(0.6, 0.)]).unwrap(),
        );
        let id = linalg::identity(2);
        let h = linalg::kron(&(linalg::sigma_x() * c64(0.3, 0.)), &id) + linalg::kron(&id, &linalg::sigma_z());
        let jumps = vec![
            linalg::kron(&(linalg::sigma_minus() * c64(0.6, 0.)), &id),
            linalg::kron(&id, &(linalg::sigma_plus() * c64(0.2, 0.))),
        ];
        let total = superop::lindblad_superop(&LindbladSpec::new(h, jumps).unwrap());
        let model = DilationModel::new(2, total, DensityMatrix::maximally_mixed(2)).unwrap();
        for t in [0.0, 0.5, 2.0] {
            assert!(model.reduce(1.0 + t, 1.0).unwrap().distance(&sys.exp_scaled(t)) < 1e-10);
        }
    }
}
