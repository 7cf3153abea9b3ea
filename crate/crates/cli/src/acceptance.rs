//! The bundled acceptance scenarios. Each criterion reports a list of checks
//! (measured value against a pinned bound); it passes when all checks hold.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nonmarkov::kernels::{
    alpha_from_f, build_scaled_generator, kappa_from_f_exponential, semi_markov_map, verify_kappa_f_relation, WaitingTimeFunction,
};
use nonmarkov::linalg::{self, c64, CMatrix};
use nonmarkov::models::{
    asymptotic_concurrence, concurrence_x, diagonal_projection, projection_channel, tan_dephasing_model, DilationModel,
    PureDecoherenceModel, XState,
};
use nonmarkov::propagate::{
    composition_defect, homogeneity_defect, propagate_local, propagate_local_on, propagate_nonlocal, MemoryKernel, StepControl,
    TimeLocalGenerator,
};
use nonmarkov::spectra::{damping_bases_of, formal_inverse, generator_from_damping_basis, tcl_generator_from_map, INVERTIBILITY_TOL};
use nonmarkov::superop::{apply, extend_channel, lindblad_superop, DensityMatrix, Factor, LindbladSpec, Superoperator};
use nonmarkov::trajectory::MapTrajectory;
use nonmarkov::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20;

/// Every bound used by the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub local_vs_analytic: f64,
    pub nonlocal_vs_analytic: f64,
    pub runtime_seconds: f64,
    pub delta_kernel: f64,
    pub tan_nonlocal_cosine: f64,
    pub tan_local_vs_analytic: f64,
    pub min_choi: f64,
    pub inverse_window: f64,
    pub concurrence_cosine: f64,
    pub separable_threshold: f64,
    pub rate_relative: f64,
    pub repropagation: f64,
    pub route_agreement: f64,
    pub composition_markovian: f64,
    pub composition_non_markovian: f64,
    pub composition_golden: f64,
    pub homogeneity: f64,
    pub asymptotic_concurrence: f64,
    pub separable_limit: f64,
    pub diagonal_coherence: f64,
    pub coherence_psd: f64,
    pub generator_closure: f64,
    pub kernel_identity: f64,
    pub order_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            local_vs_analytic: 1e-6,
            nonlocal_vs_analytic: 1e-4,
            runtime_seconds: 10.0,
            delta_kernel: 1e-6,
            tan_nonlocal_cosine: 1e-6,
            tan_local_vs_analytic: 1e-4,
            min_choi: -1e-10,
            inverse_window: 1e-3,
            concurrence_cosine: 1e-6,
            separable_threshold: 1e-9,
            rate_relative: 1e-5,
            repropagation: 1e-4,
            route_agreement: 1e-5,
            composition_markovian: 1e-8,
            composition_non_markovian: 1e-2,
            composition_golden: 1e-9,
            homogeneity: 1e-6,
            asymptotic_concurrence: 1e-3,
            separable_limit: 1e-9,
            diagonal_coherence: 1e-12,
            coherence_psd: -1e-10,
            generator_closure: 1e-6,
            kernel_identity: 1e-8,
            order_ratio: 3.5,
        }
    }
}

impl Tolerances {
    /// Overrides one named bound.
    pub fn set(&mut self, name: &str, value: f64) -> CliResult<()> {
        let mut doc = serde_json::to_value(&*self).expect("serializable");
        match doc.get_mut(name) {
            Some(slot) => *slot = serde_json::json!(value),
            None => return Err(CliError::Validation(format!("unknown tolerance {name}"))),
        }
        *self = serde_json::from_value(doc).map_err(CliError::validation)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
}

impl Check {
    fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            label: label.into(),
            value,
            relation: Relation::AtMost,
            bound,
        }
    }

    fn at_least(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            label: label.into(),
            value,
            relation: Relation::AtLeast,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.value <= self.bound,
            Relation::AtLeast => self.value >= self.bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(f, "{} {:.3e} {op} {:.1e}", self.label, self.value, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub checks: Vec<Check>,
    /// Set when a computation failed outright.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {:<26} {status} ({:.2} s)", self.id, self.name, self.seconds)?;
        if let Some(e) = &self.error {
            write!(f, "  error: {e}")?;
        }
        for c in &self.checks {
            let mark = if c.passed() { "" } else { " [x]" };
            write!(f, "\n    {c}{mark}")?;
        }
        Ok(())
    }
}

type Body = fn(&Tolerances, u64) -> nonmarkov::Result<Vec<Check>>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    body: Body,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "semi_markov_triple", body: semi_markov_triple },
    Criterion { id: 2, name: "delta_kernel", body: delta_kernel },
    Criterion { id: 3, name: "tan_model", body: tan_model },
    Criterion { id: 4, name: "sudden_death_revival", body: sudden_death_revival },
    Criterion { id: 5, name: "generator_extraction", body: generator_extraction },
    Criterion { id: 6, name: "composition_homogeneity", body: composition_homogeneity },
    Criterion { id: 7, name: "asymptotic_concurrence", body: asymptotic_concurrence_check },
    Criterion { id: 8, name: "pure_decoherence", body: pure_decoherence },
    Criterion { id: 9, name: "kernel_identity", body: kernel_identity },
    Criterion { id: 10, name: "convergence_order", body: convergence_order },
];

impl Criterion {
    pub fn run(&self, tol: &Tolerances, seed: u64) -> CriterionResult {
        let start = Instant::now();
        let outcome = (self.body)(tol, seed);
        let seconds = start.elapsed().as_secs_f64();
        let (checks, error) = match outcome {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        CriterionResult {
            id: self.id,
            name: self.name.into(),
            checks,
            error,
            seconds,
        }
    }
}

/// Criteria named by id (`"3"`) or name (`"tan_model"`); all when `names` is empty.
pub fn select(names: &[String]) -> CliResult<Vec<&'static Criterion>> {
    if names.is_empty() {
        return Ok(CRITERIA.iter().collect());
    }
    names
        .iter()
        .map(|n| {
            CRITERIA
                .iter()
                .find(|c| c.name == n || c.id.to_string() == *n)
                .ok_or_else(|| CliError::Validation(format!("unknown criterion {n}")))
        })
        .collect()
}

pub fn run_all(selected: &[&Criterion], tol: &Tolerances, seed: u64) -> Vec<CriterionResult> {
    selected.iter().map(|c| c.run(tol, seed)).collect()
}

fn sup_over<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn sup_to_closed_form(traj: &MapTrajectory, f: impl Fn(f64) -> Superoperator) -> f64 {
    sup_over(traj.elapsed().iter().zip(traj.maps()).map(|(t, m)| m.distance(&f(*t))))
}

fn semi_markov_l0() -> (Superoperator, Superoperator) {
    let p = projection_channel(&DensityMatrix::maximally_mixed(2));
    let l0 = p.sub(&Superoperator::identity(2)).expect("same dimension");
    (p, l0)
}

fn semi_markov_triple(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let start = Instant::now();
    let (eps, gamma, horizon) = (0.5, 1.0, 10.0);
    let (p, l0) = semi_markov_l0();
    let w = WaitingTimeFunction::exponential(eps, gamma)?;
    // The scaled generator carries an exact integral; integrate numerically instead.
    let gen = build_scaled_generator(&alpha_from_f(&w, horizon)?, &l0, horizon)?;
    let ctrl = StepControl::default().numeric_only().with_output_step(1e-2);
    let local = propagate_local(&gen, 0.0, horizon, &ctrl)?;
    let kernel = kappa_from_f_exponential(eps, gamma)?.to_memory_kernel(&l0)?;
    let nonlocal = propagate_nonlocal(&kernel, 0.0, horizon, 1e-3)?;
    let analytic = |t: f64| semi_markov_map(&w, &p, t).expect("valid projection");
    Ok(vec![
        Check::at_most("local vs analytic", sup_to_closed_form(&local, analytic), tol.local_vs_analytic),
        Check::at_most("nonlocal vs analytic", sup_to_closed_form(&nonlocal, analytic), tol.nonlocal_vs_analytic),
        Check::at_most("runtime [s]", start.elapsed().as_secs_f64(), tol.runtime_seconds),
    ])
}

/// Random qubit Lindblad generator: Hamiltonian and two jump operators with
/// entries uniform in the unit square, jumps scaled by 1/2.
pub fn random_qubit_lindblad(seed: u64) -> Superoperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |scale: f64| CMatrix::from_fn(2, 2, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale);
    let a = draw(1.0);
    let h = (&a + a.adjoint()) * c64(0.5, 0.);
    let jumps = vec![draw(0.5), draw(0.5)];
    lindblad_superop(&LindbladSpec::new(h, jumps).expect("hermitian by construction"))
}

fn delta_kernel(tol: &Tolerances, seed: u64) -> nonmarkov::Result<Vec<Check>> {
    let l = random_qubit_lindblad(seed);
    let traj = propagate_nonlocal(&MemoryKernel::markovian(l.clone()), 0.0, 5.0, 1e-4)?;
    Ok(vec![Check::at_most("sup |Lambda - exp(tL)|", sup_to_closed_form(&traj, |t| l.exp_scaled(t)), tol.delta_kernel)])
}

fn poles(horizon: f64) -> Vec<f64> {
    (0..).map(|n| (n as f64 + 0.5) * PI).take_while(|&p| p <= horizon).collect()
}

fn tan_model(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let horizon = 3.0 * PI;
    let model = tan_dephasing_model(horizon)?;
    let nonlocal = propagate_nonlocal(&model.kernel, 0.0, horizon, 1e-3)?;
    let cosine = sup_over(nonlocal.elapsed().iter().zip(nonlocal.maps()).map(|(t, m)| (m.matrix()[(2, 2)] - c64(t.cos(), 0.)).norm()));
    let local = propagate_local_on(&model.generator, 0.0, nonlocal.grid(), &StepControl::default())?;
    let local_err = sup_to_closed_form(&local, |t| model.analytic_map(t));
    let local_vs_nonlocal = local.sup_distance(&nonlocal).unwrap_or(f64::INFINITY);
    let analytic = MapTrajectory::from_fn(0.0, &nonlocal.elapsed(), |t| Ok(model.analytic_map(t)))?;
    let min_choi = analytic.min_choi_eigenvalue().min(local.min_choi_eigenvalue()).min(nonlocal.min_choi_eigenvalue());

    // NotInvertible exactly on the grid points within the window of a pole.
    let window = tol.inverse_window;
    let pole_list = poles(horizon);
    let mut mismatches = 0usize;
    let mut flagged_per_pole = vec![0usize; pole_list.len()];
    let n = (horizon / 1e-3).floor() as usize;
    for k in 0..=n {
        let tau = k as f64 * 1e-3;
        let near = pole_list.iter().position(|p| (tau - p).abs() <= window);
        let singular = matches!(formal_inverse(&model.analytic_map(tau), window), Err(Error::NotInvertible { .. }));
        if singular != near.is_some() {
            mismatches += 1;
        }
        if let (true, Some(i)) = (singular, near) {
            flagged_per_pole[i] += 1;
        }
    }
    Ok(vec![
        Check::at_most("nonlocal coherence vs cos", cosine, tol.tan_nonlocal_cosine),
        Check::at_most("local (exact mode) vs analytic", local_err, tol.tan_local_vs_analytic),
        Check::at_most("local vs nonlocal", local_vs_nonlocal, tol.tan_local_vs_analytic),
        Check::at_least("min Choi eigenvalue", min_choi, tol.min_choi),
        Check::at_most("NotInvertible mismatches on 1e-3 grid", mismatches as f64, 0.0),
        Check::at_least("flagged points per pole (min)", flagged_per_pole.into_iter().min().unwrap_or(0) as f64, 1.0),
    ])
}

fn phi_plus_concurrence(map: &Superoperator) -> nonmarkov::Result<f64> {
    let out = apply(&extend_channel(map, Factor::Second)?, DensityMatrix::phi_plus().matrix())?;
    Ok(concurrence_x(&XState::from_matrix(&out)?))
}

fn sudden_death_revival(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let horizon = 3.0 * PI;
    let model = tan_dephasing_model(horizon)?;
    let pole_list = poles(horizon);
    let mut worst: f64 = 0.0;
    let mut zeros_off_pole = 0usize;
    for k in 0..=(horizon / 1e-3).floor() as usize {
        let tau = k as f64 * 1e-3;
        let c = phi_plus_concurrence(&model.analytic_map(tau))?;
        worst = worst.max((c - tau.cos().abs()).abs());
        let near = pole_list.iter().any(|p| (tau - p).abs() <= 1e-3);
        if c <= tol.separable_threshold && !near {
            zeros_off_pole += 1;
        }
    }
    let at_poles = sup_over(pole_list.iter().map(|&p| phi_plus_concurrence(&model.analytic_map(p)).unwrap_or(f64::INFINITY)));
    let early = phi_plus_concurrence(&model.analytic_map(0.6 * PI))?;
    let late = phi_plus_concurrence(&model.analytic_map(0.95 * PI))?;
    Ok(vec![
        Check::at_most("sup |C - |cos||", worst, tol.concurrence_cosine),
        Check::at_most("C at the poles", at_poles, tol.separable_threshold),
        Check::at_most("separable points away from poles", zeros_off_pole as f64, 0.0),
        Check::at_least("revival C(0.95 pi) - C(0.6 pi)", late - early, f64::MIN_POSITIVE),
    ])
}

fn generator_extraction(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let (h, horizon) = (1e-3, 10.0);
    let (p, l0) = semi_markov_l0();
    let w = WaitingTimeFunction::exponential(0.5, 1.0)?;
    let alpha = alpha_from_f(&w, horizon)?;
    let n = (horizon / h).round() as usize;
    let taus: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let traj = MapTrajectory::from_fn(0.0, &taus, |t| semi_markov_map(&w, &p, t))?;
    let direct = tcl_generator_from_map(&traj, INVERTIBILITY_TOL)?;
    let norm2 = l0.frobenius_norm().powi(2);
    let mut rate_err: f64 = 0.0;
    let mut missing = 0usize;
    for (tau, g) in taus.iter().zip(direct.generators()) {
        match g {
            Some(g) => {
                // Coefficient of g along L0.
                let coeff = (l0.matrix().adjoint() * g.matrix()).trace().re / norm2;
                let exact = alpha.alpha(*tau);
                rate_err = rate_err.max((coeff - exact).abs() / exact.abs());
            }
            None => missing += 1,
        }
    }
    let spectral = generator_from_damping_basis(&damping_bases_of(&traj)?, INVERTIBILITY_TOL)?;
    let routes = sup_over(direct.generators().iter().zip(spectral.generators()).map(|(a, b)| match (a, b) {
        (Some(a), Some(b)) => a.distance(b),
        _ => f64::INFINITY,
    }));
    let gen = TimeLocalGenerator::interpolated(&direct)?;
    let again = propagate_local_on(&gen, 0.0, traj.grid(), &StepControl::default())?;
    Ok(vec![
        Check::at_most("relative rate error", rate_err, tol.rate_relative),
        Check::at_most("singular points", missing as f64, 0.0),
        Check::at_most("re-propagation vs map", again.sup_distance(&traj).unwrap_or(f64::INFINITY), tol.repropagation),
        Check::at_most("damping-basis vs direct", routes, tol.route_agreement),
    ])
}

fn composition_homogeneity(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let (_, l0) = semi_markov_l0();
    let ctrl = StepControl::default().with_output_step(0.5);
    let local = |eps: f64| -> nonmarkov::Result<TimeLocalGenerator> {
        let w = WaitingTimeFunction::exponential(eps, 1.0)?;
        build_scaled_generator(&alpha_from_f(&w, 10.0)?, &l0, 10.0)
    };
    let markov = local(1.0)?;
    let markov_defect = composition_defect(|a, b| propagate_local(&markov, a, b, &ctrl), 2.0, 1.0, 0.0)?;
    let semi = local(0.5)?;
    let semi_defect = composition_defect(|a, b| propagate_local(&semi, a, b, &ctrl), 2.0, 1.0, 0.0)?;
    // Lambda = P + lambda (1 - P), lambda(tau) = (1 + e^-tau)/2, |1 - P|_F = sqrt 3.
    let lambda = |tau: f64| 0.5 * (1.0 + (-tau).exp());
    let golden = 3f64.sqrt() * (lambda(2.0) - lambda(1.0).powi(2)).abs();

    let shift = 0.7;
    let kernel = kappa_from_f_exponential(0.5, 1.0)?.to_memory_kernel(&l0)?;
    let kernel_defect = homogeneity_defect(|a, b| propagate_nonlocal(&kernel, a, b, 1e-2), 0.0, 5.0, shift)?;
    let tan = tan_dephasing_model(5.0)?;
    let tan_defect = homogeneity_defect(|a, b| propagate_nonlocal(&tan.kernel, a, b, 1e-2), 0.0, 5.0, shift)?;
    let dilation = DilationModel::coupled_qubits(1.0, 0.5)?;
    let taus: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
    let dilation_defect = homogeneity_defect(|a, _| dilation.trajectory(a, &taus), 0.0, 5.0, shift)?;
    Ok(vec![
        Check::at_most("Markovian composition defect", markov_defect, tol.composition_markovian),
        Check::at_least("semi-Markov composition defect", semi_defect, tol.composition_non_markovian),
        Check::at_most("semi-Markov defect vs closed form", (semi_defect - golden).abs(), tol.composition_golden),
        Check::at_most("homogeneity: semi-Markov kernel", kernel_defect, tol.homogeneity),
        Check::at_most("homogeneity: tan kernel", tan_defect, tol.homogeneity),
        Check::at_most("homogeneity: dilation", dilation_defect, tol.homogeneity),
    ])
}

fn asymptotic_concurrence_check(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let gamma = 1.0;
    let horizon = 20.0 / gamma;
    let x = XState::new([0.01, 0.49, 0.49, 0.01], c64(0., 0.), c64(0.48, 0.))?;
    let l = diagonal_projection(4).sub(&Superoperator::identity(4))?;
    let mut checks = Vec::new();
    for eps in [0.1, 0.5, 1.0] {
        let w = WaitingTimeFunction::exponential(eps, gamma)?;
        let gen = build_scaled_generator(&alpha_from_f(&w, horizon)?, &l, horizon)?;
        let traj = propagate_local(&gen, 0.0, horizon, &StepControl::default().numeric_only().with_output_step(1.0))?;
        let out = XState::from_matrix(&apply(traj.last(), &x.to_matrix())?)?;
        let simulated = concurrence_x(&out);
        let limit = asymptotic_concurrence(&x, eps)?;
        checks.push(Check::at_most(format!("eps {eps}: |C(T) - C(inf)|"), (simulated - limit).abs(), tol.asymptotic_concurrence));
        if eps == 1.0 {
            checks.push(Check::at_most("eps 1: C(T)", simulated, tol.separable_limit));
        }
    }
    Ok(checks)
}

fn pure_decoherence(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let model = PureDecoherenceModel::qubit_default();
    let times: Vec<f64> = (0..=1000).map(|k| 0.01 * k as f64).collect();
    let mut diag: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for &t in &times {
        let c = model.cmn(t);
        for n in 0..model.system_dim() {
            diag = diag.max((c[(n, n)] - c64(1., 0.)).norm());
        }
        min_eig = min_eig.min(linalg::min_hermitian_eigenvalue(&c));
    }
    let ctrl = StepControl::default().with_output_step(0.05).with_tolerances(1e-11, 1e-14);
    let traj = propagate_local(&model.time_local_generator(), 0.0, 10.0, &ctrl)?;
    let closure = sup_to_closed_form(&traj, |t| model.map(t));
    let scan = model.lindblad_witness(&times)?;
    Ok(vec![
        Check::at_most("|c_nn - 1|", diag, tol.diagonal_coherence),
        Check::at_least("min eigenvalue of c", min_eig, tol.coherence_psd),
        Check::at_most("propagated generator vs c(t)", closure, tol.generator_closure),
        Check::at_most("min GKS eigenvalue (negative = witness)", scan.min_gks_eigenvalue, -f64::MIN_POSITIVE),
    ])
}

fn kernel_identity(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.5, 1.0] {
        for gamma in [0.5, 1.0, 2.0] {
            let w = WaitingTimeFunction::exponential(eps, gamma)?;
            let k = kappa_from_f_exponential(eps, gamma)?;
            worst = worst.max(verify_kappa_f_relation(&k, &w, 10.0, 1e-13).max_residual);
        }
    }
    Ok(vec![Check::at_most("max residual over the 3x3 grid", worst, tol.kernel_identity)])
}

fn convergence_order(tol: &Tolerances, _: u64) -> nonmarkov::Result<Vec<Check>> {
    let model = tan_dephasing_model(3.0 * PI)?;
    let error = |h: f64| -> nonmarkov::Result<f64> {
        let traj = propagate_nonlocal(&model.kernel, 0.0, 3.0 * PI, h)?;
        Ok(sup_over(traj.elapsed().iter().zip(traj.maps()).map(|(t, m)| (m.matrix()[(2, 2)] - c64(t.cos(), 0.)).norm())))
    };
    let coarse = error(4e-3)?;
    let fine = error(2e-3)?;
    Ok(vec![Check::at_least(format!("error ratio ({coarse:.2e} / {fine:.2e})"), coarse / fine, tol.order_ratio)])
}
