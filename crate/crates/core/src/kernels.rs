//! Waiting-time functions of semi-Markov dynamics and the rate functions,
//! memory kernels and time-local generators derived from them.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c64;
use crate::propagate::{DeltaConvention, MemoryKernel, ScalarFn, TimeLocalGenerator};
use crate::superop::{self, Superoperator};

/// `F` must stay below `1 - SATURATION_MARGIN` for the rate `f / (1 - F)` to exist.
pub const SATURATION_MARGIN: f64 = 1e-12;
/// Lower bound accepted for cumulative rates.
pub const CUMULATIVE_TOL: f64 = 1e-12;
pub const COMMUTATOR_TOL: f64 = 1e-10;
pub const LINDBLAD_TOL: f64 = 1e-9;
pub const PROJECTION_TOL: f64 = 1e-10;

/// Samples per unit time used when scanning a horizon.
const SCAN_DENSITY: f64 = 1000.0;

fn scan_points(horizon: f64) -> Vec<f64> {
    let n = (horizon * SCAN_DENSITY).ceil().max(1.0) as usize;
    (0..=n).map(|k| horizon * k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WaitingFamily {
    /// `f(t) = epsilon gamma exp(-gamma t)`.
    Exponential { epsilon: f64, gamma: f64 },
    Zero,
    Tabulated,
    Custom,
}

/// A waiting-time function `f` together with its cumulative `F(t) = int_0^t f`.
#[derive(Clone)]
pub struct WaitingTimeFunction {
    f: ScalarFn,
    cumulative: ScalarFn,
    family: WaitingFamily,
}

impl fmt::Debug for WaitingTimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaitingTimeFunction").field("family", &self.family).finish()
    }
}

impl WaitingTimeFunction {
    pub fn exponential(epsilon: f64, gamma: f64) -> Result<Self> {
        check_exponential(epsilon, gamma)?;
        Ok(WaitingTimeFunction {
            f: Arc::new(move |t| epsilon * gamma * (-gamma * t).exp()),
            cumulative: Arc::new(move |t| -epsilon * (-gamma * t).exp_m1()),
            family: WaitingFamily::Exponential { epsilon, gamma },
        })
    }

    pub fn zero() -> Self {
        WaitingTimeFunction {
            f: Arc::new(|_| 0.0),
            cumulative: Arc::new(|_| 0.0),
            family: WaitingFamily::Zero,
        }
    }

    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cumulative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        WaitingTimeFunction {
            f: Arc::new(f),
            cumulative: Arc::new(cumulative),
            family: WaitingFamily::Custom,
        }
    }

    /// Natural cubic spline through `(times, values)`; `F` is the exact
    /// integral of the spline. The table must start at 0. Beyond the last
    /// knot `f` is 0 and `F` stays at its final value.
    pub fn tabulated(times: &[f64], values: &[f64]) -> Result<Self> {
        let spline = Arc::new(CubicSpline::new(times, values)?);
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid("tabulated waiting-time function must start at t = 0".into()));
        }
        let s2 = Arc::clone(&spline);
        Ok(WaitingTimeFunction {
            f: Arc::new(move |t| spline.value(t)),
            cumulative: Arc::new(move |t| s2.integral(t)),
            family: WaitingFamily::Tabulated,
        })
    }

    pub fn f(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        (self.cumulative)(t)
    }

    pub fn family(&self) -> WaitingFamily {
        self.family
    }

    /// `1 - F(t)`, evaluated without cancellation for the exponential family.
    pub fn survival(&self, t: f64) -> f64 {
        match self.family {
            WaitingFamily::Exponential { epsilon, gamma } => (1.0 - epsilon) + epsilon * (-gamma * t).exp(),
            _ => 1.0 - self.cumulative(t),
        }
    }

    /// Checks `F(0) = 0` and `0 <= F <= 1` on a dense scan of `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let f0 = self.cumulative(0.0);
        if f0.abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!("cumulative F(0) = {f0}, expected 0")));
        }
        for t in scan_points(horizon) {
            let v = self.cumulative(t);
            if !(v >= -1e-12 && v <= 1.0 + 1e-12) {
                return Err(Error::ParameterDomain(format!("cumulative F({t}) = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Max over a scan of `[0, horizon]` of `|int_0^t f - F(t)|`.
    pub fn cumulative_defect(&self, horizon: f64, tol: f64) -> f64 {
        let checkpoints = 100;
        (1..=checkpoints)
            .map(|k| {
                let t = horizon * k as f64 / checkpoints as f64;
                (simpson(&*self.f, 0.0, t, tol) - self.cumulative(t)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_exponential(epsilon: f64, gamma: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::ParameterDomain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::ParameterDomain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

#[derive(Debug)]
struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    prefix: Vec<f64>,
}

impl CubicSpline {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        crate::trajectory::check_grid(x)?;
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidGrid("a spline table needs at least two (t, value) pairs".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite table value".into()));
        }
        let n = x.len();
        // Second derivatives from the tridiagonal system, natural end conditions.
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = (h0 + h1) / 3.0;
                upper[i] = h1 / 6.0;
                rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                if i > 1 {
                    let lower = h0 / 6.0;
                    let w = lower / diag[i - 1];
                    diag[i] -= w * upper[i - 1];
                    rhs[i] -= w * rhs[i - 1];
                }
            }
            for i in (1..n - 1).rev() {
                m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
            }
        }
        let mut spline = CubicSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
            prefix: vec![0.0; n],
        };
        for i in 0..n - 1 {
            spline.prefix[i + 1] = spline.prefix[i] + spline.segment_integral(i, x[i + 1] - x[i]);
        }
        Ok(spline)
    }

    fn coefficients(&self, i: usize) -> [f64; 4] {
        let h = self.x[i + 1] - self.x[i];
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        [
            self.y[i],
            (self.y[i + 1] - self.y[i]) / h - h * (2.0 * m0 + m1) / 6.0,
            m0 / 2.0,
            (m1 - m0) / (6.0 * h),
        ]
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.x[0] || t > *self.x.last().unwrap() {
            return None;
        }
        Some(self.x.partition_point(|&k| k <= t).clamp(1, self.x.len() - 1) - 1)
    }

    fn value(&self, t: f64) -> f64 {
        match self.segment(t) {
            None => 0.0,
            Some(i) => {
                let [a, b, c, d] = self.coefficients(i);
                let s = t - self.x[i];
                a + s * (b + s * (c + s * d))
            }
        }
    }

    fn segment_integral(&self, i: usize, s: f64) -> f64 {
        let [a, b, c, d] = self.coefficients(i);
        s * (a + s * (b / 2.0 + s * (c / 3.0 + s * d / 4.0)))
    }

    fn integral(&self, t: f64) -> f64 {
        if t <= self.x[0] {
            return 0.0;
        }
        match self.segment(t) {
            None => *self.prefix.last().unwrap(),
            Some(i) => self.prefix[i] + self.segment_integral(i, t - self.x[i]),
        }
    }
}

/// Composite Simpson rule on at least `SCAN_DENSITY` panels per unit length,
/// doubled until two successive estimates differ by at most `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = (((b - a) * SCAN_DENSITY).ceil() as usize).max(2);
    n += n % 2;
    let rule = |n: usize| {
        let h = (b - a) / n as f64;
        let mut sum = f(a) + f(b);
        for k in 1..n {
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
        }
        sum * h / 3.0
    };
    let mut estimate = rule(n);
    for _ in 0..8 {
        n *= 2;
        let refined = rule(n);
        let change = (refined - estimate).abs();
        estimate = refined;
        if change <= tol {
            break;
        }
    }
    estimate
}

pub type CumulativeFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// A scalar rate `alpha(tau)` with its cumulative `A(tau) = int_0^tau alpha`.
///
/// The cumulative is complex so that rates with simple poles (such as
/// `tan`) can carry the branch of the logarithm across the pole:
/// `exp(-A)` then has the correct sign on both sides.
#[derive(Clone)]
pub struct RateFunction {
    alpha: ScalarFn,
    cumulative: CumulativeFn,
    singularities: Vec<f64>,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction").field("singularities", &self.singularities).finish()
    }
}

impl RateFunction {
    pub fn new(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cumulative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        RateFunction {
            alpha: Arc::new(alpha),
            cumulative: Arc::new(move |t| c64(cumulative(t), 0.)),
            singularities: Vec::new(),
        }
    }

    pub fn constant(gamma: f64) -> Self {
        RateFunction::new(move |_| gamma, move |t| gamma * t)
    }

    /// `alpha = tan`, `A = -Log(cos)` with the principal complex logarithm.
    /// Poles `(n + 1/2) pi` up to `horizon` are recorded as singularities.
    pub fn tangent(horizon: f64) -> Self {
        let mut poles = Vec::new();
        let mut n = 0.0;
        while n * PI + FRAC_PI_2 <= horizon {
            poles.push(n * PI + FRAC_PI_2);
            n += 1.0;
        }
        RateFunction {
            alpha: Arc::new(f64::tan),
            cumulative: Arc::new(|t: f64| {
                let c = t.cos();
                c64(-c.abs().ln(), if c < 0.0 { -PI } else { 0.0 })
            }),
            singularities: poles,
        }
    }

    pub fn with_singularities(mut self, mut points: Vec<f64>) -> Self {
        points.sort_by(f64::total_cmp);
        self.singularities = points;
        self
    }

    pub fn alpha(&self, t: f64) -> f64 {
        (self.alpha)(t)
    }

    pub fn cumulative(&self, t: f64) -> Complex64 {
        (self.cumulative)(t)
    }

    pub fn singularities(&self) -> &[f64] {
        &self.singularities
    }

    /// First sampled `tau` in `[0, horizon]` where `Re A(tau) < -CUMULATIVE_TOL`.
    fn first_negative_cumulative(&self, horizon: f64) -> Option<(f64, f64)> {
        scan_points(horizon)
            .into_iter()
            .map(|t| (t, self.cumulative(t).re))
            .find(|(_, v)| *v < -CUMULATIVE_TOL || v.is_nan())
    }
}

/// `alpha = f / (1 - F)`, `A = -ln(1 - F)`.
pub fn alpha_from_f(w: &WaitingTimeFunction, horizon: f64) -> Result<RateFunction> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInterval { t0: 0.0, t1: horizon });
    }
    if let Some(tau) = scan_points(horizon)
        .into_iter()
        .find(|&t| w.survival(t) <= SATURATION_MARGIN)
    {
        return Err(Error::HorizonSaturated { tau });
    }
    let (wf, wc, wf_family) = (w.clone(), w.clone(), w.family());
    Ok(RateFunction::new(
        move |t| wf.f(t) / wf.survival(t),
        move |t| match wf_family {
            WaitingFamily::Exponential { .. } => -wc.survival(t).ln(),
            _ => -(-wc.cumulative(t)).ln_1p(),
        },
    ))
}

/// `kappa(t) = c delta(t) + kappa_reg(t)`; the delta sits fully inside the
/// memory integral (weight 1).
#[derive(Clone)]
pub struct ScalarKernel {
    pub delta_coeff: f64,
    pub regular: Option<ScalarFn>,
}

impl fmt::Debug for ScalarKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarKernel")
            .field("delta_coeff", &self.delta_coeff)
            .field("regular", &self.regular.is_some())
            .finish()
    }
}

impl ScalarKernel {
    pub fn regular_at(&self, t: f64) -> f64 {
        self.regular.as_ref().map_or(0.0, |k| k(t))
    }

    /// `kappa(t) op` as a memory kernel.
    pub fn to_memory_kernel(&self, op: &Superoperator) -> Result<MemoryKernel> {
        let mut kernel = MemoryKernel::zero(op.dim()).with_delta(self.delta_coeff, op.clone(), DeltaConvention::Full)?;
        if let Some(k) = &self.regular {
            kernel = kernel.with_term(Arc::clone(k), op.clone())?;
        }
        Ok(kernel)
    }
}

/// Inverse Laplace transform of `s f(s) / (1 - f(s))` for the exponential family:
/// `kappa(t) = epsilon gamma delta(t) - epsilon (1 - epsilon) gamma^2 exp(-gamma (1 - epsilon) t)`.
pub fn kappa_from_f_exponential(epsilon: f64, gamma: f64) -> Result<ScalarKernel> {
    check_exponential(epsilon, gamma)?;
    let regular: Option<ScalarFn> = if epsilon == 1.0 {
        None
    } else {
        let amp = epsilon * (1.0 - epsilon) * gamma * gamma;
        let rate = gamma * (1.0 - epsilon);
        Some(Arc::new(move |t| -amp * (-rate * t).exp()))
    };
    Ok(ScalarKernel {
        delta_coeff: epsilon * gamma,
        regular,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub max_residual: f64,
    pub worst_t: f64,
    pub checkpoints: usize,
}

impl KappaReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// Residual of the time-domain form of `kappa(s) = s f(s) / (1 - f(s))`:
/// `c + int_0^t kappa_reg - c F(t) - (kappa_reg * F)(t) = f(t)`, checked on
/// evenly spaced points of `(0, horizon]`. `tol` drives quadrature refinement.
pub fn verify_kappa_f_relation(k: &ScalarKernel, w: &WaitingTimeFunction, horizon: f64, tol: f64) -> KappaReport {
    const CHECKPOINTS: usize = 64;
    let c = k.delta_coeff;
    let mut report = KappaReport {
        max_residual: 0.0,
        worst_t: 0.0,
        checkpoints: CHECKPOINTS + 1,
    };
    for j in 0..=CHECKPOINTS {
        let t = horizon * j as f64 / CHECKPOINTS as f64;
        let (integral, convolution) = match &k.regular {
            None => (0.0, 0.0),
            Some(kr) => (
                simpson(&**kr, 0.0, t, tol),
                simpson(&|u| kr(u) * w.cumulative(t - u), 0.0, t, tol),
            ),
        };
        let residual = (c + integral - c * w.cumulative(t) - convolution - w.f(t)).abs();
        if residual > report.max_residual || residual.is_nan() {
            report.max_residual = residual;
            report.worst_t = t;
        }
    }
    report
}

/// Checks that `p` is an idempotent CPTP map.
pub fn check_projection(p: &Superoperator) -> Result<()> {
    let square = superop::compose(p, p)?;
    let idem = square.max_entry_distance(p);
    if idem > PROJECTION_TOL {
        return Err(Error::ProjectionInvalid(format!("not idempotent (defect {idem:e})")));
    }
    let cp = superop::is_completely_positive(p, superop::CP_TOL);
    if !cp.holds {
        return Err(Error::ProjectionInvalid(format!("not completely positive (min Choi eigenvalue {:e})", cp.value)));
    }
    let tp = superop::is_trace_preserving(p, superop::TP_TOL);
    if !tp.holds {
        return Err(Error::ProjectionInvalid(format!("not trace preserving (defect {:e})", tp.value)));
    }
    Ok(())
}

/// `Lambda(tau) = (1 - F(tau)) id + F(tau) P`.
pub fn semi_markov_map(w: &WaitingTimeFunction, p: &Superoperator, tau: f64) -> Result<Superoperator> {
    check_projection(p)?;
    Ok(semi_markov_map_unchecked(w, p, tau))
}

pub(crate) fn semi_markov_map_unchecked(w: &WaitingTimeFunction, p: &Superoperator, tau: f64) -> Superoperator {
    let big_f = w.cumulative(tau);
    Superoperator::identity(p.dim())
        .scale_re(1.0 - big_f)
        .add(&p.scale_re(big_f))
        .expect("same dimension")
}

/// `L(tau) = alpha(tau) L_m`.
pub fn build_scaled_generator(a: &RateFunction, l: &Superoperator, horizon: f64) -> Result<TimeLocalGenerator> {
    build_commuting_mixture(std::slice::from_ref(a), std::slice::from_ref(l), horizon)
}

/// `L(tau) = sum_k alpha_k(tau) L_k` for pairwise commuting Lindblad
/// generators `L_k` whose cumulative rates stay nonnegative on
/// `[0, horizon]`; the exact integral `sum_k (A_k(tau2) - A_k(tau1)) L_k`
/// is attached.
pub fn build_commuting_mixture(
    rates: &[RateFunction],
    ops: &[Superoperator],
    horizon: f64,
) -> Result<TimeLocalGenerator> {
    if rates.len() != ops.len() || rates.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} rate functions for {} generators",
            rates.len(),
            ops.len()
        )));
    }
    let dim = ops[0].dim();
    if let Some(op) = ops.iter().find(|op| op.dim() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "generators on dimensions {dim} and {}",
            op.dim()
        )));
    }
    for (index, op) in ops.iter().enumerate() {
        let report = superop::lindblad_form_report(op);
        if !report.holds(LINDBLAD_TOL) {
            let witness = report
                .trace_annihilation
                .max(report.hermiticity_preservation)
                .max(-report.min_gks_eigenvalue);
            return Err(Error::NotLindblad { index, witness });
        }
    }
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let a = ops[i].matrix();
            let b = ops[j].matrix();
            let norm = crate::linalg::frobenius(&(a * b - b * a));
            if norm > COMMUTATOR_TOL {
                return Err(Error::NonCommuting { first: i, second: j, norm });
            }
        }
    }
    for (index, rate) in rates.iter().enumerate() {
        if let Some((tau, value)) = rate.first_negative_cumulative(horizon) {
            return Err(Error::NegativeCumulative { index, tau, value });
        }
    }

    let mut singularities: Vec<f64> = rates.iter().flat_map(|r| r.singularities().iter().copied()).collect();
    singularities.sort_by(f64::total_cmp);
    singularities.dedup();

    let terms: Arc<Vec<(RateFunction, Superoperator)>> =
        Arc::new(rates.iter().cloned().zip(ops.iter().cloned()).collect());
    let for_integral = Arc::clone(&terms);
    Ok(TimeLocalGenerator::new(dim, move |tau| {
        terms
            .iter()
            .try_fold(Superoperator::zero(dim), |acc, (rate, op)| acc.add(&op.scale_re(rate.alpha(tau))))
    })
    .with_singularities(singularities)
    .with_exact_integral(move |t1, t2| {
        for_integral.iter().try_fold(Superoperator::zero(dim), |acc, (rate, op)| {
            acc.add(&op.scale(rate.cumulative(t2) - rate.cumulative(t1)))
        })
    }))
}
