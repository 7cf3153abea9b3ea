//! Propagation of dynamical maps, either by a time-local master equation
//! `dLambda/dt = L(.) Lambda` or by the memory-kernel equation
//! `dLambda/dt = int_{t0}^t K(t - u) Lambda(u) du`, plus the composition
//! and homogeneity diagnostics that tell the two apart from Markovian dynamics.

mod diagnostics;
mod kernel;
mod local;
mod nonlocal;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superop::Superoperator;
use crate::trajectory::GeneratorTrajectory;

pub use diagnostics::{
    composition_defect, evolve_state, homogeneity_defect, trajectory_shift_defect, StateTrajectory,
};
pub use kernel::{DeltaConvention, KernelTerm, MemoryKernel, RegularKernel, ScalarFn};
pub use local::{propagate_local, propagate_local_on};
pub use nonlocal::{propagate_nonlocal, propagate_nonlocal_with_budget, DEFAULT_MEMORY_BUDGET};

pub type GeneratorFn = Arc<dyn Fn(f64) -> Result<Superoperator> + Send + Sync>;
pub type IntegralFn = Arc<dyn Fn(f64, f64) -> Result<Superoperator> + Send + Sync>;

/// The time argument handed to a [`TimeLocalGenerator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// `L(t - t0)`: the generator remembers the starting point (non-Markovian).
    #[default]
    Elapsed,
    /// `L(t)`: an ordinary time-dependent Markovian generator.
    Absolute,
}

/// A generator `L(tau)` with its known singular points and, for commuting
/// families, the exact integral `(tau1, tau2) -> int_{tau1}^{tau2} L`.
#[derive(Clone)]
pub struct TimeLocalGenerator {
    dim: usize,
    eval: GeneratorFn,
    singularities: Vec<f64>,
    exact_integral: Option<IntegralFn>,
    clock: Clock,
}

impl fmt::Debug for TimeLocalGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeLocalGenerator")
            .field("dim", &self.dim)
            .field("singularities", &self.singularities)
            .field("exact_integral", &self.exact_integral.is_some())
            .field("clock", &self.clock)
            .finish()
    }
}

impl TimeLocalGenerator {
    pub fn new(dim: usize, eval: impl Fn(f64) -> Result<Superoperator> + Send + Sync + 'static) -> Self {
        TimeLocalGenerator {
            dim,
            eval: Arc::new(eval),
            singularities: Vec::new(),
            exact_integral: None,
            clock: Clock::Elapsed,
        }
    }

    /// Constant (Markovian) generator with its trivial exact integral.
    pub fn constant(l: Superoperator) -> Self {
        let dim = l.dim();
        let for_eval = l.clone();
        TimeLocalGenerator::new(dim, move |_| Ok(for_eval.clone()))
            .with_exact_integral(move |a, b| Ok(l.scale_re(b - a)))
    }

    /// Piecewise-linear interpolation of a sampled generator, with time
    /// measured from the first grid point. Intervals touching a singular
    /// sample are reported as singularities.
    pub fn interpolated(traj: &GeneratorTrajectory) -> Result<Self> {
        let origin = traj.grid()[0];
        let grid: Vec<f64> = traj.grid().iter().map(|t| t - origin).collect();
        let gens: Vec<Option<Superoperator>> = traj.generators().to_vec();
        let dim = gens
            .iter()
            .flatten()
            .next()
            .map(Superoperator::dim)
            .ok_or_else(|| Error::InvalidGrid("every sample is singular".into()))?;
        let singularities = grid
            .iter()
            .zip(&gens)
            .filter(|(_, g)| g.is_none())
            .map(|(t, _)| *t)
            .collect();
        let eval = move |tau: f64| -> Result<Superoperator> {
            let last = grid.len() - 1;
            let hi = grid.partition_point(|&t| t < tau).clamp(1, last);
            let lo = hi - 1;
            match (&gens[lo], &gens[hi]) {
                (Some(a), Some(b)) => {
                    let w = ((tau - grid[lo]) / (grid[hi] - grid[lo])).clamp(0.0, 1.0);
                    a.scale_re(1.0 - w).add(&b.scale_re(w))
                }
                _ => Err(Error::SingularityUnresolvable { t: tau }),
            }
        };
        Ok(TimeLocalGenerator::new(dim, eval).with_singularities(singularities))
    }

    pub fn with_singularities(mut self, mut points: Vec<f64>) -> Self {
        points.sort_by(|a, b| a.total_cmp(b));
        self.singularities = points;
        self
    }

    pub fn with_exact_integral(mut self, f: impl Fn(f64, f64) -> Result<Superoperator> + Send + Sync + 'static) -> Self {
        self.exact_integral = Some(Arc::new(f));
        self
    }

    pub fn without_exact_integral(mut self) -> Self {
        self.exact_integral = None;
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn singularities(&self) -> &[f64] {
        &self.singularities
    }

    pub fn has_exact_integral(&self) -> bool {
        self.exact_integral.is_some()
    }

    pub fn eval(&self, tau: f64) -> Result<Superoperator> {
        let l = (self.eval)(tau)?;
        if !l.is_finite() {
            return Err(Error::NonFiniteGenerator { t: tau });
        }
        Ok(l)
    }

    pub fn exact_integral(&self, tau1: f64, tau2: f64) -> Option<Result<Superoperator>> {
        self.exact_integral.as_ref().map(|f| f(tau1, tau2))
    }

    /// Argument passed to the generator at absolute time `t` for a run started at `t0`.
    pub(crate) fn clock_time(&self, t: f64, t0: f64) -> f64 {
        match self.clock {
            Clock::Elapsed => t - t0,
            Clock::Absolute => t,
        }
    }
}

/// Step-size and singularity policy for [`propagate_local`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the output grid.
    pub output_step: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
    /// Use the exact integral of a commuting family when one is available.
    pub prefer_exact: bool,
    /// Width of the window cut out around each singularity; `None` disables excision.
    pub excision: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            output_step: 1e-2,
            h_init: None,
            h_min: 1e-12,
            max_steps: 50_000_000,
            prefer_exact: true,
            excision: Some(1e-6),
        }
    }
}

impl StepControl {
    pub fn with_output_step(mut self, h: f64) -> Self {
        self.output_step = h;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn numeric_only(mut self) -> Self {
        self.prefer_exact = false;
        self
    }

    pub fn with_excision(mut self, width: Option<f64>) -> Self {
        self.excision = width;
        self
    }
}

/// Uniform grid `t0, t0 + h, ...` ending exactly at `t1`.
pub fn uniform_grid(t0: f64, t1: f64, h: f64) -> Result<Vec<f64>> {
    if !(t1 > t0) {
        return Err(Error::InvalidInterval { t0, t1 });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::StepInvalid { h });
    }
    let n = ((t1 - t0) / h - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * h).collect();
    grid.push(t1);
    Ok(grid)
}
