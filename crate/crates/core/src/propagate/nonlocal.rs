use num_complex::Complex64;

use super::kernel::{MemoryKernel, RegularKernel};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::superop::Superoperator;
use crate::trajectory::MapTrajectory;

/// Default cap, in bytes, on the retained history of a Volterra run.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

const CORRECTOR_SWEEPS: usize = 2;

enum History {
    None,
    /// Per separable term: the sampled scalar `kappa(k h)` and the operator.
    Separable(Vec<(Vec<f64>, CMatrix)>),
    /// Sampled `K_reg(k h)`.
    General(Vec<CMatrix>),
}

/// Solves `dLambda/dt = int_{t0}^t K(t - u) Lambda(u) du` with
/// `Lambda(t0, t0) = 1` on the uniform grid `t0 + k h`.
///
/// `h` is adjusted so that an integer number of steps spans `[t0, t1]`.
pub fn propagate_nonlocal(kernel: &MemoryKernel, t0: f64, t1: f64, h: f64) -> Result<MapTrajectory> {
    propagate_nonlocal_with_budget(kernel, t0, t1, h, DEFAULT_MEMORY_BUDGET)
}

/// As [`propagate_nonlocal`] with an explicit history budget in bytes.
///
/// The delta part of the kernel contributes the instantaneous term
/// `c w L_delta Lambda(t)`, `w` being the kernel's delta weight; the regular
/// part is integrated with the trapezoidal rule over the full history. Each
/// step is an Euler predictor followed by two trapezoidal corrector sweeps.
pub fn propagate_nonlocal_with_budget(
    kernel: &MemoryKernel,
    t0: f64,
    t1: f64,
    h: f64,
    budget: usize,
) -> Result<MapTrajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::StepInvalid { h });
    }
    if !(t1 > t0) || !t1.is_finite() || !t0.is_finite() {
        return Err(Error::InvalidInterval { t0, t1 });
    }
    let steps = ((t1 - t0) / h).round().max(1.0);
    if steps > usize::MAX as f64 / 2.0 {
        return Err(Error::MemoryBudgetExceeded { required: usize::MAX, budget });
    }
    let steps = steps as usize;
    let h = (t1 - t0) / steps as f64;

    let dim = kernel.dim();
    linalg::check_dim_budget(dim)?;
    let n = dim * dim;
    let block = n * n * std::mem::size_of::<Complex64>();
    let stored = match kernel.regular() {
        RegularKernel::General(_) => 2,
        _ => 1,
    };
    let required = (steps + 1).saturating_mul(block).saturating_mul(stored);
    if required > budget {
        return Err(Error::MemoryBudgetExceeded { required, budget });
    }

    let lag = |k: usize| k as f64 * h;
    let history = match kernel.regular() {
        RegularKernel::Zero => History::None,
        RegularKernel::Separable(terms) => History::Separable(
            terms
                .iter()
                .map(|term| {
                    let samples = (0..=steps)
                        .map(|k| {
                            let v = (term.kappa)(lag(k));
                            if v.is_finite() {
                                Ok(v)
                            } else {
                                Err(Error::NonFiniteGenerator { t: lag(k) })
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((samples, term.op.matrix().clone()))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        RegularKernel::General(_) => History::General(
            (0..=steps)
                .map(|k| {
                    let m = kernel.regular_at(lag(k))?;
                    if !m.is_finite() {
                        return Err(Error::NonFiniteGenerator { t: lag(k) });
                    }
                    Ok(m.matrix().clone())
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };

    let instantaneous = kernel.instantaneous_generator().matrix().clone();
    let a = &instantaneous + kernel.regular_at(0.0)?.matrix() * c64(0.5 * h, 0.);

    let mut maps: Vec<CMatrix> = Vec::with_capacity(steps + 1);
    maps.push(linalg::identity(n));
    let mut derivative = &instantaneous * &maps[0];
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];

    for m in 1..=steps {
        // h [ K(m h) Lambda_0 / 2 + sum_{j=1}^{m-1} K((m - j) h) Lambda_j ]
        let hist = match &history {
            History::None => CMatrix::zeros(n, n),
            History::Separable(terms) => {
                let mut total = CMatrix::zeros(n, n);
                for (kappa, op) in terms {
                    acc.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
                    axpy(&mut acc, 0.5 * kappa[m], maps[0].as_slice());
                    for (j, lam) in maps.iter().enumerate().take(m).skip(1) {
                        axpy(&mut acc, kappa[m - j], lam.as_slice());
                    }
                    total += op * CMatrix::from_column_slice(n, n, &acc);
                }
                total * c64(h, 0.)
            }
            History::General(samples) => {
                let mut total = &samples[m] * &maps[0] * c64(0.5, 0.);
                for (j, lam) in maps.iter().enumerate().take(m).skip(1) {
                    total += &samples[m - j] * lam;
                }
                total * c64(h, 0.)
            }
        };

        let prev = &maps[m - 1];
        let mut next = prev + &derivative * c64(h, 0.);
        for _ in 0..CORRECTOR_SWEEPS {
            next = prev + (&derivative + &a * &next + &hist) * c64(0.5 * h, 0.);
        }
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteGenerator { t: t0 + lag(m) });
        }
        derivative = &a * &next + hist;
        maps.push(next);
    }

    let grid: Vec<f64> = (0..=steps).map(|k| if k == steps { t1 } else { t0 + lag(k) }).collect();
    let maps = maps
        .into_iter()
        .map(|m| Superoperator::from_matrix(dim, m))
        .collect::<Result<Vec<_>>>()?;
    MapTrajectory::new(t0, grid, maps)
}

fn axpy(acc: &mut [Complex64], w: f64, x: &[Complex64]) {
    if w == 0.0 {
        return;
    }
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b * w;
    }
}
