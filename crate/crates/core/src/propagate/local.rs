use super::{uniform_grid, StepControl, TimeLocalGenerator};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};
use crate::superop::Superoperator;
use crate::trajectory::MapTrajectory;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    gen: &'a TimeLocalGenerator,
    t0: f64,
    ctrl: &'a StepControl,
    h: f64,
    steps: usize,
    // First stage of the next step (first-same-as-last), valid at `fsal_t`.
    fsal: Option<(f64, CMatrix)>,
}

impl<'a> Stepper<'a> {
    fn rhs(&self, t: f64, y: &CMatrix) -> Result<CMatrix> {
        let l = self.gen.eval(self.gen.clock_time(t, self.t0))?;
        Ok(l.matrix() * y)
    }

    fn error_norm(&self, y: &CMatrix, y_new: &CMatrix, err: &CMatrix) -> f64 {
        let sum: f64 = err
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| {
                let sc = self.ctrl.atol + self.ctrl.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (sum / err.len() as f64).sqrt()
    }

    /// Advances `y` from `ta` to exactly `tb`.
    fn integrate(&mut self, y: &mut CMatrix, ta: f64, tb: f64) -> Result<()> {
        let mut t = ta;
        while t < tb {
            let remaining = tb - t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h < self.ctrl.h_min && !last {
                return Err(Error::StepUnderflow { t, h });
            }
            self.steps += 1;
            if self.steps > self.ctrl.max_steps {
                return Err(Error::StepUnderflow { t, h });
            }

            let mut k: Vec<CMatrix> = Vec::with_capacity(7);
            match self.fsal.take() {
                Some((ft, k1)) if ft == t => k.push(k1),
                _ => k.push(self.rhs(t, y)?),
            }
            for s in 1..7 {
                let mut stage = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    if A[s][j] != 0.0 {
                        stage += kj * c64(h * A[s][j], 0.);
                    }
                }
                let ks = self.rhs(t + C[s] * h, &stage)?;
                if s == 6 {
                    // Stage 7 is evaluated at the fifth-order solution.
                    let mut err = CMatrix::zeros(y.nrows(), y.ncols());
                    for (j, kj) in k.iter().chain(std::iter::once(&ks)).enumerate() {
                        if E[j] != 0.0 {
                            err += kj * c64(h * E[j], 0.);
                        }
                    }
                    let norm = self.error_norm(y, &stage, &err);
                    let factor = if norm == 0.0 {
                        5.0
                    } else if norm.is_finite() {
                        (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                    } else {
                        0.2
                    };
                    if norm <= 1.0 && stage.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                        t = if last { tb } else { t + h };
                        *y = stage;
                        self.fsal = Some((t, ks));
                        if !last || factor < 1.0 {
                            self.h = h * factor;
                        }
                    } else {
                        self.h = h * factor.min(1.0);
                        if self.h < self.ctrl.h_min {
                            return Err(Error::StepUnderflow { t, h: self.h });
                        }
                    }
                    break;
                }
                k.push(ks);
            }
        }
        Ok(())
    }
}

/// Solves `dLambda/dt = L(.) Lambda`, `Lambda(t0, t0) = 1`, on a uniform
/// output grid of spacing `ctrl.output_step`.
pub fn propagate_local(gen: &TimeLocalGenerator, t0: f64, t1: f64, ctrl: &StepControl) -> Result<MapTrajectory> {
    let grid = uniform_grid(t0, t1, ctrl.output_step)?;
    propagate_local_on(gen, t0, &grid, ctrl)
}

/// As [`propagate_local`] on an explicit output grid starting at `t0`.
///
/// With an exact integral available (a commuting family) each output map is
/// `exp(int_{t0}^{t} L)` evaluated directly, which passes through singular
/// points of the generator. Otherwise an embedded Runge-Kutta 5(4) scheme
/// integrates between output points; a window of width `ctrl.excision`
/// around each singularity is bridged with a first-order Taylor step of the
/// (regular) map.
pub fn propagate_local_on(gen: &TimeLocalGenerator, t0: f64, grid: &[f64], ctrl: &StepControl) -> Result<MapTrajectory> {
    crate::trajectory::check_grid(grid)?;
    let t1 = *grid.last().expect("non-empty grid");
    if !(t1 > t0) {
        return Err(Error::InvalidInterval { t0, t1 });
    }
    if (grid[0] - t0).abs() > 1e-12 * t0.abs().max(1.0) {
        return Err(Error::InvalidGrid(format!("output grid starts at {} instead of t0 = {t0}", grid[0])));
    }
    let dim = gen.dim();

    if ctrl.prefer_exact && gen.has_exact_integral() {
        let start = gen.clock_time(t0, t0);
        let maps = grid
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                if k == 0 {
                    return Ok(Superoperator::identity(dim));
                }
                let integral = gen.exact_integral(start, gen.clock_time(t, t0)).expect("checked above")?;
                if !integral.is_finite() {
                    return Err(Error::NonFiniteGenerator { t });
                }
                Ok(integral.exp_scaled(1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        return MapTrajectory::new(t0, grid.to_vec(), maps);
    }

    // Singular points in absolute time inside (t0, t1].
    let singular: Vec<f64> = gen
        .singularities()
        .iter()
        .map(|&s| match gen.clock() {
            super::Clock::Elapsed => t0 + s,
            super::Clock::Absolute => s,
        })
        .filter(|&s| s > t0 && s <= t1)
        .collect();
    let width = match (singular.first(), ctrl.excision) {
        (Some(&s), None) => return Err(Error::SingularityUnresolvable { t: s }),
        (_, Some(w)) => w,
        (None, None) => 0.0,
    };
    if !singular.is_empty() && !(width > 0.0) {
        return Err(Error::SingularityUnresolvable { t: singular[0] });
    }

    let span = t1 - t0;
    let mut stepper = Stepper {
        gen,
        t0,
        ctrl,
        h: ctrl.h_init.unwrap_or_else(|| (ctrl.output_step.min(span) * 0.1).max(ctrl.h_min * 10.0)),
        steps: 0,
        fsal: None,
    };

    let mut y = linalg::identity(dim * dim);
    let mut t = t0;
    let mut maps = vec![Superoperator::identity(dim)];
    let mut windows = singular.iter().map(|&s| (s - 0.5 * width, s + 0.5 * width)).peekable();

    for &target in &grid[1..] {
        loop {
            match windows.peek().copied() {
                Some((lo, hi)) if lo < target => {
                    // Integrate up to the window, bridge it, and emit any output
                    // points inside it by linear interpolation.
                    if t < lo {
                        stepper.integrate(&mut y, t, lo)?;
                        t = lo;
                    }
                    if t < hi {
                        let before = y.clone();
                        let tl = t;
                        let slope = stepper.rhs(tl, &before)?;
                        let after = &before + &slope * c64(hi - tl, 0.);
                        if target <= hi {
                            let w = (target - tl) / (hi - tl);
                            let interp = &before * c64(1.0 - w, 0.) + &after * c64(w, 0.);
                            maps.push(Superoperator::from_matrix(dim, interp)?);
                            // Keep the pre-window state until the window is passed.
                            if target == hi {
                                y = after;
                                t = hi;
                                stepper.fsal = None;
                                windows.next();
                            }
                            break;
                        }
                        y = after;
                        t = hi;
                        stepper.fsal = None;
                    }
                    windows.next();
                }
                _ => {
                    stepper.integrate(&mut y, t, target)?;
                    t = target;
                    maps.push(Superoperator::from_matrix(dim, y.clone())?);
                    break;
                }
            }
        }
    }
    MapTrajectory::new(t0, grid.to_vec(), maps)
}
