use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::superop::{self, DensityMatrix, StateDefects, Superoperator};
use crate::trajectory::MapTrajectory;

/// `rho(t) = Lambda(t, t0) rho0` along a trajectory, unrepaired, with the
/// density-matrix defects of every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrajectory {
    pub grid: Vec<f64>,
    #[serde(with = "crate::matrix_json::vec")]
    pub states: Vec<CMatrix>,
    pub defects: Vec<StateDefects>,
}

impl StateTrajectory {
    /// Indices whose state has an eigenvalue below `-psd_tol`.
    pub fn violations(&self, psd_tol: f64) -> Vec<usize> {
        self.defects
            .iter()
            .enumerate()
            .filter(|(_, d)| d.min_eigenvalue < -psd_tol)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn element(&self, i: usize, j: usize) -> Vec<num_complex::Complex64> {
        self.states.iter().map(|s| s[(i, j)]).collect()
    }
}

pub fn evolve_state(traj: &MapTrajectory, rho0: &DensityMatrix) -> Result<StateTrajectory> {
    if rho0.dim() != traj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for maps on dimension {}",
            rho0.dim(),
            traj.dim()
        )));
    }
    let states = traj
        .maps()
        .iter()
        .map(|m| superop::apply(m, rho0.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let defects = states.iter().map(StateDefects::of).collect();
    Ok(StateTrajectory {
        grid: traj.grid().to_vec(),
        states,
        defects,
    })
}

fn final_map(builder: &impl Fn(f64, f64) -> Result<MapTrajectory>, from: f64, to: f64, dim: Option<usize>) -> Result<Superoperator> {
    if to == from {
        let dim = dim.ok_or(Error::InvalidInterval { t0: from, t1: to })?;
        return Ok(Superoperator::identity(dim));
    }
    let traj = builder(from, to)?;
    let end = *traj.grid().last().expect("non-empty");
    if (end - to).abs() > 1e-9 * to.abs().max(1.0) {
        return Err(Error::InvalidGrid(format!("trajectory ends at {end} instead of {to}")));
    }
    Ok(traj.last().clone())
}

/// `||Lambda(t, t0) - Lambda(t, s) Lambda(s, t0)||_F`, each factor obtained by
/// running `builder(start, end)` from its own starting point.
pub fn composition_defect(
    builder: impl Fn(f64, f64) -> Result<MapTrajectory>,
    t: f64,
    s: f64,
    t0: f64,
) -> Result<f64> {
    if !(t >= s && s >= t0 && t > t0) {
        return Err(Error::InvalidInterval { t0, t1: t });
    }
    let whole = final_map(&builder, t0, t, None)?;
    let dim = Some(whole.dim());
    let first = final_map(&builder, t0, s, dim)?;
    let second = final_map(&builder, s, t, dim)?;
    Ok(whole.distance(&superop::compose(&second, &first)?))
}

/// Sup over shared elapsed times of `||shifted - base||_F`.
pub fn trajectory_shift_defect(base: &MapTrajectory, shifted: &MapTrajectory) -> Result<f64> {
    base.sup_distance(shifted)
        .ok_or_else(|| Error::InvalidGrid("trajectories share no elapsed time".into()))
}

/// Compares `Lambda(t, t0)` with `Lambda(t + shift, t0 + shift)` over `[t0, t1]`.
pub fn homogeneity_defect(
    builder: impl Fn(f64, f64) -> Result<MapTrajectory>,
    t0: f64,
    t1: f64,
    shift: f64,
) -> Result<f64> {
    let base = builder(t0, t1)?;
    let shifted = builder(t0 + shift, t1 + shift)?;
    trajectory_shift_defect(&base, &shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, sigma_minus, sigma_x, sigma_z};
    use crate::propagate::{propagate_local, Clock, StepControl, TimeLocalGenerator};
    use crate::superop::{lindblad_superop, LindbladSpec};

    fn dephasing() -> Superoperator {
        lindblad_superop(&LindbladSpec::dissipative(2, vec![sigma_z()]).unwrap())
    }

    #[test]
    fn identity_trajectory_keeps_state() {
        let id = Superoperator::identity(2);
        let traj = MapTrajectory::new(0.0, vec![0.0, 1.0], vec![id.clone(), id]).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let out = evolve_state(&traj, &rho).unwrap();
        assert!(out.states.iter().all(|s| s == rho.matrix()));
        assert!(out.violations(1e-10).is_empty());
        assert!(evolve_state(&traj, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn markovian_composition_holds() {
        let l = lindblad_superop(
            &LindbladSpec::new(sigma_x() * c64(0.5, 0.), vec![sigma_minus(), sigma_z() * c64(0.2, 0.)]).unwrap(),
        );
        let gen = TimeLocalGenerator::constant(l);
        let builder = |a, b| propagate_local(&gen, a, b, &StepControl::default().with_output_step(0.5));
        assert!(composition_defect(builder, 2.0, 1.2, 0.3).unwrap() < 1e-8);
    }

    #[test]
    fn time_dependent_markovian_composition_holds_but_not_homogeneous() {
        let l0 = dephasing();
        let gen = TimeLocalGenerator::new(2, move |t| Ok(l0.scale_re(0.2 + 0.1 * t)))
            .with_clock(Clock::Absolute);
        let ctrl = StepControl::default().with_output_step(0.25).with_tolerances(1e-12, 1e-14);
        let builder = |a, b| propagate_local(&gen, a, b, &ctrl);
        assert!(composition_defect(builder, 2.0, 1.0, 0.0).unwrap() < 1e-8);

        // Coherence exp(-2 int f); shifting by 0.7 changes the integral by 0.07 tau.
        let defect = homogeneity_defect(builder, 0.0, 1.0, 0.7).unwrap();
        let oracle = (0..=4)
            .map(|k| {
                let tau = 0.25 * k as f64;
                let base = (-2.0 * (0.2 * tau + 0.05 * tau * tau)).exp();
                let shifted = (-2.0 * (0.2 * tau + 0.05 * ((tau + 0.7).powi(2) - 0.49))).exp();
                // Two coherence entries of the superoperator differ.
                (2.0f64).sqrt() * (base - shifted).abs()
            })
            .fold(0.0, f64::max);
        assert!((defect - oracle).abs() < 1e-8, "{defect} vs {oracle}");
        assert!(defect > 1e-2);
    }

    #[test]
    fn composition_rejects_bad_ordering() {
        let gen = TimeLocalGenerator::constant(dephasing());
        let builder = |a, b| propagate_local(&gen, a, b, &StepControl::default());
        assert!(composition_defect(builder, 1.0, 2.0, 0.0).is_err());
    }
}
