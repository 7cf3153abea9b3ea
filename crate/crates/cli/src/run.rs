use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nonmarkov::linalg::{self, CMatrix};
use nonmarkov::matrix_json;
use nonmarkov::models::concurrence;
use nonmarkov::propagate::{
    composition_defect, evolve_state, homogeneity_defect, propagate_local, propagate_local_on, propagate_nonlocal, StepControl,
};
use nonmarkov::spectra::INVERTIBILITY_TOL;
use nonmarkov::superop::{choi_of, trace_defect, DensityMatrix};
use nonmarkov::trajectory::MapTrajectory;
use serde::{Deserialize, Serialize};

use crate::config::{Format, Observable, RunConfig, Solver};
use crate::error::{invalid, CliError, CliResult};
use crate::output::{self, ObservableColumns};
use crate::scenario::{self, Scenario};

/// Composition defects at or below this are reported as Markovian-consistent.
pub const MARKOVIAN_CONSISTENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionEntry {
    pub t: f64,
    pub s: f64,
    pub t0: f64,
    pub defect: f64,
    pub markovian_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityEntry {
    pub shift: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub points: usize,
    pub max_tp_drift: f64,
    pub min_choi_eigenvalue: f64,
    pub singular_points: Vec<f64>,
    pub composition: Vec<CompositionEntry>,
    pub homogeneity: Option<HomogeneityEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSolver {
    pub first: Solver,
    pub second: Solver,
    pub sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub dim: usize,
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    pub solvers: BTreeMap<Solver, SolverDiagnostics>,
    pub cross_solver: Vec<CrossSolver>,
    pub warnings: Vec<String>,
}

pub struct RunOutput {
    pub report: DiagnosticsReport,
    pub trajectories: BTreeMap<Solver, MapTrajectory>,
    pub files: Vec<PathBuf>,
}

/// Common grid of all solvers: `N = round((t1 - t0) / step)` equal steps.
fn common_grid(t0: f64, t1: f64, step: f64) -> (Vec<f64>, f64) {
    let n = ((t1 - t0) / step).round().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * h).collect();
    grid.push(t1);
    (grid, h)
}

struct Runner<'a> {
    scenario: &'a Scenario,
    ctrl: StepControl,
    h: f64,
}

impl Runner<'_> {
    fn on_grid(&self, solver: Solver, t0: f64, grid: &[f64]) -> nonmarkov::Result<MapTrajectory> {
        let s = self.scenario;
        match solver {
            Solver::Local => propagate_local_on(s.generator.as_ref().expect("checked"), t0, grid, &self.ctrl),
            Solver::Nonlocal => propagate_nonlocal(s.kernel.as_ref().expect("checked"), t0, *grid.last().expect("non-empty"), self.h),
            Solver::Analytic => {
                let f = s.analytic.as_ref().expect("checked");
                let taus: Vec<f64> = grid.iter().map(|t| t - t0).collect();
                MapTrajectory::from_fn(t0, &taus, |tau| f(t0 + tau, t0))
            }
        }
    }

    fn between(&self, solver: Solver, from: f64, to: f64) -> nonmarkov::Result<MapTrajectory> {
        match solver {
            Solver::Local => propagate_local(self.scenario.generator.as_ref().expect("checked"), from, to, &self.ctrl),
            _ => self.on_grid(solver, from, &common_grid(from, to, self.h).0),
        }
    }
}

fn singular_points(scenario: &Scenario, solver: Solver, traj: &MapTrajectory) -> Vec<f64> {
    match (solver, &scenario.generator) {
        (Solver::Local, Some(g)) => {
            let span = traj.grid().last().expect("non-empty") - traj.t0();
            g.singularities().iter().filter(|&&s| s > 0.0 && s <= span).map(|s| traj.t0() + s).collect()
        }
        _ => traj
            .grid()
            .iter()
            .zip(traj.maps())
            .filter(|(_, m)| linalg::min_abs_eigenvalue(m.matrix()) <= INVERTIBILITY_TOL)
            .map(|(t, _)| *t)
            .collect(),
    }
}

fn initial_state(config: &RunConfig, scenario: &Scenario) -> CliResult<DensityMatrix> {
    let rho = match &config.initial_state {
        Some(rows) => DensityMatrix::new(matrix_json::from_rows(rows).map_err(CliError::Validation)?).map_err(invalid)?,
        None => scenario.default_state.clone(),
    };
    if rho.dim() != scenario.dim {
        return Err(CliError::Validation(format!(
            "initial state has dimension {} but {} acts on dimension {}",
            rho.dim(),
            config.scenario.name(),
            scenario.dim
        )));
    }
    Ok(rho)
}

fn observable_columns(config: &RunConfig, traj: &MapTrajectory, rho0: &DensityMatrix) -> CliResult<Option<ObservableColumns>> {
    let per_row: Vec<&Observable> = config
        .observables
        .iter()
        .filter(|o| !matches!(o, Observable::CompositionDefect { .. }))
        .collect();
    if per_row.is_empty() {
        return Ok(None);
    }
    let d = traj.dim();
    let states = evolve_state(traj, rho0).map_err(CliError::Solver)?;
    let mut names = Vec::new();
    for obs in &per_row {
        match obs {
            Observable::Coherences => {
                for i in 0..d {
                    for j in i + 1..d {
                        names.push(format!("rho_{i}{j}.re"));
                        names.push(format!("rho_{i}{j}.im"));
                    }
                }
            }
            Observable::Populations => names.extend((0..d).map(|i| format!("rho_{i}{i}"))),
            Observable::Concurrence => names.push("concurrence".into()),
            Observable::CpWitness => names.push("min_choi_eigenvalue".into()),
            Observable::TpWitness => names.push("tp_drift".into()),
            Observable::CompositionDefect { .. } => unreachable!(),
        }
    }
    let mut rows = Vec::with_capacity(traj.len());
    for (map, state) in traj.maps().iter().zip(&states.states) {
        let mut row = Vec::with_capacity(names.len());
        for obs in &per_row {
            match obs {
                Observable::Coherences => {
                    for i in 0..d {
                        for j in i + 1..d {
                            row.push(state[(i, j)].re);
                            row.push(state[(i, j)].im);
                        }
                    }
                }
                Observable::Populations => row.extend((0..d).map(|i| state[(i, i)].re)),
                Observable::Concurrence => row.push(state_concurrence(state)?),
                Observable::CpWitness => row.push(linalg::min_hermitian_eigenvalue(&choi_of(map))),
                Observable::TpWitness => row.push(trace_defect(map, 0.0)),
                Observable::CompositionDefect { .. } => unreachable!(),
            }
        }
        rows.push(row);
    }
    Ok(Some(ObservableColumns { names, rows }))
}

/// Concurrence of a propagated state; tiny negative eigenvalues from the
/// solver are clipped by projecting onto a valid density matrix first.
fn state_concurrence(state: &CMatrix) -> CliResult<f64> {
    let hermitian = (state + state.adjoint()) * nonmarkov::linalg::c64(0.5, 0.);
    let (ev, u) = linalg::hermitian_eigen(&hermitian);
    let clipped: Vec<f64> = ev.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let diag = CMatrix::from_diagonal(&nonmarkov::linalg::CVector::from_iterator(
        clipped.len(),
        clipped.iter().map(|v| nonmarkov::linalg::c64(v / total, 0.)),
    ));
    let rho = DensityMatrix::new(&u * diag * u.adjoint()).map_err(CliError::Solver)?;
    concurrence(&rho).map_err(CliError::Solver)
}

/// Runs every requested solver, writes trajectories and the report into `out`.
pub fn run(config: &RunConfig, out: Option<&Path>) -> CliResult<RunOutput> {
    config.validate()?;
    let span = config.t1 - config.t0;
    let scenario = scenario::build(config.scenario, &config.parameters, span)?;
    let solvers = config.dedup_solvers();
    for &s in &solvers {
        scenario.supports(s)?;
    }
    if config.observables.contains(&Observable::Concurrence) && scenario.dim != 4 {
        return Err(CliError::Validation(format!(
            "concurrence needs a two-qubit scenario, {} has dimension {}",
            config.scenario.name(),
            scenario.dim
        )));
    }
    let rho0 = initial_state(config, &scenario)?;

    let mut warnings = Vec::new();
    let (grid, h) = common_grid(config.t0, config.t1, config.step());
    if (h - config.step()).abs() > 1e-12 * config.step() {
        warnings.push(format!("step adjusted from {} to {h} to divide [t0, t1] evenly", config.step()));
    }
    let mut ctrl = StepControl::default().with_output_step(h);
    if let Some(tol) = config.tolerance {
        ctrl = ctrl.with_tolerances(tol.rtol, tol.atol);
    }
    let runner = Runner {
        scenario: &scenario,
        ctrl,
        h,
    };

    let mut trajectories = BTreeMap::new();
    let mut diagnostics = BTreeMap::new();
    for &solver in &solvers {
        let traj = runner.on_grid(solver, config.t0, &grid).map_err(CliError::Solver)?;
        let mut composition = Vec::new();
        for obs in &config.observables {
            if let Observable::CompositionDefect { t, s, t0 } = *obs {
                let defect = composition_defect(|a, b| runner.between(solver, a, b), t, s, t0).map_err(CliError::Solver)?;
                composition.push(CompositionEntry {
                    t,
                    s,
                    t0,
                    defect,
                    markovian_consistent: defect <= MARKOVIAN_CONSISTENT_TOL,
                });
            }
        }
        let homogeneity = match config.homogeneity_shift {
            Some(shift) => Some(HomogeneityEntry {
                shift,
                defect: homogeneity_defect(|a, b| runner.between(solver, a, b), config.t0, config.t1, shift)
                    .map_err(CliError::Solver)?,
            }),
            None => None,
        };
        diagnostics.insert(
            solver,
            SolverDiagnostics {
                points: traj.len(),
                max_tp_drift: traj.max_tp_drift(),
                min_choi_eigenvalue: traj.min_choi_eigenvalue(),
                singular_points: singular_points(&scenario, solver, &traj),
                composition,
                homogeneity,
            },
        );
        trajectories.insert(solver, traj);
    }

    let mut cross_solver = Vec::new();
    for (i, a) in solvers.iter().enumerate() {
        for b in &solvers[i + 1..] {
            let d = trajectories[a]
                .sup_distance(&trajectories[b])
                .expect("solvers share the grid");
            cross_solver.push(CrossSolver {
                first: *a,
                second: *b,
                sup_distance: d,
            });
        }
    }

    let report = DiagnosticsReport {
        scenario: config.scenario.name().into(),
        dim: scenario.dim,
        t0: config.t0,
        t1: config.t1,
        step: h,
        solvers: diagnostics,
        cross_solver,
        warnings,
    };

    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut files = Vec::new();
    let stem = config.scenario.name();
    for (solver, traj) in &trajectories {
        for format in &config.output.formats {
            match format {
                Format::Csv => {
                    let path = dir.join(format!("{stem}_{}.csv", solver.name()));
                    let extra = observable_columns(config, traj, &rho0)?;
                    output::write_atomic(&path, output::map_trajectory_csv(traj, extra.as_ref()).as_bytes())?;
                    files.push(path);
                }
                Format::Json => {
                    let path = dir.join(format!("{stem}_{}.json", solver.name()));
                    output::write_json(&path, traj)?;
                    files.push(path);
                }
            }
        }
    }
    let path = dir.join(format!("{stem}_report.json"));
    output::write_json(&path, &report)?;
    files.push(path);
    Ok(RunOutput {
        report,
        trajectories,
        files,
    })
}
