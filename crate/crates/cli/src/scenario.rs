//! The bundled scenarios and their parameter schemas.
//!
//! | scenario | parameters | solvers |
//! |---|---|---|
//! | `semi_markov` | `waiting` (family tag + parameters or table), `omega` | all; nonlocal needs the exponential family |
//! | `xstate_dephasing` | `epsilon`, `gamma`, `state` | all |
//! | `pure_decoherence` | a full model, or `{}` for the default qubit reservoir | local, analytic |
//! | `tan_dephasing` | none | all |
//! | `dilation` | `coupling`, `decay` | analytic |

use std::sync::Arc;

use nonmarkov::kernels::{alpha_from_f, build_scaled_generator, kappa_from_f_exponential, semi_markov_map, WaitingTimeFunction};
use nonmarkov::linalg::{c64, CMatrix};
use nonmarkov::matrix_json;
use nonmarkov::models::{
    diagonal_projection, projection_channel, tan_dephasing_model, xstate_dephasing_map, DilationModel, PureDecoherenceModel, XState,
};
use nonmarkov::propagate::{MemoryKernel, TimeLocalGenerator};
use nonmarkov::superop::{DensityMatrix, Superoperator};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioKind, Solver};
use crate::error::{invalid, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaitingSpec {
    Exponential { epsilon: f64, gamma: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl WaitingSpec {
    pub fn build(&self) -> CliResult<WaitingTimeFunction> {
        match self {
            WaitingSpec::Exponential { epsilon, gamma } => WaitingTimeFunction::exponential(*epsilon, *gamma).map_err(invalid),
            WaitingSpec::Tabulated { times, values } => WaitingTimeFunction::tabulated(times, values).map_err(invalid),
        }
    }
}

fn default_waiting() -> WaitingSpec {
    WaitingSpec::Exponential { epsilon: 0.5, gamma: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiMarkovParams {
    #[serde(default = "default_waiting")]
    pub waiting: WaitingSpec,
    /// Target state of the projection `rho -> omega Tr rho`; defaults to `I/2`.
    #[serde(default)]
    pub omega: Option<Vec<Vec<[f64; 2]>>>,
}

fn default_xstate() -> XState {
    XState::new([0.01, 0.49, 0.49, 0.01], c64(0., 0.), c64(0.48, 0.)).expect("valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XStateParams {
    pub epsilon: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_xstate")]
    pub state: XState,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationParams {
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "half")]
    pub decay: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}

type AnalyticFn = Arc<dyn Fn(f64, f64) -> nonmarkov::Result<Superoperator> + Send + Sync>;

/// Everything the runner needs: a generator, a kernel and a closed form, each
/// optional. `analytic(t, t0)` returns `Lambda(t, t0)`.
#[derive(Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub dim: usize,
    pub generator: Option<TimeLocalGenerator>,
    pub kernel: Option<MemoryKernel>,
    pub analytic: Option<AnalyticFn>,
    pub default_state: DensityMatrix,
    /// Why a solver is unavailable, for error messages.
    pub unavailable: Vec<(Solver, &'static str)>,
}

impl Scenario {
    pub fn supports(&self, solver: Solver) -> CliResult<()> {
        let present = match solver {
            Solver::Local => self.generator.is_some(),
            Solver::Nonlocal => self.kernel.is_some(),
            Solver::Analytic => self.analytic.is_some(),
        };
        if present {
            return Ok(());
        }
        let why = self
            .unavailable
            .iter()
            .find(|(s, _)| *s == solver)
            .map_or("not implemented for this scenario", |(_, w)| w);
        Err(CliError::Validation(format!("solver {} unavailable for {}: {why}", solver.name(), self.kind.name())))
    }
}

fn params<T: DeserializeOwned>(kind: ScenarioKind, value: &serde_json::Value) -> CliResult<T> {
    let value = if value.is_null() { serde_json::json!({}) } else { value.clone() };
    serde_json::from_value(value).map_err(|e| CliError::Validation(format!("{} parameters: {e}", kind.name())))
}

fn homogeneous(f: impl Fn(f64) -> nonmarkov::Result<Superoperator> + Send + Sync + 'static) -> AnalyticFn {
    Arc::new(move |t, t0| f(t - t0))
}

fn plus_state() -> DensityMatrix {
    DensityMatrix::new(CMatrix::from_element(2, 2, c64(0.5, 0.))).expect("valid")
}

/// Builds a scenario whose generators cover elapsed times up to `horizon`.
pub fn build(kind: ScenarioKind, parameters: &serde_json::Value, horizon: f64) -> CliResult<Scenario> {
    match kind {
        ScenarioKind::SemiMarkov => {
            let p: SemiMarkovParams = params(kind, parameters)?;
            let omega = match &p.omega {
                Some(rows) => DensityMatrix::new(matrix_json::from_rows(rows).map_err(CliError::Validation)?).map_err(invalid)?,
                None => DensityMatrix::maximally_mixed(2),
            };
            let dim = omega.dim();
            let projection = projection_channel(&omega);
            semi_markov_family(kind, &p.waiting, projection, dim, plus_or_mixed(dim), horizon)
        }
        ScenarioKind::XstateDephasing => {
            let p: XStateParams = params(kind, parameters)?;
            let waiting = WaitingSpec::Exponential {
                epsilon: p.epsilon,
                gamma: p.gamma,
            };
            let mut s = semi_markov_family(kind, &waiting, diagonal_projection(4), 4, p.state.to_density_matrix(), horizon)?;
            let w = waiting.build()?;
            s.analytic = Some(homogeneous(move |tau| Ok(xstate_dephasing_map(w.cumulative(tau)))));
            Ok(s)
        }
        ScenarioKind::PureDecoherence => {
            let empty = parameters.is_null() || parameters.as_object().is_some_and(|o| o.is_empty());
            let model = if empty {
                PureDecoherenceModel::qubit_default()
            } else {
                let m: PureDecoherenceModel = params(kind, parameters)?;
                PureDecoherenceModel::new(
                    m.energies().to_vec(),
                    m.reservoir_hamiltonian().clone(),
                    m.couplings().to_vec(),
                    m.reservoir_state().clone(),
                )
                .map_err(invalid)?
            };
            let dim = model.system_dim();
            let m2 = model.clone();
            Ok(Scenario {
                kind,
                dim,
                generator: Some(model.time_local_generator()),
                kernel: None,
                analytic: Some(homogeneous(move |tau| Ok(m2.map(tau)))),
                default_state: plus_or_mixed(dim),
                unavailable: vec![(Solver::Nonlocal, "no closed-form memory kernel for pure decoherence")],
            })
        }
        ScenarioKind::TanDephasing => {
            let _: NoParams = params(kind, parameters)?;
            let model = tan_dephasing_model(horizon).map_err(invalid)?;
            let m2 = model.clone();
            Ok(Scenario {
                kind,
                dim: 2,
                generator: Some(model.generator),
                kernel: Some(model.kernel),
                analytic: Some(homogeneous(move |tau| Ok(m2.analytic_map(tau)))),
                default_state: plus_state(),
                unavailable: vec![],
            })
        }
        ScenarioKind::Dilation => {
            let p: DilationParams = params(kind, parameters)?;
            let model = DilationModel::coupled_qubits(p.coupling, p.decay).map_err(invalid)?;
            Ok(Scenario {
                kind,
                dim: 2,
                generator: None,
                kernel: None,
                analytic: Some(Arc::new(move |t, t0| model.reduce(t, t0))),
                default_state: DensityMatrix::pure(&nonmarkov::linalg::CVector::from_vec(vec![c64(1., 0.), c64(0., 0.)]))
                    .expect("valid"),
                unavailable: vec![
                    (Solver::Local, "reduced dilation dynamics has no bundled time-local generator"),
                    (Solver::Nonlocal, "reduced dilation dynamics has no bundled memory kernel"),
                ],
            })
        }
    }
}

fn plus_or_mixed(dim: usize) -> DensityMatrix {
    if dim == 2 {
        plus_state()
    } else {
        DensityMatrix::new(CMatrix::from_element(dim, dim, c64(1.0 / dim as f64, 0.))).expect("valid")
    }
}

fn semi_markov_family(
    kind: ScenarioKind,
    waiting: &WaitingSpec,
    projection: Superoperator,
    dim: usize,
    default_state: DensityMatrix,
    horizon: f64,
) -> CliResult<Scenario> {
    let w = waiting.build()?;
    w.validate(horizon).map_err(invalid)?;
    let base = projection
        .sub(&Superoperator::identity(dim))
        .expect("same dimension");
    let generator = build_scaled_generator(&alpha_from_f(&w, horizon).map_err(invalid)?, &base, horizon).map_err(invalid)?;
    let (kernel, unavailable) = match *waiting {
        WaitingSpec::Exponential { epsilon, gamma } => {
            let k = kappa_from_f_exponential(epsilon, gamma).map_err(invalid)?;
            (Some(k.to_memory_kernel(&base).map_err(invalid)?), vec![])
        }
        WaitingSpec::Tabulated { .. } => (None, vec![(Solver::Nonlocal, "memory kernel only in closed form for the exponential family")]),
    };
    let w2 = w.clone();
    Ok(Scenario {
        kind,
        dim,
        generator: Some(generator),
        kernel,
        analytic: Some(homogeneous(move |tau| semi_markov_map(&w2, &projection, tau))),
        default_state,
        unavailable,
    })
}
