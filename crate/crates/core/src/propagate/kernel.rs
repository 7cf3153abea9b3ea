use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superop::Superoperator;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Weight given to a delta function sitting at the end point `u = t` of the
/// memory integral `int_{t0}^t delta(t - u) Lambda(u) du`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaConvention {
    /// Weight 1: the delta lies entirely inside the integration range. This
    /// is the convention of the one-sided Laplace transform, so kernels
    /// obtained by inverting `kappa(s)` use it.
    Full,
    /// Weight 1/2: a symmetric delta cut in half by the end point. Under this
    /// convention the Markovian generator `L` corresponds to `K = 2 delta L`.
    Half,
}

impl DeltaConvention {
    pub fn weight(self) -> f64 {
        match self {
            DeltaConvention::Full => 1.0,
            DeltaConvention::Half => 0.5,
        }
    }
}

/// One separable term `kappa(t) * op` of a regular kernel.
#[derive(Clone)]
pub struct KernelTerm {
    pub kappa: ScalarFn,
    pub op: Superoperator,
}

/// The regular (non-distributional) part of a memory kernel.
#[derive(Clone)]
pub enum RegularKernel {
    Zero,
    /// `sum_r kappa_r(t) op_r`; the history sum then reduces to scalar sums.
    Separable(Vec<KernelTerm>),
    General(Arc<dyn Fn(f64) -> Result<Superoperator> + Send + Sync>),
}

/// `K(t) = c delta(t) L_delta + K_reg(t)`.
#[derive(Clone)]
pub struct MemoryKernel {
    dim: usize,
    delta_coeff: f64,
    delta_op: Superoperator,
    convention: DeltaConvention,
    regular: RegularKernel,
}

impl fmt::Debug for MemoryKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let regular = match &self.regular {
            RegularKernel::Zero => "zero".to_string(),
            RegularKernel::Separable(t) => format!("{} separable terms", t.len()),
            RegularKernel::General(_) => "general".to_string(),
        };
        f.debug_struct("MemoryKernel")
            .field("dim", &self.dim)
            .field("delta_coeff", &self.delta_coeff)
            .field("convention", &self.convention)
            .field("regular", &regular)
            .finish()
    }
}

impl MemoryKernel {
    pub fn zero(dim: usize) -> Self {
        MemoryKernel {
            dim,
            delta_coeff: 0.0,
            delta_op: Superoperator::zero(dim),
            convention: DeltaConvention::Full,
            regular: RegularKernel::Zero,
        }
    }

    /// `K = 2 delta(t) L` with the symmetric delta: reproduces the semigroup `exp(t L)`.
    pub fn markovian(l: Superoperator) -> Self {
        let dim = l.dim();
        MemoryKernel::zero(dim)
            .with_delta(2.0, l, DeltaConvention::Half)
            .expect("dimensions agree")
    }

    /// Time-independent kernel `K(t) = op` for `t >= 0`.
    pub fn constant(op: Superoperator) -> Self {
        let dim = op.dim();
        MemoryKernel::zero(dim).with_term(Arc::new(|_| 1.0), op).expect("dimensions agree")
    }

    pub fn with_delta(mut self, coeff: f64, op: Superoperator, convention: DeltaConvention) -> Result<Self> {
        if !(coeff >= 0.0) || !coeff.is_finite() {
            return Err(Error::ParameterDomain(format!("delta coefficient must be finite and >= 0, got {coeff}")));
        }
        self.check_dim(&op)?;
        self.delta_coeff = coeff;
        self.delta_op = op;
        self.convention = convention;
        Ok(self)
    }

    /// Adds a separable term `kappa(t) op`. Fails on a general regular part.
    pub fn with_term(mut self, kappa: ScalarFn, op: Superoperator) -> Result<Self> {
        self.check_dim(&op)?;
        self.regular = match self.regular {
            RegularKernel::Zero => RegularKernel::Separable(vec![KernelTerm { kappa, op }]),
            RegularKernel::Separable(mut terms) => {
                terms.push(KernelTerm { kappa, op });
                RegularKernel::Separable(terms)
            }
            RegularKernel::General(_) => {
                return Err(Error::ParameterDomain("cannot mix separable and general regular kernels".into()))
            }
        };
        Ok(self)
    }

    pub fn with_general(mut self, f: impl Fn(f64) -> Result<Superoperator> + Send + Sync + 'static) -> Self {
        self.regular = RegularKernel::General(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta_coeff(&self) -> f64 {
        self.delta_coeff
    }

    pub fn delta_op(&self) -> &Superoperator {
        &self.delta_op
    }

    pub fn convention(&self) -> DeltaConvention {
        self.convention
    }

    pub fn regular(&self) -> &RegularKernel {
        &self.regular
    }

    /// The regular part evaluated at `t`.
    pub fn regular_at(&self, t: f64) -> Result<Superoperator> {
        match &self.regular {
            RegularKernel::Zero => Ok(Superoperator::zero(self.dim)),
            RegularKernel::Separable(terms) => terms.iter().try_fold(Superoperator::zero(self.dim), |acc, term| {
                acc.add(&term.op.scale_re((term.kappa)(t)))
            }),
            RegularKernel::General(f) => f(t),
        }
    }

    /// The instantaneous generator contributed by the delta part.
    pub fn instantaneous_generator(&self) -> Superoperator {
        self.delta_op.scale_re(self.delta_coeff * self.convention.weight())
    }

    fn check_dim(&self, op: &Superoperator) -> Result<()> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "kernel on dimension {} given an operator on dimension {}",
                self.dim,
                op.dim()
            )));
        }
        Ok(())
    }
}
