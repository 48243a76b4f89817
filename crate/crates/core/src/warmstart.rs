//! Reduced-basis initialized PCG and the registry of compared methods.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fem::Discretization;
use crate::krylov::{pcg_solve, SolveReport};
use crate::linalg::CsrMatrix;
use crate::msrb::{MsrbHierarchy, MsrbPreconditioner};
use crate::multigrid::{mg_build, MgConfig};
use crate::reduced_basis::{GalerkinSolver, L1rocModel, PodBasis};

pub use crate::krylov::initial_residual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodId {
    Mgcg,
    RbiMgcg,
    RbiMsrbcg,
}

impl MethodId {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Mgcg => "mgcg",
            MethodId::RbiMgcg => "rbi-mgcg",
            MethodId::RbiMsrbcg => "rbi-msrbcg",
        }
    }

    pub fn uses_rb(self) -> bool {
        self != MethodId::Mgcg
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mgcg" => Ok(MethodId::Mgcg),
            "rbi-mgcg" => Ok(MethodId::RbiMgcg),
            "rbi-msrbcg" => Ok(MethodId::RbiMsrbcg),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initializer {
    Zero,
    L1roc,
    Pod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondChoice {
    Multigrid,
    Msrb,
}

/// How one method initializes and preconditions PCG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: MethodId,
    pub initializer: Initializer,
    pub preconditioner: PrecondChoice,
    pub mg: MgConfig,
    pub delta: f64,
    pub max_iter: usize,
    /// RB dimension `N`; ignored by the zero initializer.
    pub rb_dim: usize,
}

impl MethodConfig {
    /// The standard pairing of each method: MGCG from zero, RBI-MGCG with an
    /// L1ROC initial guess and RBI-MSRBCG with a POD initial guess.
    pub fn standard(method: MethodId, rb_dim: usize, delta: f64, max_iter: usize) -> Self {
        let (initializer, preconditioner) = match method {
            MethodId::Mgcg => (Initializer::Zero, PrecondChoice::Multigrid),
            MethodId::RbiMgcg => (Initializer::L1roc, PrecondChoice::Multigrid),
            MethodId::RbiMsrbcg => (Initializer::Pod, PrecondChoice::Msrb),
        };
        Self { method, initializer, preconditioner, mg: MgConfig::default(), delta, max_iter, rb_dim }
    }

    pub fn label(&self) -> String {
        match self.method {
            MethodId::Mgcg => self.method.to_string(),
            m => format!("{m}-N{}", self.rb_dim),
        }
    }

    /// Checks that the models this configuration needs are present.
    pub fn validate(&self, models: &TrainedModels) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        match self.initializer {
            Initializer::L1roc if models.l1roc.is_none() => {
                return Err(Error::Config(format!("{} needs a trained L1ROC model", self.label())))
            }
            Initializer::Pod if models.pod_basis().is_none() => {
                return Err(Error::Config(format!("{} needs a trained POD basis", self.label())))
            }
            _ => {}
        }
        if self.preconditioner == PrecondChoice::Msrb && models.msrb.is_none() {
            return Err(Error::Config(format!("{} needs a trained MSRB hierarchy", self.label())));
        }
        Ok(())
    }
}

/// Models available to the solvers. Any may be absent.
#[derive(Debug, Clone, Default)]
pub struct TrainedModels {
    pub l1roc: Option<L1rocModel>,
    pub pod: Option<PodBasis>,
    pub msrb: Option<MsrbHierarchy>,
}

impl TrainedModels {
    /// The explicit POD basis, else the initial space of the MSRB hierarchy.
    pub fn pod_basis(&self) -> Option<&PodBasis> {
        self.pod.as_ref().or(self.msrb.as_ref().map(|h| h.initial()))
    }
}

/// The RB initial guess `u^(0)` for `cfg`.
pub fn rb_initial_guess(a: &CsrMatrix, f: &[f64], cfg: &MethodConfig, models: &TrainedModels) -> Result<Vec<f64>> {
    match cfg.initializer {
        Initializer::Zero => Ok(vec![0.0; f.len()]),
        Initializer::L1roc => {
            let model = models.l1roc.as_ref().ok_or_else(|| Error::Config("missing L1ROC model".into()))?;
            let n = cfg.rb_dim.min(model.len());
            if n == model.len() {
                Ok(model.online(a, f)?.solution)
            } else {
                Ok(model.truncate(n)?.online(a, f)?.solution)
            }
        }
        Initializer::Pod => {
            let pod = models.pod_basis().ok_or_else(|| Error::Config("missing POD basis".into()))?;
            let n = cfg.rb_dim.min(pod.len());
            Ok(GalerkinSolver::new(a, &pod.columns()[..n])?.solve(f))
        }
    }
}

/// RBI-PCG: RB initial guess followed by one continuous PCG run with the
/// configured preconditioner. The reported wall time covers the
/// initialization, the preconditioner setup and the iterations.
pub fn rbi_pcg_solve(
    a: &CsrMatrix,
    f: &[f64],
    disc: &Discretization,
    cfg: &MethodConfig,
    models: &TrainedModels,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate(models)?;
    if a.nrows() != disc.n_free() {
        return Err(Error::DimensionMismatch(format!("system of size {} for a discretization with {} DoFs", a.nrows(), disc.n_free())));
    }
    let start = Instant::now();
    let u0 = rb_initial_guess(a, f, cfg, models)?;
    let (x, mut report) = match cfg.preconditioner {
        PrecondChoice::Multigrid => {
            let ctx = mg_build(a, disc, cfg.mg)?;
            pcg_solve(a, f, &u0, &ctx, cfg.delta, cfg.max_iter)?
        }
        PrecondChoice::Msrb => {
            let hier = models.msrb.as_ref().ok_or_else(|| Error::Config("missing MSRB hierarchy".into()))?;
            let precond = MsrbPreconditioner::new(a, hier)?;
            pcg_solve(a, f, &u0, &precond, cfg.delta, cfg.max_iter)?
        }
    };
    report.wall_time = start.elapsed().as_secs_f64();
    report.method = cfg.label();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::{ParamPoint, ProblemSpec};
    use crate::multigrid::mgcg_solve;

    fn small() -> (Discretization, crate::grid_fem::AssembledSystem) {
        let disc = Discretization::build(ProblemSpec::example1(), 2, 2).unwrap();
        let sys = disc.assemble(&ParamPoint::new(vec![0.7, 0.4])).unwrap();
        (disc, sys)
    }

    #[test]
    fn zero_initializer_reduces_to_mgcg() {
        let (disc, sys) = small();
        let cfg = MethodConfig::standard(MethodId::Mgcg, 0, 1e-12, 40);
        let (_, rep) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &disc, &cfg, &TrainedModels::default()).unwrap();
        let ctx = mg_build(&sys.matrix, &disc, cfg.mg).unwrap();
        let (_, base) = mgcg_solve(&sys.matrix, &sys.rhs, &vec![0.0; sys.size()], &ctx, 1e-12, 40).unwrap();
        assert_eq!(rep.history, base.history);
    }

    #[test]
    fn exact_initializer_needs_no_iterations() {
        let (disc, sys) = small();
        let exact = sys.matrix.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_column_slice(&sys.rhs));
        let norm = exact.norm();
        let w = exact.iter().map(|v| v / norm).collect::<Vec<_>>();
        let pod = PodBasis::from_parts(sys.size(), vec![w], vec![1.0], 1).unwrap();
        let models = TrainedModels { pod: Some(pod), ..Default::default() };
        let cfg = MethodConfig { initializer: Initializer::Pod, ..MethodConfig::standard(MethodId::Mgcg, 1, 1e-12, 40) };
        let (_, rep) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &disc, &cfg, &models).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn missing_models_are_config_errors() {
        let cfg = MethodConfig::standard(MethodId::RbiMgcg, 5, 1e-8, 40);
        let err = cfg.validate(&TrainedModels::default()).unwrap_err();
        assert!(err.is_config());
        let cfg = MethodConfig::standard(MethodId::RbiMsrbcg, 5, 1e-8, 40);
        assert!(cfg.validate(&TrainedModels::default()).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [MethodId::Mgcg, MethodId::RbiMgcg, MethodId::RbiMsrbcg] {
            assert_eq!(m.as_str().parse::<MethodId>().unwrap(), m);
        }
        assert!("gmres".parse::<MethodId>().is_err());
    }
}
