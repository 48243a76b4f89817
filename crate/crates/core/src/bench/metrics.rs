use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid_fem::{Discretization, ParamPoint};
use crate::krylov::SolveReport;
use crate::linalg::norm2;
use crate::reduced_basis::{correlation_eigen, L1rocModel};

/// Mean over the reports of the relative residual at iteration `k`;
/// finished histories contribute their final value.
pub fn average_residual(reports: &[SolveReport], k: usize) -> f64 {
    if reports.is_empty() {
        return f64::NAN;
    }
    reports.iter().map(|r| r.residual_at(k)).sum::<f64>() / reports.len() as f64
}

/// `r_ave^(k)` for `k = 0..=max L`.
pub fn average_residual_curve(reports: &[SolveReport]) -> Vec<f64> {
    let len = reports.iter().map(|r| r.history.len()).max().unwrap_or(0);
    (0..len).map(|k| average_residual(reports, k)).collect()
}

/// Break-even point: number of online solves that pay for the offline cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bep {
    Finite(f64),
    /// The warm-started method is not faster online.
    Infinite,
}

impl Bep {
    pub fn is_infinite(self) -> bool {
        self == Bep::Infinite
    }

    pub fn value(self) -> f64 {
        match self {
            Bep::Finite(v) => v,
            Bep::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Bep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bep::Finite(v) => write!(f, "{v:.16e}"),
            Bep::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Bep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bep::Finite(v) => s.serialize_f64(*v),
            Bep::Infinite => s.serialize_str("inf"),
        }
    }
}

/// `t_off / (t_on_base - t_on_rbws)`, infinite unless the denominator is positive.
pub fn break_even(t_off: f64, t_on_base: f64, t_on_rbws: f64) -> Bep {
    let saved = t_on_base - t_on_rbws;
    if saved > 0.0 {
        Bep::Finite(t_off / saved)
    } else {
        Bep::Infinite
    }
}

/// `r_N` = worst relative residual over `params` of the L1ROC solution with
/// the `N`-vector prefix of `model`. `N = 0` is the zero solution, `r_0 = 1`.
pub fn rb_accuracy_curve(model: &L1rocModel, disc: &Discretization, params: &[ParamPoint], ns: &[usize]) -> Result<Vec<(usize, f64)>> {
    if let Some(&n) = ns.iter().find(|&&n| n > model.len()) {
        return Err(Error::InvalidInput(format!("N = {n} exceeds the trained dimension {}", model.len())));
    }
    let prefixes = ns.iter().map(|&n| if n == 0 { Ok(None) } else { model.truncate(n).map(Some) }).collect::<Result<Vec<_>>>()?;
    let mut worst = vec![0.0f64; ns.len()];
    for mu in params {
        let sys = disc.assemble(mu).map_err(|e| e.at_stage("accuracy curve", &mu.0))?;
        let nf = norm2(&sys.rhs);
        for (w, prefix) in worst.iter_mut().zip(&prefixes) {
            let r = match prefix {
                None => 1.0,
                Some(m) => {
                    let u = m.online(&sys.matrix, &sys.rhs).map_err(|e| e.at_stage("accuracy curve", &mu.0))?;
                    norm2(&sys.matrix.residual(&sys.rhs, &u.solution)) / nf
                }
            };
            *w = w.max(r);
        }
    }
    Ok(ns.iter().copied().zip(worst).collect())
}

/// Normalized correlation spectrum of a snapshot collection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// `lambda_n / lambda_max`, non-increasing, first entry 1.
    pub values: Vec<f64>,
    /// Every snapshot was zero; `values` is the placeholder `{1}`.
    pub trivial: bool,
}

impl Spectrum {
    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v > threshold).count()
    }
}

pub fn residual_spectrum(snapshots: &[Vec<f64>]) -> Result<Spectrum> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("spectrum needs at least one snapshot".into()));
    }
    let (values, _) = correlation_eigen(snapshots);
    let top = values[0];
    if !(top > 0.0) {
        return Ok(Spectrum { values: vec![1.0], trivial: true });
    }
    let mut values: Vec<f64> = values.iter().map(|v| v / top).collect();
    values[0] = 1.0;
    Ok(Spectrum { values, trivial: false })
}
