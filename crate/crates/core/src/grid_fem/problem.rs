use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fem::mesh::Coarsening;

/// A point in the parameter box of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint(pub Vec<f64>);

impl ParamPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for ParamPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemId {
    #[serde(rename = "example-1")]
    Example1,
    #[serde(rename = "example-2")]
    Example2,
    /// Unit-coefficient Poisson with the Example 1 source and zero boundary data.
    /// Exact solution `sin(pi x) sin(pi y) sin(pi z)`; used for convergence checks.
    #[serde(rename = "poisson")]
    Poisson,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Example1 => "example-1",
            ProblemId::Example2 => "example-2",
            ProblemId::Poisson => "poisson",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example-1" | "ex1" | "1" => Ok(ProblemId::Example1),
            "example-2" | "ex2" | "2" => Ok(ProblemId::Example2),
            "poisson" => Ok(ProblemId::Poisson),
            other => Err(Error::Config(format!("unknown problem id '{other}'"))),
        }
    }
}

/// Which faces of the unit cube carry Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryPartition {
    AllDirichlet,
    /// Homogeneous Neumann on the open face `x = 1`; Dirichlet elsewhere,
    /// including the edges of that face.
    NeumannAtXOne,
}

impl BoundaryPartition {
    /// Whether grid node `(i, j, k)` of a grid with `n[d]` nodes along axis `d` is constrained.
    pub fn is_dirichlet(self, i: usize, j: usize, k: usize, n: [usize; 3]) -> bool {
        let on_yz = j == 0 || j == n[1] - 1 || k == 0 || k == n[2] - 1;
        match self {
            BoundaryPartition::AllDirichlet => i == 0 || i == n[0] - 1 || on_yz,
            BoundaryPartition::NeumannAtXOne => i == 0 || on_yz,
        }
    }
}

/// Parametrized diffusion problem `-div(K(x; mu) grad u) = f(x; mu)` on the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub bounds: Vec<(f64, f64)>,
    pub boundary: BoundaryPartition,
}

impl ProblemSpec {
    pub fn example1() -> Self {
        Self { id: ProblemId::Example1, bounds: vec![(0.0, 2.0), (0.0, 1.0)], boundary: BoundaryPartition::AllDirichlet }
    }

    pub fn example2() -> Self {
        let mut bounds = vec![(0.1, 1.0); 3];
        bounds.extend([(0.4, 0.6); 3]);
        bounds.push((0.25, 0.5));
        Self { id: ProblemId::Example2, bounds, boundary: BoundaryPartition::NeumannAtXOne }
    }

    pub fn poisson() -> Self {
        Self { id: ProblemId::Poisson, bounds: Vec::new(), boundary: BoundaryPartition::AllDirichlet }
    }

    pub fn from_id(id: ProblemId) -> Self {
        match id {
            ProblemId::Example1 => Self::example1(),
            ProblemId::Example2 => Self::example2(),
            ProblemId::Poisson => Self::poisson(),
        }
    }

    pub fn param_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn check_bounds(&self) -> Result<()> {
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidInput(format!("degenerate bounds in dimension {d}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn validate(&self, mu: &ParamPoint) -> Result<()> {
        if mu.dim() != self.param_dim() {
            return Err(Error::Domain(format!("{} expects {} parameters, got {}", self.id, self.param_dim(), mu.dim())));
        }
        for (d, (&v, &(lo, hi))) in mu.0.iter().zip(&self.bounds).enumerate() {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Domain(format!("mu[{d}] = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Scalar factor of the diffusion tensor at `x`.
    pub fn coefficient(&self, x: [f64; 3], mu: &[f64]) -> f64 {
        match self.id {
            ProblemId::Example1 => {
                let s = (20.0 * PI * radial(x)).sin();
                1.0 + mu[0] * s * s
            }
            ProblemId::Example2 => {
                let (y_hi, z_hi) = (x[1] > 0.5, x[2] > 0.5);
                match (y_hi, z_hi) {
                    (false, false) => mu[0],
                    (false, true) => mu[1],
                    (true, false) => mu[2],
                    (true, true) => 1.0,
                }
            }
            ProblemId::Poisson => 1.0,
        }
    }

    /// Diagonal anisotropy multiplying the scalar coefficient.
    pub fn anisotropy(&self) -> [f64; 3] {
        match self.id {
            ProblemId::Example2 => [1.0, 1.0, 1e-2],
            _ => [1.0, 1.0, 1.0],
        }
    }

    /// Point smoothers cannot damp error modes along a weakly coupled axis,
    /// so strongly z-anisotropic problems keep the z resolution on coarse grids.
    pub fn preferred_coarsening(&self) -> Coarsening {
        let [ax, ay, az] = self.anisotropy();
        if az < 0.1 * ax.min(ay) {
            Coarsening::SemiXy
        } else {
            Coarsening::Full
        }
    }

    pub fn source(&self, x: [f64; 3], mu: &[f64]) -> f64 {
        match self.id {
            ProblemId::Example1 | ProblemId::Poisson => 3.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin(),
            ProblemId::Example2 => {
                let w = mu[6];
                let d2 = (x[0] - mu[3]).powi(2) + (x[1] - mu[4]).powi(2) + (x[2] - mu[5]).powi(2);
                w + (-d2 / w).exp() / w
            }
        }
    }

    pub fn dirichlet(&self, x: [f64; 3], mu: &[f64]) -> f64 {
        match self.id {
            ProblemId::Example1 => {
                let m2 = mu[1];
                (1.0 - m2) * (10.0 * PI * radial(x)).cos() + m2 * (10.0 * PI * (x[0] + x[1] + x[2])).cos()
            }
            ProblemId::Example2 | ProblemId::Poisson => 0.0,
        }
    }
}

/// `4 (x - 1/2)^2 + (y - 1/2)^2 + (z - 1/2)^2`
fn radial(x: [f64; 3]) -> f64 {
    4.0 * (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.5).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_coefficient_at_center() {
        let spec = ProblemSpec::example1();
        assert_eq!(spec.coefficient([0.5, 0.5, 0.5], &[2.0, 0.3]), 1.0);
        assert_eq!(spec.coefficient([0.1, 0.7, 0.2], &[0.0, 0.3]), 1.0);
    }

    #[test]
    fn example2_source_at_gaussian_center() {
        let spec = ProblemSpec::example2();
        let mu = [0.5, 0.5, 0.5, 0.45, 0.5, 0.55, 0.5];
        assert_eq!(spec.source([0.45, 0.5, 0.55], &mu), 2.5);
    }

    #[test]
    fn example2_piecewise_coefficient() {
        let spec = ProblemSpec::example2();
        let mu = [0.2, 0.3, 0.4, 0.5, 0.5, 0.5, 0.3];
        assert_eq!(spec.coefficient([0.5, 0.25, 0.25], &mu), 0.2);
        assert_eq!(spec.coefficient([0.5, 0.25, 0.75], &mu), 0.3);
        assert_eq!(spec.coefficient([0.5, 0.75, 0.25], &mu), 0.4);
        assert_eq!(spec.coefficient([0.5, 0.75, 0.75], &mu), 1.0);
    }

    #[test]
    fn domain_checks() {
        let spec = ProblemSpec::example1();
        assert!(spec.validate(&ParamPoint::new(vec![1.0, 0.5])).is_ok());
        assert!(matches!(spec.validate(&ParamPoint::new(vec![2.5, 0.5])), Err(Error::Domain(_))));
        assert!(matches!(spec.validate(&ParamPoint::new(vec![1.0])), Err(Error::Domain(_))));
        assert!(ProblemSpec::example2().check_bounds().is_ok());
    }

    #[test]
    fn evaluators_are_pure() {
        let spec = ProblemSpec::example1();
        let x = [0.123, 0.456, 0.789];
        let mu = [1.3, 0.7];
        assert_eq!(spec.coefficient(x, &mu).to_bits(), spec.coefficient(x, &mu).to_bits());
        assert_eq!(spec.dirichlet(x, &mu).to_bits(), spec.dirichlet(x, &mu).to_bits());
    }

    #[test]
    fn problem_id_parsing() {
        assert_eq!("example-2".parse::<ProblemId>().unwrap(), ProblemId::Example2);
        assert!("example-3".parse::<ProblemId>().is_err());
    }
}
