use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnnealError;

/// Energy landscape searched by the annealers.
///
/// `energy` must be deterministic between two `begin_iteration` calls. An
/// objective backed by sampled data may switch samples in `begin_iteration`
/// and reports that by returning `true`, which makes the runner re-measure
/// the current solution before drawing candidates.
pub trait Objective {
    fn dim(&self) -> usize;

    fn energy(&mut self, x: &[f64]) -> Result<f64, AnnealError>;

    /// Called before each outer iteration; returns whether the landscape changed.
    fn begin_iteration(&mut self, _iteration: usize) -> bool {
        false
    }

    /// Called after each outer iteration with the incumbent best solution.
    fn end_iteration(&mut self, _iteration: usize, _incumbent: &[f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [
        Benchmark::Sphere,
        Benchmark::Rastrigin,
        Benchmark::Rosenbrock,
    ];

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Sphere => x.iter().map(|v| v * v).sum(),
            Benchmark::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
            Benchmark::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
        }
    }

    /// Location of the global minimum (value 0).
    pub fn optimum(self, dim: usize) -> Vec<f64> {
        match self {
            Benchmark::Sphere | Benchmark::Rastrigin => vec![0.0; dim],
            Benchmark::Rosenbrock => vec![1.0; dim],
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::Sphere => "sphere",
            Benchmark::Rastrigin => "rastrigin",
            Benchmark::Rosenbrock => "rosenbrock",
        })
    }
}

impl FromStr for Benchmark {
    type Err = AnnealError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" => Ok(Benchmark::Sphere),
            "rastrigin" => Ok(Benchmark::Rastrigin),
            "rosenbrock" => Ok(Benchmark::Rosenbrock),
            _ => Err(AnnealError::UnknownBenchmark(s.to_string())),
        }
    }
}

/// Closed-form test function with a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkObjective {
    pub kind: Benchmark,
    pub dim: usize,
}

pub fn benchmark_objective(name: &str, dim: usize) -> Result<BenchmarkObjective, AnnealError> {
    if dim == 0 {
        return Err(AnnealError::InvalidConfig(
            "benchmark dimension must be >= 1".into(),
        ));
    }
    Ok(BenchmarkObjective {
        kind: name.parse()?,
        dim,
    })
}

impl Objective for BenchmarkObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&mut self, x: &[f64]) -> Result<f64, AnnealError> {
        Ok(self.kind.eval(x))
    }
}

/// Wraps a closure as a fixed objective.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&mut self, x: &[f64]) -> Result<f64, AnnealError> {
        Ok((self.f)(x))
    }
}
