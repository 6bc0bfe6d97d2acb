//! Annealer validation on closed-form test functions.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::write_json;
use super::stats::{mean, median};
use super::HarnessError;
use crate::anneal::{
    anneal_run, sa_run, AnnealConfig, AnnealTrace, Benchmark, BenchmarkObjective, Termination,
};
use crate::rng::{derive_seed, seeded, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Ma,
    Sa,
}

impl Optimizer {
    pub fn label(self) -> &'static str {
        match self {
            Optimizer::Ma => "ma",
            Optimizer::Sa => "sa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub functions: Vec<Benchmark>,
    pub dim: usize,
    pub runs: usize,
    pub seed: u64,
    /// A run succeeds when its best energy ends below this value.
    pub threshold: f64,
    pub anneal: AnnealConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            functions: Benchmark::ALL.to_vec(),
            dim: 10,
            runs: 100,
            seed: 0,
            threshold: 1e-2,
            anneal: AnnealConfig {
                max_iterations: 2000,
                delta_scale: 0.05,
                ..AnnealConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub function: Benchmark,
    pub optimizer: Optimizer,
    pub run: usize,
    pub seed: u64,
    pub start_energy: f64,
    pub best_energy: f64,
    pub iterations: usize,
    pub candidates: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub function: Benchmark,
    pub optimizer: Optimizer,
    pub runs: usize,
    pub successes: usize,
    pub best_energy_median: f64,
    pub best_energy_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTrace {
    pub function: Benchmark,
    pub optimizer: Optimizer,
    pub run: usize,
    pub trace: AnnealTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub runs: Vec<BenchRun>,
    pub summary: Vec<BenchSummary>,
    /// Traces of run 0 for every function and optimizer.
    pub traces: Vec<BenchTrace>,
}

/// Start point of run `run`: uniform in `[-1, 1)` per coordinate.
pub fn start_point(seed: u64, run: usize, dim: usize) -> Vec<f64> {
    let mut rng = seeded(derive_seed(seed, tags::REPEAT, run as u64));
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// MA and SA from identical start points and perturbation streams.
pub fn bench_optimizers(config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    if config.dim == 0 || config.runs == 0 || config.functions.is_empty() {
        return Err(HarnessError::Config(
            "bench needs dim >= 1, runs >= 1 and a function".into(),
        ));
    }
    config.anneal.validate()?;
    let mut runs = Vec::new();
    let mut summary = Vec::new();
    let mut traces = Vec::new();
    for &function in &config.functions {
        for optimizer in [Optimizer::Ma, Optimizer::Sa] {
            let results = (0..config.runs)
                .into_par_iter()
                .map(|run| {
                    let x0 = start_point(config.seed, run, config.dim);
                    let anneal = AnnealConfig {
                        seed: derive_seed(config.seed, tags::ANNEAL, run as u64),
                        ..config.anneal.clone()
                    };
                    let mut obj = BenchmarkObjective {
                        kind: function,
                        dim: config.dim,
                    };
                    let out = match optimizer {
                        Optimizer::Ma => anneal_run(&mut obj, &x0, &anneal)?,
                        Optimizer::Sa => sa_run(&mut obj, &x0, &anneal)?,
                    };
                    let record = BenchRun {
                        function,
                        optimizer,
                        run,
                        seed: anneal.seed,
                        start_energy: out.start_energy,
                        best_energy: out.best_energy,
                        iterations: out.trace.iterations(),
                        candidates: out.evaluations.candidates,
                        termination: out.termination,
                    };
                    Ok((record, out.trace))
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let best: Vec<f64> = results.iter().map(|(r, _)| r.best_energy).collect();
            summary.push(BenchSummary {
                function,
                optimizer,
                runs: best.len(),
                successes: best.iter().filter(|&&b| b < config.threshold).count(),
                best_energy_median: median(&best).unwrap_or(f64::NAN),
                best_energy_mean: mean(&best).unwrap_or(f64::NAN),
            });
            for (i, (record, trace)) in results.into_iter().enumerate() {
                if i == 0 {
                    traces.push(BenchTrace {
                        function,
                        optimizer,
                        run: 0,
                        trace,
                    });
                }
                runs.push(record);
            }
        }
    }
    Ok(BenchReport {
        config: config.clone(),
        runs,
        summary,
        traces,
    })
}

/// Writes `bench.json`, `bench_summary.csv` and one trace CSV per function and optimizer.
pub fn emit_bench(report: &BenchReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| HarnessError::Io { path, source }
    };
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(io(&traces))?;
    let mut written = Vec::new();

    let path = dir.join("bench.json");
    write_json(report, &path)?;
    written.push(path);

    let path = dir.join("bench_summary.csv");
    let mut text =
        String::from("function,optimizer,runs,successes,best_energy_median,best_energy_mean\n");
    for s in &report.summary {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.function,
            s.optimizer.label(),
            s.runs,
            s.successes,
            s.best_energy_median,
            s.best_energy_mean
        ));
    }
    fs::write(&path, text).map_err(io(&path))?;
    written.push(path);

    for t in &report.traces {
        let path = traces.join(format!(
            "{}_{}_r{:02}.csv",
            t.function,
            t.optimizer.label(),
            t.run
        ));
        fs::write(&path, t.trace.to_csv_string()).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
