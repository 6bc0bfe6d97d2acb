use cnnma::anneal::{
    anneal_run, metropolis_rule, sa_run, Benchmark, BenchmarkObjective, FnObjective,
};
use cnnma::harness::{bench_optimizers, start_point, BenchConfig, Optimizer};
use cnnma::AnnealConfig;

fn sphere() -> BenchmarkObjective {
    BenchmarkObjective {
        kind: Benchmark::Sphere,
        dim: 10,
    }
}

fn budget() -> AnnealConfig {
    AnnealConfig {
        max_iterations: 2000,
        delta_scale: 0.05,
        ..AnnealConfig::default()
    }
}

#[test]
fn ma_and_sa_both_solve_sphere_on_equal_budgets() {
    for run in 0..10 {
        let x0 = start_point(3, run, 10);
        let cfg = AnnealConfig {
            seed: run as u64,
            ..budget()
        };
        let ma = anneal_run(&mut sphere(), &x0, &cfg).unwrap();
        let sa = sa_run(&mut sphere(), &x0, &cfg).unwrap();
        assert!(ma.best_energy < 1e-2, "MA run {run}: {}", ma.best_energy);
        assert!(sa.best_energy < 1e-2, "SA run {run}: {}", sa.best_energy);
        let ratio = ma.best_energy.max(1e-12) / sa.best_energy.max(1e-12);
        assert!(
            (0.1..=10.0).contains(&ratio),
            "run {run}: MA {} SA {}",
            ma.best_energy,
            sa.best_energy
        );
    }
}

#[test]
fn bench_report_covers_every_function() {
    let cfg = BenchConfig {
        runs: 10,
        ..BenchConfig::default()
    };
    let report = bench_optimizers(&cfg).unwrap();
    assert_eq!(report.summary.len(), 6);
    let sphere_ma = report
        .summary
        .iter()
        .find(|s| s.function == Benchmark::Sphere && s.optimizer == Optimizer::Ma)
        .unwrap();
    assert_eq!(sphere_ma.successes, 10);
    for s in &report.summary {
        assert!(s.best_energy_median.is_finite());
    }
}

#[test]
fn cold_metropolis_is_greedy() {
    // at a vanishing temperature only non-increasing moves pass
    for &delta in &[-1.0, 0.0, 1e-12, 1.0] {
        for &u in &[0.0, 0.5, 0.999] {
            let accepted = metropolis_rule(1e-300, delta, u);
            assert_eq!(accepted, delta <= 0.0, "delta {delta} u {u}");
        }
    }
    // an SA run started cold never moves uphill
    let cfg = AnnealConfig {
        initial_kinetic: 1e-300,
        max_iterations: 200,
        delta_scale: 0.1,
        epsilon: f64::NEG_INFINITY,
        ..AnnealConfig::default()
    };
    let x0 = start_point(1, 0, 10);
    let out = sa_run(&mut sphere(), &x0, &cfg).unwrap();
    for w in out.trace.records.windows(2) {
        assert!(w[1].energy <= w[0].energy);
    }
}

#[test]
fn non_finite_energy_is_an_error() {
    let mut obj = FnObjective::new(
        2,
        |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] * x[0] },
    );
    let cfg = AnnealConfig {
        delta_scale: 1.0,
        max_iterations: 100,
        epsilon: f64::NEG_INFINITY,
        ..AnnealConfig::default()
    };
    assert!(anneal_run(&mut obj, &[0.4, 0.0], &cfg).is_err());
}
