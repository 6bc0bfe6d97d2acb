//! `cnnma`: train, anneal, sweep, compare and benchmark from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cnnma::harness::{
    bench_optimizers, compare_ma_sa, emit_bench, emit_report, emit_sweep, run_experiment_on,
    sweep_delta_scale, sweep_neighborhood, Arm, BenchConfig, ErrorCategory, ExperimentConfig,
    HarnessError, Mode, PreparedData, RunReport, SweepParam, SweepReport,
};
use cnnma::Benchmark;

#[derive(Parser, Debug)]
#[command(
    name = "cnnma",
    version,
    about = "CNN training with microcanonical annealing refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plain SGD baseline.
    Train(Common),
    /// SGD baseline next to SGD plus microcanonical annealing.
    Anneal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        anneal: AnnealArgs,
    },
    /// Annealing runs across perturbation scales or neighborhood sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_param)]
        param: SweepParam,
        /// Comma-separated values; defaults to the `[sweep]` table of the config.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        anneal: AnnealArgs,
    },
    /// Baseline, microcanonical and Metropolis refinement under equal budgets.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        anneal: AnnealArgs,
    },
    /// Annealer validation on sphere, rastrigin and rosenbrock.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Class-stratified training subset size (0 = full set).
    #[arg(long)]
    subset: Option<usize>,
    /// Class-stratified test subset size (0 = full set).
    #[arg(long)]
    test_subset: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record zero durations so reports are byte-for-byte reproducible.
    #[arg(long)]
    no_wall_time: bool,
    /// Run repeats in parallel.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Debug)]
struct AnnealArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    neighborhood: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    kinetic: Option<f64>,
    #[arg(long)]
    cooling: Option<f64>,
    /// Never rescale the demon energy.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_benchmark)]
    functions: Option<Vec<Benchmark>>,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-2)]
    threshold: f64,
    #[arg(long, default_value = "results/bench")]
    out: PathBuf,
    #[command(flatten)]
    anneal: AnnealArgs,
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn parse_benchmark(s: &str) -> Result<Benchmark, String> {
    s.parse().map_err(|e: cnnma::AnnealError| e.to_string())
}

impl AnnealArgs {
    fn apply(&self, a: &mut cnnma::AnnealConfig) {
        if let Some(v) = self.delta {
            a.delta_scale = v;
        }
        if let Some(v) = self.neighborhood {
            a.neighborhood_size = v;
        }
        if let Some(v) = self.iterations {
            a.max_iterations = v;
        }
        if let Some(v) = self.kinetic {
            a.initial_kinetic = v;
        }
        if let Some(v) = self.cooling {
            a.cooling_factor = v;
        }
        if self.strict {
            a.strict_microcanonical = true;
        }
    }
}

impl Common {
    fn resolve(
        &self,
        mode: Mode,
        anneal: Option<&AnnealArgs>,
    ) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        c.mode = mode;
        if let Some(v) = &self.data_dir {
            c.data.dir = v.clone();
        }
        if let Some(v) = self.subset {
            c.data.train_subset = v;
        }
        if let Some(v) = self.test_subset {
            c.data.test_subset = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.repeats {
            c.repeats = v;
        }
        if self.no_wall_time {
            c.record_wall_time = false;
        }
        if self.parallel {
            c.parallel_repeats = true;
        }
        if let Some(a) = anneal {
            a.apply(&mut c.anneal);
        }
        c.validate()?;
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| Path::new("results").join(mode.label()));
        Ok((c, out))
    }
}

fn print_report(report: &RunReport) {
    println!(
        "{}: {} train samples, accuracy on {} split ({} samples)",
        report.label, report.train_samples, report.eval_split, report.eval_samples
    );
    for arm in &report.arms {
        for s in &arm.summary {
            let sd = s
                .accuracy_sd
                .map(|v| format!(" ± {v:.2}"))
                .unwrap_or_default();
            println!(
                "  {:<9} epoch {:>2}: accuracy {:.2}{} %  time {:.2} s  (n={})",
                arm.arm.label(),
                s.epoch,
                s.accuracy_mean,
                sd,
                s.seconds_mean,
                s.n
            );
        }
    }
    for c in &report.comparisons {
        if let Some(s) = c.summary.last() {
            let ratio = s
                .time_ratio_median
                .map(|r| format!("{r:.3}x"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "  {} vs {}: median accuracy delta {:+.2} pp, median time ratio {}",
                c.treatment.label(),
                c.control.label(),
                s.accuracy_delta_median,
                ratio
            );
        }
    }
    for run in report.failures() {
        eprintln!(
            "  {} repeat {} failed: {}",
            run.arm.label(),
            run.repeat,
            run.error.as_deref().unwrap_or_default()
        );
    }
}

fn print_sweep(sweep: &SweepReport) {
    println!("{} sweep", sweep.param);
    for p in &sweep.points {
        if let Some(s) = p.report.arm(Arm::Ma).and_then(|a| a.last_epoch()) {
            println!(
                "  {:>8}: median accuracy {:.2} %  median time {:.2} s  (n={})",
                p.value, s.accuracy_median, s.seconds_median, s.n
            );
        }
    }
}

/// Runs the command; `Ok(true)` means every run completed.
fn execute(cli: Cli) -> Result<bool, HarnessError> {
    let experiment = |common: &Common, mode: Mode, anneal: Option<&AnnealArgs>| {
        let (config, out) = common.resolve(mode, anneal)?;
        let data = PreparedData::load(&config)?;
        Ok::<_, HarnessError>((config, data, out))
    };
    match cli.command {
        Command::Train(common) => {
            let (config, data, out) = experiment(&common, Mode::Baseline, None)?;
            finish(run_experiment_on(&config, &data)?, &out)
        }
        Command::Anneal { common, anneal } => {
            let (config, data, out) = experiment(&common, Mode::CnnMa, Some(&anneal))?;
            finish(run_experiment_on(&config, &data)?, &out)
        }
        Command::Compare { common, anneal } => {
            let (config, data, out) = experiment(&common, Mode::SaBaseline, Some(&anneal))?;
            finish(compare_ma_sa(&config, &data)?, &out)
        }
        Command::Sweep {
            common,
            param,
            values,
            anneal,
        } => {
            let mode = match param {
                SweepParam::Delta => Mode::SweepDelta,
                SweepParam::Neighborhood => Mode::SweepNeighborhood,
            };
            let (config, data, out) = experiment(&common, mode, Some(&anneal))?;
            let sweep = match param {
                SweepParam::Delta => {
                    let values = values.unwrap_or_else(|| config.sweep.delta.clone());
                    sweep_delta_scale(&config, &data, &values)?
                }
                SweepParam::Neighborhood => {
                    let sizes = match values {
                        Some(v) => v
                            .iter()
                            .map(|&x| {
                                if x >= 1.0 && x.fract() == 0.0 {
                                    Ok(x as usize)
                                } else {
                                    Err(HarnessError::Config(format!(
                                        "neighborhood size {x} is not a positive integer"
                                    )))
                                }
                            })
                            .collect::<Result<Vec<_>, _>>()?,
                        None => config.sweep.neighborhood.clone(),
                    };
                    sweep_neighborhood(&config, &data, &sizes)?
                }
            };
            print_sweep(&sweep);
            emit_sweep(&sweep, &out)?;
            println!("reports written to {}", out.display());
            Ok(sweep
                .points
                .iter()
                .all(|p| p.report.failures().next().is_none()))
        }
        Command::Bench(args) => {
            let mut config = BenchConfig {
                dim: args.dim,
                runs: args.runs,
                seed: args.seed,
                threshold: args.threshold,
                ..BenchConfig::default()
            };
            if let Some(f) = args.functions {
                config.functions = f;
            }
            args.anneal.apply(&mut config.anneal);
            let report = bench_optimizers(&config)?;
            for s in &report.summary {
                println!(
                    "{:<10} {}: {}/{} below {}  median best {:.3e}",
                    s.function.to_string(),
                    s.optimizer.label(),
                    s.successes,
                    s.runs,
                    config.threshold,
                    s.best_energy_median
                );
            }
            emit_bench(&report, &args.out)?;
            println!("reports written to {}", args.out.display());
            Ok(true)
        }
    }
}

fn finish(report: RunReport, out: &Path) -> Result<bool, HarnessError> {
    print_report(&report);
    emit_report(&report, out)?;
    println!("reports written to {}", out.display());
    Ok(report.failures().next().is_none())
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Validation => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Runtime => 4,
        ErrorCategory::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some runs failed; see the report");
            ExitCode::from(exit_code(ErrorCategory::Runtime))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
