use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EvalSplit, ExperimentConfig, SweepParam};
use super::report::{
    Arm, ArmReport, Comparison, Environment, EpochRecord, RefineRecord, RunRecord, RunReport,
};
use super::HarnessError;
use crate::anneal::{anneal_run, sa_run, AnnealConfig, CnnObjective};
use crate::cnn::{accuracy, sgd_epoch, Architecture, Network};
use crate::mnist::{
    batch_from_indices, batch_iter, shuffled_order, stratified_subset, Dataset, DatasetSource,
    LabelSet, MiniBatch,
};
use crate::rng::{derive_seed, tags};
use crate::tensor::Tensor;

/// Training samples and the split that accuracy is measured on.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train_images: Tensor,
    pub train_labels: LabelSet,
    pub eval_images: Tensor,
    pub eval_labels: LabelSet,
    pub split: EvalSplit,
}

fn subset(images: Tensor, labels: LabelSet, k: usize) -> (Tensor, LabelSet) {
    if k == 0 || k >= labels.count() {
        return (images, labels);
    }
    let idx = stratified_subset(&labels, k);
    (images.gather(&idx), labels.gather(&idx))
}

impl PreparedData {
    pub fn load(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        let ds = DatasetSource::in_dir(&config.data.dir)?.load()?;
        Ok(Self::from_dataset(ds, config))
    }

    /// Applies the configured subsets and evaluation split.
    pub fn from_dataset(ds: Dataset, config: &ExperimentConfig) -> Self {
        let (train_images, train_labels) =
            subset(ds.train_images, ds.train_labels, config.data.train_subset);
        let (eval_images, eval_labels) = match config.data.split {
            EvalSplit::Test => subset(ds.test_images, ds.test_labels, config.data.test_subset),
            EvalSplit::Train => (train_images.clone(), train_labels.clone()),
        };
        PreparedData {
            train_images,
            train_labels,
            eval_images,
            eval_labels,
            split: config.data.split,
        }
    }

    fn architecture(&self) -> Result<Architecture, HarnessError> {
        let shape = self.train_images.shape();
        if shape.len() != 3 || self.train_labels.count() == 0 {
            return Err(HarnessError::Config(format!(
                "training data must be a non-empty (n, rows, cols) stack, got shape {shape:?}"
            )));
        }
        let arch = Architecture {
            input_rows: shape[1],
            input_cols: shape[2],
            ..Architecture::mnist()
        };
        arch.shape_chain()?;
        Ok(arch)
    }
}

/// Seeds used by one repeat. Every arm of a repeat shares them, so arms differ
/// only in what they do after SGD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatSeeds {
    pub repeat: u64,
}

impl RepeatSeeds {
    pub fn new(base: u64, repeat: usize) -> Self {
        RepeatSeeds {
            repeat: derive_seed(base, tags::REPEAT, repeat as u64),
        }
    }

    pub fn init(&self) -> u64 {
        derive_seed(self.repeat, tags::INIT, 0)
    }

    pub fn shuffle(&self, epoch: usize) -> u64 {
        derive_seed(self.repeat, tags::SHUFFLE, epoch as u64)
    }

    pub fn anneal(&self, epoch: usize) -> u64 {
        derive_seed(self.repeat, tags::ANNEAL, epoch as u64)
    }

    pub fn refine_batches(&self, epoch: usize) -> u64 {
        derive_seed(self.repeat, tags::EVAL_BATCH, epoch as u64)
    }
}

struct Clock(Option<Instant>);

impl Clock {
    fn start(enabled: bool) -> Self {
        Clock(enabled.then(Instant::now))
    }

    fn seconds(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

/// One batch per equilibrium loop, drawn from a fresh shuffle of the training set.
fn refinement_batches(data: &PreparedData, config: &ExperimentConfig, seed: u64) -> Vec<MiniBatch> {
    let order = shuffled_order(data.train_labels.count(), seed);
    order
        .chunks(config.batch_size)
        .take(config.anneal.max_iterations.max(1))
        .map(|idx| batch_from_indices(&data.train_images, &data.train_labels, idx))
        .collect()
}

fn refine(
    net: Network,
    arm: Arm,
    data: &PreparedData,
    config: &ExperimentConfig,
    seeds: &RepeatSeeds,
    epoch: usize,
) -> Result<(Network, RefineRecord), HarnessError> {
    let mut objective = CnnObjective::new(
        &net,
        refinement_batches(data, config, seeds.refine_batches(epoch)),
    )?;
    let anneal = AnnealConfig {
        seed: seeds.anneal(epoch),
        ..config.anneal.clone()
    };
    let x0 = net.flatten().values;
    let out = match arm {
        Arm::Ma => anneal_run(&mut objective, &x0, &anneal)?,
        Arm::Sa => sa_run(&mut objective, &x0, &anneal)?,
        Arm::Baseline => unreachable!("baseline has no refinement"),
    };
    let mut net = objective.into_network();
    net.load_values(&out.best_x)?;
    let record = RefineRecord {
        seed: anneal.seed,
        start_energy: out.start_energy,
        best_energy: out.best_energy,
        iterations: out.trace.iterations(),
        candidates: out.evaluations.candidates,
        anchors: out.evaluations.anchors,
        accepts: out.trace.accept_count(),
        termination: out.termination,
        trace: out.trace,
    };
    Ok((net, record))
}

fn run_epochs(
    arm: Arm,
    data: &PreparedData,
    config: &ExperimentConfig,
    seeds: &RepeatSeeds,
    epochs: &mut Vec<EpochRecord>,
) -> Result<(), HarnessError> {
    let mut net = Network::init(data.architecture()?, seeds.init())?;
    for e in 0..config.epochs {
        let clock = Clock::start(config.record_wall_time);
        let batches = batch_iter(
            &data.train_images,
            &data.train_labels,
            config.batch_size,
            seeds.shuffle(e),
        )?;
        let train_loss = sgd_epoch(&mut net, batches, config.learning_rate)?;
        let sgd_seconds = clock.seconds();

        let (refine_seconds, refine_record) = if arm == Arm::Baseline {
            (0.0, None)
        } else {
            let clock = Clock::start(config.record_wall_time);
            let (refined, record) = refine(net, arm, data, config, seeds, e)?;
            net = refined;
            (clock.seconds(), Some(record))
        };

        epochs.push(EpochRecord {
            epoch: e + 1,
            accuracy: accuracy(&net, &data.eval_images, &data.eval_labels)?,
            train_loss,
            sgd_seconds,
            refine_seconds,
            refine: refine_record,
        });
    }
    Ok(())
}

/// Trains one repeat of one arm. Failures are recorded, not propagated.
pub fn run_repeat(
    arm: Arm,
    data: &PreparedData,
    config: &ExperimentConfig,
    repeat: usize,
) -> RunRecord {
    let seeds = RepeatSeeds::new(config.seed, repeat);
    let mut epochs = Vec::with_capacity(config.epochs);
    let error = run_epochs(arm, data, config, &seeds, &mut epochs)
        .err()
        .map(|e| e.to_string());
    RunRecord {
        arm,
        repeat,
        seed: seeds.repeat,
        epochs,
        error,
    }
}

/// Runs `arms` for every repeat and pairs each refined arm with the baseline
/// (and MA with SA when both are present).
pub fn run_arms(
    label: &str,
    arms: &[Arm],
    config: &ExperimentConfig,
    data: &PreparedData,
) -> Result<RunReport, HarnessError> {
    config.validate()?;
    data.architecture()?;
    // arms of one repeat run back to back so slow drift in machine speed
    // affects paired timings equally
    let one_repeat = |r: usize| -> Vec<RunRecord> {
        arms.iter()
            .map(|&a| run_repeat(a, data, config, r))
            .collect()
    };
    let per_repeat: Vec<Vec<RunRecord>> = if config.parallel_repeats {
        (0..config.repeats)
            .into_par_iter()
            .map(one_repeat)
            .collect()
    } else {
        (0..config.repeats).map(one_repeat).collect()
    };
    let arm_reports: Vec<ArmReport> = arms
        .iter()
        .enumerate()
        .map(|(i, &arm)| {
            ArmReport::new(arm, per_repeat.iter().map(|runs| runs[i].clone()).collect())
        })
        .collect();

    let find = |arm: Arm| arm_reports.iter().find(|a| a.arm == arm);
    let mut comparisons = Vec::new();
    if let Some(base) = find(Arm::Baseline) {
        for treated in arm_reports.iter().filter(|a| a.arm != Arm::Baseline) {
            comparisons.push(Comparison::between(base, treated));
        }
    }
    if let (Some(sa), Some(ma)) = (find(Arm::Sa), find(Arm::Ma)) {
        comparisons.push(Comparison::between(sa, ma));
    }

    Ok(RunReport {
        label: label.to_string(),
        config: config.clone(),
        environment: Environment::current(),
        eval_split: data.split,
        train_samples: data.train_labels.count(),
        eval_samples: data.eval_labels.count(),
        arms: arm_reports,
        comparisons,
    })
}

fn mode_arms(config: &ExperimentConfig) -> &'static [Arm] {
    use super::config::Mode;
    match config.mode {
        Mode::Baseline => &[Arm::Baseline],
        Mode::CnnMa => &[Arm::Baseline, Arm::Ma],
        Mode::SaBaseline => &[Arm::Baseline, Arm::Sa],
        Mode::SweepDelta | Mode::SweepNeighborhood => &[Arm::Ma],
    }
}

/// Loads the configured data and runs the arms implied by `config.mode`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let data = PreparedData::load(config)?;
    run_experiment_on(config, &data)
}

pub fn run_experiment_on(
    config: &ExperimentConfig,
    data: &PreparedData,
) -> Result<RunReport, HarnessError> {
    run_arms(config.mode.label(), mode_arms(config), config, data)
}

/// Baseline, MA and SA under the same seeds and evaluation budget.
pub fn compare_ma_sa(
    config: &ExperimentConfig,
    data: &PreparedData,
) -> Result<RunReport, HarnessError> {
    run_arms("compare", &[Arm::Baseline, Arm::Ma, Arm::Sa], config, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

fn sweep(
    param: SweepParam,
    values: &[f64],
    config: &ExperimentConfig,
    data: &PreparedData,
    apply: impl Fn(&mut AnnealConfig, f64),
) -> Result<SweepReport, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config(format!(
            "{param} sweep needs at least one value"
        )));
    }
    let label = format!("sweep_{param}");
    let points = values
        .iter()
        .map(|&value| {
            let mut c = config.clone();
            apply(&mut c.anneal, value);
            Ok(SweepPoint {
                value,
                report: run_arms(&label, &[Arm::Ma], &c, data)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepReport { param, points })
}

/// MA runs for each perturbation scale.
pub fn sweep_delta_scale(
    config: &ExperimentConfig,
    data: &PreparedData,
    values: &[f64],
) -> Result<SweepReport, HarnessError> {
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(HarnessError::Config(format!(
            "delta_scale values must be positive, got {bad}"
        )));
    }
    sweep(SweepParam::Delta, values, config, data, |a, v| {
        a.delta_scale = v
    })
}

/// MA runs for each neighborhood size.
pub fn sweep_neighborhood(
    config: &ExperimentConfig,
    data: &PreparedData,
    sizes: &[usize],
) -> Result<SweepReport, HarnessError> {
    if sizes.contains(&0) {
        return Err(HarnessError::Config(
            "neighborhood sizes must be >= 1".into(),
        ));
    }
    let values: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    sweep(SweepParam::Neighborhood, &values, config, data, |a, v| {
        a.neighborhood_size = v as usize
    })
}
