use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{EvalSplit, ExperimentConfig};
use super::experiment::SweepReport;
use super::stats::{mean, median, sample_sd};
use super::HarnessError;
use crate::anneal::{AnnealTrace, Termination};

/// One training variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// SGD only.
    Baseline,
    /// SGD, then microcanonical annealing over the weights.
    Ma,
    /// SGD, then Metropolis simulated annealing over the weights.
    Sa,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Ma => "cnn_ma",
            Arm::Sa => "cnn_sa",
        }
    }
}

/// Outcome of the annealing pass that followed one SGD epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRecord {
    pub seed: u64,
    pub start_energy: f64,
    pub best_energy: f64,
    pub iterations: usize,
    pub candidates: usize,
    pub anchors: usize,
    pub accepts: usize,
    pub termination: Termination,
    pub trace: AnnealTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Percent correct on the evaluation split after this epoch.
    pub accuracy: f64,
    pub train_loss: f64,
    pub sgd_seconds: f64,
    pub refine_seconds: f64,
    pub refine: Option<RefineRecord>,
}

impl EpochRecord {
    /// Training time of the epoch: SGD plus any refinement.
    pub fn seconds(&self) -> f64 {
        self.sgd_seconds + self.refine_seconds
    }
}

/// Raw record of one repeat of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub arm: Arm,
    pub repeat: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Set when the run stopped early; completed epochs are kept.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    /// Runs that completed this epoch.
    pub n: usize,
    pub accuracy_mean: f64,
    pub accuracy_sd: Option<f64>,
    pub accuracy_median: f64,
    pub seconds_mean: f64,
    pub seconds_sd: Option<f64>,
    pub seconds_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<EpochSummary>,
}

impl ArmReport {
    pub fn new(arm: Arm, runs: Vec<RunRecord>) -> Self {
        let summary = summarize(&runs);
        ArmReport { arm, runs, summary }
    }

    pub fn epoch(&self, epoch: usize) -> Option<&EpochSummary> {
        self.summary.iter().find(|s| s.epoch == epoch)
    }

    pub fn last_epoch(&self) -> Option<&EpochSummary> {
        self.summary.last()
    }
}

/// Per-epoch mean, sample sd and median over all runs that reached the epoch.
pub fn summarize(runs: &[RunRecord]) -> Vec<EpochSummary> {
    let max_epoch = runs.iter().map(|r| r.epochs.len()).max().unwrap_or(0);
    (1..=max_epoch)
        .map(|epoch| {
            let recs: Vec<&EpochRecord> = runs
                .iter()
                .filter_map(|r| r.epochs.iter().find(|e| e.epoch == epoch))
                .collect();
            let acc: Vec<f64> = recs.iter().map(|e| e.accuracy).collect();
            let secs: Vec<f64> = recs.iter().map(|e| e.seconds()).collect();
            EpochSummary {
                epoch,
                n: recs.len(),
                accuracy_mean: mean(&acc).unwrap_or(f64::NAN),
                accuracy_sd: sample_sd(&acc),
                accuracy_median: median(&acc).unwrap_or(f64::NAN),
                seconds_mean: mean(&secs).unwrap_or(f64::NAN),
                seconds_sd: sample_sd(&secs),
                seconds_median: median(&secs).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

/// Same-seed difference between two arms at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub repeat: usize,
    pub seed: u64,
    pub epoch: usize,
    pub control_accuracy: f64,
    pub treatment_accuracy: f64,
    pub accuracy_delta: f64,
    pub control_seconds: f64,
    pub treatment_seconds: f64,
    /// Treatment over control time; absent when the control took no time.
    pub time_ratio: Option<f64>,
    pub control_candidates: usize,
    pub treatment_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub epoch: usize,
    pub n: usize,
    pub accuracy_delta_mean: f64,
    pub accuracy_delta_median: f64,
    pub time_ratio_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub control: Arm,
    pub treatment: Arm,
    pub pairs: Vec<PairedDelta>,
    pub summary: Vec<PairedSummary>,
}

impl Comparison {
    /// Pairs runs with equal repeat index, epoch by epoch.
    pub fn between(control: &ArmReport, treatment: &ArmReport) -> Self {
        let candidates = |e: &EpochRecord| e.refine.as_ref().map_or(0, |r| r.candidates);
        let mut pairs = Vec::new();
        for c in &control.runs {
            let Some(t) = treatment.runs.iter().find(|t| t.repeat == c.repeat) else {
                continue;
            };
            for ce in &c.epochs {
                let Some(te) = t.epochs.iter().find(|e| e.epoch == ce.epoch) else {
                    continue;
                };
                pairs.push(PairedDelta {
                    repeat: c.repeat,
                    seed: c.seed,
                    epoch: ce.epoch,
                    control_accuracy: ce.accuracy,
                    treatment_accuracy: te.accuracy,
                    accuracy_delta: te.accuracy - ce.accuracy,
                    control_seconds: ce.seconds(),
                    treatment_seconds: te.seconds(),
                    time_ratio: (ce.seconds() > 0.0).then(|| te.seconds() / ce.seconds()),
                    control_candidates: candidates(ce),
                    treatment_candidates: candidates(te),
                });
            }
        }
        let max_epoch = pairs.iter().map(|p| p.epoch).max().unwrap_or(0);
        let summary = (1..=max_epoch)
            .map(|epoch| {
                let at: Vec<&PairedDelta> = pairs.iter().filter(|p| p.epoch == epoch).collect();
                let deltas: Vec<f64> = at.iter().map(|p| p.accuracy_delta).collect();
                let ratios: Vec<f64> = at.iter().filter_map(|p| p.time_ratio).collect();
                PairedSummary {
                    epoch,
                    n: at.len(),
                    accuracy_delta_mean: mean(&deltas).unwrap_or(f64::NAN),
                    accuracy_delta_median: median(&deltas).unwrap_or(f64::NAN),
                    time_ratio_median: median(&ratios),
                }
            })
            .collect();
        Comparison {
            control: control.arm,
            treatment: treatment.arm,
            pairs,
            summary,
        }
    }
}

/// Build and host facts recorded with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub debug_assertions: bool,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
            debug_assertions: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub config: ExperimentConfig,
    pub environment: Environment,
    pub eval_split: EvalSplit,
    pub train_samples: usize,
    pub eval_samples: usize,
    pub arms: Vec<ArmReport>,
    pub comparisons: Vec<Comparison>,
}

impl RunReport {
    pub fn arm(&self, arm: Arm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn comparison(&self, control: Arm, treatment: Arm) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.control == control && c.treatment == treatment)
    }

    /// Every run across arms that stopped with an error.
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.arms
            .iter()
            .flat_map(|a| a.runs.iter())
            .filter(|r| r.error.is_some())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_csv_rows(
    path: &Path,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| HarnessError::Serialize(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Arm paired with the baseline in `epochs.csv`.
fn treatment_arm(report: &RunReport) -> Option<&ArmReport> {
    report.arm(Arm::Ma).or_else(|| report.arm(Arm::Sa))
}

/// Writes the report into `dir` and returns the paths written:
///
/// - `results.json`: the whole report, raw records included
/// - `epochs.csv`: `epoch,A1,T1,A2,T2` (baseline and refined mean accuracy and seconds)
/// - `summary.csv`, `runs.csv`, `comparisons.csv`
/// - `traces/<arm>_r<repeat>_e<epoch>.csv`: one annealer trace per refinement
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join("results.json");
    write_json(report, &path)?;
    written.push(path);

    let path = dir.join("epochs.csv");
    let base = report.arm(Arm::Baseline);
    let refined = treatment_arm(report);
    let epochs = [base, refined]
        .iter()
        .flatten()
        .map(|a| a.summary.len())
        .max()
        .unwrap_or(0);
    let cells = |arm: Option<&ArmReport>, epoch: usize| match arm.and_then(|a| a.epoch(epoch)) {
        Some(s) => [s.accuracy_mean.to_string(), s.seconds_mean.to_string()],
        None => [String::new(), String::new()],
    };
    let rows = (1..=epochs)
        .map(|e| {
            let [a1, t1] = cells(base, e);
            let [a2, t2] = cells(refined, e);
            vec![e.to_string(), a1, t1, a2, t2]
        })
        .collect();
    write_csv_rows(&path, &["epoch", "A1", "T1", "A2", "T2"], rows)?;
    written.push(path);

    let path = dir.join("summary.csv");
    let rows = report
        .arms
        .iter()
        .flat_map(|a| {
            a.summary.iter().map(move |s| {
                vec![
                    a.arm.label().to_string(),
                    s.epoch.to_string(),
                    s.n.to_string(),
                    s.accuracy_mean.to_string(),
                    opt(s.accuracy_sd),
                    s.accuracy_median.to_string(),
                    s.seconds_mean.to_string(),
                    opt(s.seconds_sd),
                    s.seconds_median.to_string(),
                ]
            })
        })
        .collect();
    write_csv_rows(
        &path,
        &[
            "arm",
            "epoch",
            "n",
            "accuracy_mean",
            "accuracy_sd",
            "accuracy_median",
            "seconds_mean",
            "seconds_sd",
            "seconds_median",
        ],
        rows,
    )?;
    written.push(path);

    let path = dir.join("runs.csv");
    let mut rows = Vec::new();
    for a in &report.arms {
        for r in &a.runs {
            for e in &r.epochs {
                let refine = e.refine.as_ref();
                rows.push(vec![
                    a.arm.label().to_string(),
                    r.repeat.to_string(),
                    r.seed.to_string(),
                    e.epoch.to_string(),
                    e.accuracy.to_string(),
                    e.train_loss.to_string(),
                    e.sgd_seconds.to_string(),
                    e.refine_seconds.to_string(),
                    opt(refine.map(|x| x.start_energy)),
                    opt(refine.map(|x| x.best_energy)),
                    refine.map(|x| x.candidates.to_string()).unwrap_or_default(),
                    refine.map(|x| x.accepts.to_string()).unwrap_or_default(),
                    String::new(),
                ]);
            }
            if let Some(err) = &r.error {
                let mut row = vec![String::new(); 13];
                row[0] = a.arm.label().to_string();
                row[1] = r.repeat.to_string();
                row[2] = r.seed.to_string();
                row[12] = err.clone();
                rows.push(row);
            }
        }
    }
    write_csv_rows(
        &path,
        &[
            "arm",
            "repeat",
            "seed",
            "epoch",
            "accuracy",
            "train_loss",
            "sgd_seconds",
            "refine_seconds",
            "refine_start_energy",
            "refine_best_energy",
            "candidates",
            "accepts",
            "error",
        ],
        rows,
    )?;
    written.push(path);

    let path = dir.join("comparisons.csv");
    let rows = report
        .comparisons
        .iter()
        .flat_map(|c| {
            c.pairs.iter().map(move |p| {
                vec![
                    c.control.label().to_string(),
                    c.treatment.label().to_string(),
                    p.repeat.to_string(),
                    p.seed.to_string(),
                    p.epoch.to_string(),
                    p.accuracy_delta.to_string(),
                    opt(p.time_ratio),
                    p.control_candidates.to_string(),
                    p.treatment_candidates.to_string(),
                ]
            })
        })
        .collect();
    write_csv_rows(
        &path,
        &[
            "control",
            "treatment",
            "repeat",
            "seed",
            "epoch",
            "accuracy_delta",
            "time_ratio",
            "control_candidates",
            "treatment_candidates",
        ],
        rows,
    )?;
    written.push(path);

    let traces = dir.join("traces");
    for a in &report.arms {
        for r in &a.runs {
            for e in &r.epochs {
                let Some(refine) = &e.refine else { continue };
                if !traces.exists() {
                    fs::create_dir_all(&traces).map_err(io_err(&traces))?;
                }
                let path = traces.join(format!(
                    "{}_r{:02}_e{:02}.csv",
                    a.arm.label(),
                    r.repeat,
                    e.epoch
                ));
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                refine.trace.write_csv(file).map_err(csv_err(&path))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Writes `sweep.csv` (one row per value and epoch) and a full report
/// directory per swept value.
pub fn emit_sweep(sweep: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("sweep.csv");
    let mut rows = Vec::new();
    for p in &sweep.points {
        for a in &p.report.arms {
            for s in &a.summary {
                rows.push(vec![
                    p.value.to_string(),
                    a.arm.label().to_string(),
                    s.epoch.to_string(),
                    s.n.to_string(),
                    s.accuracy_median.to_string(),
                    s.accuracy_mean.to_string(),
                    opt(s.accuracy_sd),
                    s.seconds_median.to_string(),
                    s.seconds_mean.to_string(),
                    opt(s.seconds_sd),
                ]);
            }
        }
    }
    write_csv_rows(
        &path,
        &[
            sweep.param.to_string().as_str(),
            "arm",
            "epoch",
            "n",
            "accuracy_median",
            "accuracy_mean",
            "accuracy_sd",
            "seconds_median",
            "seconds_mean",
            "seconds_sd",
        ],
        rows,
    )?;
    let mut written = vec![path];
    for p in &sweep.points {
        let sub = dir.join(format!("{}_{}", sweep.param, p.value));
        written.extend(emit_report(&p.report, &sub)?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::IterationRecord;

    fn epoch(e: usize, acc: f64, secs: f64, refine: bool) -> EpochRecord {
        EpochRecord {
            epoch: e,
            accuracy: acc,
            train_loss: 0.3,
            sgd_seconds: secs,
            refine_seconds: if refine { 0.1 } else { 0.0 },
            refine: refine.then(|| RefineRecord {
                seed: 9,
                start_energy: 0.4,
                best_energy: 0.35,
                iterations: 1,
                candidates: 10,
                anchors: 1,
                accepts: 7,
                termination: Termination::MaxIterations,
                trace: AnnealTrace {
                    records: vec![IterationRecord {
                        iteration: 1,
                        energy: 0.36,
                        kinetic: 100.04,
                        temperature: 100.0,
                        accepts: 7,
                        rejects: 3,
                        best_energy: 0.35,
                    }],
                },
            }),
        }
    }

    fn run(arm: Arm, repeat: usize, accs: &[f64]) -> RunRecord {
        RunRecord {
            arm,
            repeat,
            seed: repeat as u64,
            epochs: accs
                .iter()
                .enumerate()
                .map(|(i, &a)| epoch(i + 1, a, 1.0 + repeat as f64, arm != Arm::Baseline))
                .collect(),
            error: None,
        }
    }

    fn report(epochs: usize) -> RunReport {
        let accs =
            |shift: f64| -> Vec<f64> { (0..epochs).map(|e| 80.0 + shift + e as f64).collect() };
        let base = ArmReport::new(
            Arm::Baseline,
            (0..3)
                .map(|r| run(Arm::Baseline, r, &accs(r as f64)))
                .collect(),
        );
        let ma = ArmReport::new(
            Arm::Ma,
            (0..3)
                .map(|r| run(Arm::Ma, r, &accs(2.0 + r as f64)))
                .collect(),
        );
        let comparisons = vec![Comparison::between(&base, &ma)];
        RunReport {
            label: "cnn_ma".into(),
            config: ExperimentConfig::default(),
            environment: Environment::current(),
            eval_split: EvalSplit::Test,
            train_samples: 100,
            eval_samples: 50,
            arms: vec![base, ma],
            comparisons,
        }
    }

    #[test]
    fn summary_recomputes_from_raw_records() {
        let r = report(4);
        for arm in &r.arms {
            for s in &arm.summary {
                let acc: Vec<f64> = arm
                    .runs
                    .iter()
                    .map(|run| run.epochs[s.epoch - 1].accuracy)
                    .collect();
                let m = acc.iter().sum::<f64>() / acc.len() as f64;
                let sd = (acc.iter().map(|a| (a - m).powi(2)).sum::<f64>()
                    / (acc.len() - 1) as f64)
                    .sqrt();
                assert!((s.accuracy_mean - m).abs() <= 1e-12);
                assert!((s.accuracy_sd.unwrap() - sd).abs() <= 1e-12);
                assert_eq!(s.n, 3);
            }
        }
    }

    #[test]
    fn failed_runs_count_only_completed_epochs() {
        let mut runs = vec![
            run(Arm::Baseline, 0, &[80.0, 81.0]),
            run(Arm::Baseline, 1, &[82.0]),
        ];
        runs[1].error = Some("diverged".into());
        let s = summarize(&runs);
        assert_eq!(s[0].n, 2);
        assert_eq!(s[1].n, 1);
        assert_eq!(s[1].accuracy_sd, None);
    }

    #[test]
    fn paired_deltas() {
        let r = report(2);
        let c = r.comparison(Arm::Baseline, Arm::Ma).unwrap();
        assert_eq!(c.pairs.len(), 6);
        assert!(c
            .pairs
            .iter()
            .all(|p| (p.accuracy_delta - 2.0).abs() < 1e-12));
        assert_eq!(c.summary[0].accuracy_delta_median, 2.0);
        assert_eq!(c.pairs[0].time_ratio, Some(1.1));
    }

    #[test]
    fn ten_epoch_table_has_ten_rows_of_five_columns() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report(10), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,A1,T1,A2,T2");
        assert_eq!(lines.len(), 11);
        assert!(lines.iter().all(|l| l.split(',').count() == 5));
        assert_eq!(fs::read_dir(dir.path().join("traces")).unwrap().count(), 30);
    }

    #[test]
    fn empty_report_gives_header_only_table() {
        let mut r = report(1);
        r.arms.clear();
        r.comparisons.clear();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
        assert_eq!(text, "epoch,A1,T1,A2,T2\n");
        assert!(!dir.path().join("traces").exists());
    }

    #[test]
    fn re_emitting_is_bitwise_identical() {
        let r = report(3);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let files = emit_report(&r, a.path()).unwrap();
        emit_report(&r, b.path()).unwrap();
        for f in files {
            let rel = f.strip_prefix(a.path()).unwrap();
            assert_eq!(
                fs::read(&f).unwrap(),
                fs::read(b.path().join(rel)).unwrap(),
                "{rel:?}"
            );
        }
    }

    #[test]
    fn results_json_round_trips() {
        let r = report(2);
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("results.json")).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
