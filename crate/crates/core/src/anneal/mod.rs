//! Microcanonical annealing with a Creutz demon, plus a Metropolis simulated
//! annealing baseline sharing the same loop structure.
//!
//! Each outer iteration is one equilibrium loop of `neighborhood_size`
//! candidates `x' = x + dx` with `|dx_i| <= delta_scale`. After the loop the
//! temperature is multiplied by `cooling_factor`; outside strict mode the
//! demon's kinetic energy is scaled by the same factor so that the energy
//! budget shrinks as the run proceeds. The run stops after `max_iterations`
//! loops or once the best energy falls below `epsilon`.

mod cnn_objective;
mod demon;
mod objective;
mod trace;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{seeded_stream, Rng};

pub use cnn_objective::CnnObjective;
pub use demon::{demon_rule, metropolis_rule, Decision, DemonState};
pub use objective::{benchmark_objective, Benchmark, BenchmarkObjective, FnObjective, Objective};
pub use trace::{AnnealTrace, IterationRecord};

#[derive(Debug, Error)]
pub enum AnnealError {
    #[error("invalid anneal config: {0}")]
    InvalidConfig(String),
    #[error("start vector has dimension {found}, objective expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("objective returned non-finite energy {0}")]
    NonFiniteEnergy(f64),
    #[error("unknown benchmark function {0:?}")]
    UnknownBenchmark(String),
    #[error("objective failed: {0}")]
    Objective(String),
}

/// Distribution of each perturbation component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Uniform on `[-delta_scale, delta_scale)`.
    #[default]
    Symmetric,
    /// Uniform on `[0, delta_scale)`.
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealConfig {
    /// Candidates drawn per equilibrium loop.
    pub neighborhood_size: usize,
    pub max_iterations: usize,
    pub initial_kinetic: f64,
    pub cooling_factor: f64,
    pub delta_scale: f64,
    pub perturbation: Perturbation,
    /// Never rescale the demon, so `energy + kinetic` is conserved.
    pub strict_microcanonical: bool,
    /// Stop once the best energy is below this value.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            neighborhood_size: 10,
            max_iterations: 10,
            initial_kinetic: 100.0,
            cooling_factor: 0.9,
            delta_scale: 0.001,
            perturbation: Perturbation::Symmetric,
            strict_microcanonical: false,
            epsilon: 1e-3,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), AnnealError> {
        let fail = |m: &str| Err(AnnealError::InvalidConfig(m.to_string()));
        if self.neighborhood_size == 0 {
            return fail("neighborhood_size must be >= 1");
        }
        if !(self.initial_kinetic >= 0.0 && self.initial_kinetic.is_finite()) {
            return fail("initial_kinetic must be finite and >= 0");
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor <= 1.0) {
            return fail("cooling_factor must lie in (0, 1]");
        }
        if !(self.delta_scale >= 0.0 && self.delta_scale.is_finite()) {
            return fail("delta_scale must be finite and >= 0");
        }
        if self.epsilon.is_nan() {
            return fail("epsilon must not be NaN");
        }
        Ok(())
    }
}

/// Draws one neighbor of `x`.
pub fn perturb(x: &[f64], delta_scale: f64, mode: Perturbation, rng: &mut Rng) -> Vec<f64> {
    let mut out = x.to_vec();
    perturb_in_place(&mut out, delta_scale, mode, rng);
    out
}

fn perturb_in_place(x: &mut [f64], delta_scale: f64, mode: Perturbation, rng: &mut Rng) {
    let low = match mode {
        Perturbation::Symmetric => -1.0,
        Perturbation::Positive => 0.0,
    };
    for v in x {
        let u: f64 = rng.random_range(low..1.0);
        *v += delta_scale * u;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    BelowEpsilon,
}

/// Objective evaluations spent by a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationCount {
    /// One per candidate; equals `neighborhood_size * iterations`.
    pub candidates: usize,
    /// Measurements of the current solution: the start point, plus one per
    /// iteration whose landscape changed.
    pub anchors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    /// Energy of the start point on the first landscape.
    pub start_energy: f64,
    pub best_x: Vec<f64>,
    pub best_energy: f64,
    pub final_state: DemonState,
    pub trace: AnnealTrace,
    pub evaluations: EvaluationCount,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Demon,
    Metropolis,
}

// Candidate draws use stream 0 of the seed, Metropolis draws stream 1, so MA
// and SA runs with one seed see the same perturbation sequence.
const PERTURB_STREAM: u64 = 0;
const ACCEPT_STREAM: u64 = 1;

fn measure<O: Objective + ?Sized>(objective: &mut O, x: &[f64]) -> Result<f64, AnnealError> {
    let e = objective.energy(x)?;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(AnnealError::NonFiniteEnergy(e))
    }
}

fn run<O: Objective + ?Sized>(
    rule: Rule,
    objective: &mut O,
    x0: &[f64],
    config: &AnnealConfig,
) -> Result<AnnealOutcome, AnnealError> {
    config.validate()?;
    if x0.len() != objective.dim() {
        return Err(AnnealError::DimensionMismatch {
            expected: objective.dim(),
            found: x0.len(),
        });
    }
    let mut perturb_rng = seeded_stream(config.seed, PERTURB_STREAM);
    let mut accept_rng = seeded_stream(config.seed, ACCEPT_STREAM);
    let mut evaluations = EvaluationCount::default();
    let mut trace = AnnealTrace::default();

    objective.begin_iteration(0);
    evaluations.anchors += 1;
    let e0 = measure(objective, x0)?;
    let mut state = DemonState::new(
        x0.to_vec(),
        e0,
        config.initial_kinetic,
        config.initial_kinetic,
    );
    let kinetic_in_trace = |s: &DemonState| match rule {
        Rule::Demon => s.kinetic,
        Rule::Metropolis => 0.0,
    };

    let mut termination = Termination::MaxIterations;
    let mut candidate = x0.to_vec();
    for it in 0..config.max_iterations {
        if state.best_energy < config.epsilon {
            termination = Termination::BelowEpsilon;
            break;
        }
        if it > 0 && objective.begin_iteration(it) {
            evaluations.anchors += 1;
            let e = measure(objective, &state.x)?;
            state.reanchor(e);
        }
        let (mut accepts, mut rejects) = (0, 0);
        for _ in 0..config.neighborhood_size {
            candidate.copy_from_slice(&state.x);
            perturb_in_place(
                &mut candidate,
                config.delta_scale,
                config.perturbation,
                &mut perturb_rng,
            );
            let e = measure(objective, &candidate)?;
            evaluations.candidates += 1;
            let accepted = match rule {
                Rule::Demon => state.demon_step(&candidate, e) == Decision::Accept,
                Rule::Metropolis => {
                    let delta = e - state.energy;
                    // only uphill moves consume a draw
                    let u = if delta > 0.0 {
                        accept_rng.random::<f64>()
                    } else {
                        0.0
                    };
                    if metropolis_rule(state.temperature, delta, u) {
                        state.move_to(&candidate, e);
                        true
                    } else {
                        false
                    }
                }
            };
            if accepted {
                accepts += 1;
            } else {
                rejects += 1;
            }
        }
        trace.records.push(IterationRecord {
            iteration: it + 1,
            energy: state.energy,
            kinetic: kinetic_in_trace(&state),
            temperature: state.temperature,
            accepts,
            rejects,
            best_energy: state.best_energy,
        });
        state.temperature *= config.cooling_factor;
        if rule == Rule::Demon && !config.strict_microcanonical {
            state.kinetic *= config.cooling_factor;
        }
        objective.end_iteration(it, &state.best_x);
    }

    Ok(AnnealOutcome {
        start_energy: e0,
        best_x: state.best_x.clone(),
        best_energy: state.best_energy,
        final_state: state,
        trace,
        evaluations,
        termination,
    })
}

/// Microcanonical annealing from `x0`; returns the best solution visited.
pub fn anneal_run<O: Objective + ?Sized>(
    objective: &mut O,
    x0: &[f64],
    config: &AnnealConfig,
) -> Result<AnnealOutcome, AnnealError> {
    run(Rule::Demon, objective, x0, config)
}

/// Metropolis simulated annealing under the same schedule and budget as
/// [`anneal_run`]. The starting temperature is `initial_kinetic`.
pub fn sa_run<O: Objective + ?Sized>(
    objective: &mut O,
    x0: &[f64],
    config: &AnnealConfig,
) -> Result<AnnealOutcome, AnnealError> {
    run(Rule::Metropolis, objective, x0, config)
}
