use serde::{Deserialize, Serialize};

/// Creutz demon acceptance: a move costing `delta_e` is taken iff the demon
/// can pay for it. Returns the demon's kinetic energy after the move, or
/// `None` on rejection.
///
/// Downhill moves (`delta_e <= 0`) always pass since `kinetic >= 0`, and the
/// released energy is handed to the demon.
#[inline]
pub fn demon_rule(kinetic: f64, delta_e: f64) -> Option<f64> {
    if delta_e <= kinetic {
        Some(kinetic - delta_e)
    } else {
        None
    }
}

/// Metropolis acceptance with uniform draw `u` in `[0, 1)`.
#[inline]
pub fn metropolis_rule(temperature: f64, delta_e: f64, u: f64) -> bool {
    delta_e <= 0.0 || u < (-delta_e / temperature).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// Current solution, its potential energy, the demon's kinetic energy, the
/// annealing temperature and the best solution seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonState {
    pub x: Vec<f64>,
    pub energy: f64,
    pub kinetic: f64,
    pub temperature: f64,
    pub best_x: Vec<f64>,
    pub best_energy: f64,
}

impl DemonState {
    pub fn new(x: Vec<f64>, energy: f64, kinetic: f64, temperature: f64) -> Self {
        DemonState {
            best_x: x.clone(),
            best_energy: energy,
            x,
            energy,
            kinetic,
            temperature,
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.energy + self.kinetic
    }

    /// Applies the demon rule to a candidate; on rejection the state is untouched.
    pub fn demon_step(&mut self, candidate: &[f64], candidate_energy: f64) -> Decision {
        match demon_rule(self.kinetic, candidate_energy - self.energy) {
            Some(kinetic) => {
                self.kinetic = kinetic;
                self.move_to(candidate, candidate_energy);
                Decision::Accept
            }
            None => Decision::Reject,
        }
    }

    pub(crate) fn move_to(&mut self, candidate: &[f64], energy: f64) {
        self.x.copy_from_slice(candidate);
        self.energy = energy;
        self.observe(energy);
    }

    /// Re-measures the current solution on a changed landscape.
    pub(crate) fn reanchor(&mut self, energy: f64) {
        self.energy = energy;
        self.observe(energy);
    }

    fn observe(&mut self, energy: f64) {
        if energy < self.best_energy {
            self.best_energy = energy;
            self.best_x.copy_from_slice(&self.x);
        }
    }
}
