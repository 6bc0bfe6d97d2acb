use super::{AnnealError, Objective};
use crate::cnn::{loss, Network};
use crate::mnist::MiniBatch;

/// Network loss as a function of the flattened parameter vector.
///
/// Outer iteration `k` evaluates on batch `k mod batches.len()`, so the
/// landscape is fixed within an equilibrium loop. After every iteration the
/// incumbent is written back into the live network.
pub struct CnnObjective {
    scratch: Network,
    live: Network,
    batches: Vec<MiniBatch>,
    current: usize,
}

impl CnnObjective {
    pub fn new(net: &Network, batches: Vec<MiniBatch>) -> Result<Self, AnnealError> {
        if batches.is_empty() {
            return Err(AnnealError::Objective(
                "CNN objective needs at least one batch".into(),
            ));
        }
        Ok(CnnObjective {
            scratch: net.clone(),
            live: net.clone(),
            batches,
            current: 0,
        })
    }

    pub fn current_batch(&self) -> &MiniBatch {
        &self.batches[self.current]
    }

    pub fn live_network(&self) -> &Network {
        &self.live
    }

    pub fn into_network(self) -> Network {
        self.live
    }
}

impl Objective for CnnObjective {
    fn dim(&self) -> usize {
        self.scratch.param_count()
    }

    fn energy(&mut self, x: &[f64]) -> Result<f64, AnnealError> {
        let err = |e: crate::cnn::CnnError| AnnealError::Objective(e.to_string());
        self.scratch.load_values(x).map_err(err)?;
        let batch = &self.batches[self.current];
        let out = self.scratch.forward(&batch.inputs).map_err(err)?;
        loss(&out, &batch.targets).map_err(err)
    }

    fn begin_iteration(&mut self, iteration: usize) -> bool {
        let next = iteration % self.batches.len();
        let changed = next != self.current;
        self.current = next;
        changed
    }

    fn end_iteration(&mut self, _iteration: usize, incumbent: &[f64]) {
        self.live
            .load_values(incumbent)
            .expect("incumbent has the objective's dimension");
    }
}
