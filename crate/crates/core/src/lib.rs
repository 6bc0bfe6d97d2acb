//! Convolutional network training with microcanonical annealing refinement.
//!
//! A small `i-6c-2s-12c-2s` CNN is trained on MNIST with mini-batch SGD. After
//! each epoch its flattened weight vector is treated as the state of a
//! Creutz-demon annealer whose potential energy is the batch loss. The
//! [`harness`] module runs the baseline-vs-annealed comparisons and writes
//! reports.

pub mod anneal;
pub mod cnn;
pub mod harness;
pub mod mnist;
pub mod rng;
pub mod tensor;

pub use anneal::{
    anneal_run, sa_run, AnnealConfig, AnnealError, AnnealOutcome, AnnealTrace, Benchmark,
    DemonState, Objective,
};
pub use cnn::{Architecture, CnnError, Network, ParamVector};
pub use mnist::{DataError, Dataset, ImageSet, LabelSet, MiniBatch};
pub use tensor::Tensor;
