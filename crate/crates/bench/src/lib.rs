//! Shared fixtures for the benchmarks.

use cnnma::mnist::{make_batches, LabelSet, MiniBatch};
use cnnma::rng::seeded;
use cnnma::Tensor;
use rand::Rng;

/// `count` batches of random 28x28 images with cycling labels.
pub fn random_batches(count: usize, batch_size: usize, seed: u64) -> Vec<MiniBatch> {
    let n = count * batch_size;
    let mut rng = seeded(seed);
    let images = Tensor::from_vec(
        &[n, 28, 28],
        (0..n * 784).map(|_| rng.random::<f64>()).collect(),
    )
    .expect("shape matches data");
    let labels = LabelSet {
        labels: (0..n).map(|i| (i % 10) as u8).collect(),
    };
    make_batches(&images, &labels, batch_size, seed).expect("non-empty batches")
}
