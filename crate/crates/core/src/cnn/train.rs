//! Backpropagation, plain mini-batch SGD and classification accuracy.

use std::borrow::Borrow;

use rayon::prelude::*;

use super::loss::loss_with_grad;
use super::network::{Activations, Network};
use super::params::ParamVector;
use super::CnnError;
use crate::mnist::{LabelSet, MiniBatch};
use crate::tensor::Tensor;

/// Batch loss and its gradient with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: ParamVector,
}

pub fn loss_and_grads(
    net: &Network,
    inputs: &Tensor,
    targets: &Tensor,
) -> Result<LossAndGrad, CnnError> {
    let n = inputs.outer_len();
    net.check_inputs(inputs)?;
    let mut predicted = Tensor::zeros(&[n, net.dense.outputs()]);
    let mut cache = Vec::with_capacity(n);
    for i in 0..n {
        let mut acts = net.new_activations();
        net.forward_sample(inputs.outer(i), &mut acts);
        predicted.outer_mut(i).copy_from_slice(&acts.output);
        cache.push(acts);
    }
    let (loss, d_pred) = loss_with_grad(&predicted, targets)?;
    let mut acc = net.zeros_like();
    if loss == 0.0 {
        return Ok(LossAndGrad {
            loss,
            grads: acc.flatten(),
        });
    }

    let chain = net.shape_chain();
    let mut d_conv: Vec<Vec<f64>> = chain.iter().map(|s| vec![0.0; s.conv.len()]).collect();
    let mut d_pool: Vec<Vec<f64>> = chain.iter().map(|s| vec![0.0; s.pool.len()]).collect();
    let mut d_out = vec![0.0; net.dense.outputs()];

    for (i, acts) in cache.iter().enumerate() {
        d_out.copy_from_slice(d_pred.outer(i));
        backward_sample(
            net,
            inputs.outer(i),
            acts,
            &mut d_out,
            &mut d_conv,
            &mut d_pool,
            &mut acc,
        );
    }
    Ok(LossAndGrad {
        loss,
        grads: acc.flatten(),
    })
}

fn backward_sample(
    net: &Network,
    input: &[f64],
    acts: &Activations,
    d_out: &mut [f64],
    d_conv: &mut [Vec<f64>],
    d_pool: &mut [Vec<f64>],
    acc: &mut Network,
) {
    let chain = net.shape_chain();
    let stages = chain.len();
    let features: &[f64] = acts.pool.last().map_or(input, |v| v.as_slice());
    net.dense.backward_raw(
        features,
        &acts.output,
        d_out,
        &mut acc.dense,
        d_pool.last_mut().map(|v| v.as_mut_slice()),
    );
    for s in (0..stages).rev() {
        let stage = &net.stages[s];
        stage.pool.backward_raw(
            &acts.conv[s],
            chain[s].conv,
            &acts.pool[s],
            &mut d_pool[s],
            &mut acc.stages[s].pool,
            Some(&mut d_conv[s]),
        );
        let src: &[f64] = if s == 0 { input } else { &acts.pool[s - 1] };
        let d_src = if s == 0 {
            None
        } else {
            Some(d_pool[s - 1].as_mut_slice())
        };
        stage.conv.backward_raw(
            src,
            chain[s].input,
            &acts.conv[s],
            &mut d_conv[s],
            &mut acc.stages[s].conv,
            d_src,
        );
    }
}

/// Gradient of the batch loss, laid out like [`Network::flatten`].
pub fn backprop_grads(net: &Network, batch: &MiniBatch) -> Result<ParamVector, CnnError> {
    Ok(loss_and_grads(net, &batch.inputs, &batch.targets)?.grads)
}

/// One gradient step; returns the loss measured before the step.
pub fn sgd_step(net: &mut Network, batch: &MiniBatch, learning_rate: f64) -> Result<f64, CnnError> {
    let LossAndGrad { loss, grads } = loss_and_grads(net, &batch.inputs, &batch.targets)?;
    if !loss.is_finite() || !grads.values.iter().all(|g| g.is_finite()) {
        return Err(CnnError::Diverged { loss });
    }
    net.apply_update(-learning_rate, &grads)?;
    Ok(loss)
}

/// Runs one SGD step per batch, in order, and returns the mean batch loss.
pub fn sgd_epoch<I>(net: &mut Network, batches: I, learning_rate: f64) -> Result<f64, CnnError>
where
    I: IntoIterator,
    I::Item: Borrow<MiniBatch>,
{
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(CnnError::InvalidLearningRate(learning_rate));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for batch in batches {
        total += sgd_step(net, batch.borrow(), learning_rate)?;
        count += 1;
    }
    if count == 0 {
        return Err(CnnError::EmptyBatch);
    }
    Ok(total / count as f64)
}

const PREDICT_CHUNK: usize = 256;

/// Predicted class per sample (lowest index wins ties).
pub fn predict(net: &Network, images: &Tensor) -> Result<Vec<usize>, CnnError> {
    let n = images.outer_len();
    let chunks: Vec<usize> = (0..n).step_by(PREDICT_CHUNK).collect();
    let parts = chunks
        .par_iter()
        .map(|&start| {
            let idx: Vec<usize> = (start..(start + PREDICT_CHUNK).min(n)).collect();
            net.forward(&images.gather(&idx))
                .map(|out| out.argmax_rows())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.concat())
}

/// Percentage of samples whose predicted class equals the label.
pub fn accuracy(net: &Network, images: &Tensor, labels: &LabelSet) -> Result<f64, CnnError> {
    if images.outer_len() != labels.count() {
        return Err(CnnError::ShapeMismatch {
            context: "accuracy images vs labels",
            expected: vec![labels.count()],
            found: vec![images.outer_len()],
        });
    }
    if labels.count() == 0 {
        return Ok(0.0);
    }
    let predicted = predict(net, images)?;
    let correct = predicted
        .iter()
        .zip(&labels.labels)
        .filter(|(p, &l)| **p == l as usize)
        .count();
    Ok(100.0 * correct as f64 / labels.count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{loss, Architecture, StageSpec};
    use crate::mnist::one_hot;
    use crate::rng::seeded;
    use rand::Rng;

    fn tiny_arch() -> Architecture {
        Architecture {
            input_rows: 8,
            input_cols: 8,
            stages: vec![StageSpec { maps: 1, kernel: 5 }],
            classes: 10,
        }
    }

    fn random_batch(n: usize, rows: usize, cols: usize, seed: u64) -> MiniBatch {
        let mut rng = seeded(seed);
        let inputs = Tensor::from_vec(
            &[n, rows, cols],
            (0..n * rows * cols).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
        MiniBatch {
            targets: one_hot(&labels),
            inputs,
            indices: (0..n).collect(),
            labels,
        }
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        let net = Network::init(tiny_arch(), 1).unwrap();
        let mut batch = random_batch(4, 8, 8, 2);
        batch.targets = net.forward(&batch.inputs).unwrap();
        let g = backprop_grads(&net, &batch).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn gradients_are_deterministic() {
        let net = Network::init(Architecture::mnist(), 5).unwrap();
        let batch = random_batch(3, 28, 28, 6);
        let a = backprop_grads(&net, &batch).unwrap();
        let b = backprop_grads(&net.clone(), &batch.clone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_rate_leaves_network_unchanged() {
        let mut net = Network::init(tiny_arch(), 7).unwrap();
        let before = net.clone();
        let batches = vec![random_batch(5, 8, 8, 8), random_batch(5, 8, 8, 9)];
        let mean = sgd_epoch(&mut net, &batches, 0.0).unwrap();
        assert_eq!(net, before);
        let expected = batches
            .iter()
            .map(|b| loss(&before.forward_batch(b).unwrap(), &b.targets).unwrap())
            .sum::<f64>()
            / 2.0;
        assert_eq!(mean, expected);
    }

    #[test]
    fn small_step_decreases_loss() {
        let mut net = Network::init(tiny_arch(), 10).unwrap();
        let batch = random_batch(8, 8, 8, 11);
        let before = loss(&net.forward_batch(&batch).unwrap(), &batch.targets).unwrap();
        let mut rate = 1.0;
        // halve the step until it is inside the locally quadratic regime
        let after = loop {
            let mut trial = net.clone();
            sgd_step(&mut trial, &batch, rate).unwrap();
            let after = loss(&trial.forward_batch(&batch).unwrap(), &batch.targets).unwrap();
            if after <= before || rate < 1e-8 {
                net = trial;
                break after;
            }
            rate /= 2.0;
        };
        assert!(after <= before);
        assert!(net.param_count() > 0);
    }

    #[test]
    fn negative_rate_rejected() {
        let mut net = Network::init(tiny_arch(), 0).unwrap();
        let batches = vec![random_batch(2, 8, 8, 0)];
        assert!(matches!(
            sgd_epoch(&mut net, &batches, -1.0),
            Err(CnnError::InvalidLearningRate(_))
        ));
    }

    #[test]
    fn accuracy_of_perfect_and_constant_predictors() {
        // a net with no conv stages whose dense layer copies a one-hot input
        let arch = Architecture {
            input_rows: 1,
            input_cols: 10,
            stages: vec![],
            classes: 10,
        };
        let mut net = Network::zeroed(arch).unwrap();
        for j in 0..10 {
            net.dense.weights.data_mut()[j * 10 + j] = 10.0;
        }
        let labels = LabelSet {
            labels: (0..50).map(|i| (i * 3 % 10) as u8).collect(),
        };
        let images = one_hot(&labels.labels);
        let images = Tensor::from_vec(&[50, 1, 10], images.into_data()).unwrap();
        assert_eq!(accuracy(&net, &images, &labels).unwrap(), 100.0);

        // constant predictor: every output equal, tie goes to class 0
        let constant = Network::zeroed(net.architecture().clone()).unwrap();
        let mut rng = seeded(42);
        let random = LabelSet {
            labels: (0..10_000).map(|_| rng.random_range(0..10)).collect(),
        };
        let images = Tensor::zeros(&[10_000, 1, 10]);
        let acc = accuracy(&constant, &images, &random).unwrap();
        assert!((acc - 10.0).abs() <= 1.0, "{acc}");
    }
}
