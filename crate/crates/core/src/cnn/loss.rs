use super::CnnError;
use crate::tensor::Tensor;

fn check_pair(predicted: &Tensor, target: &Tensor) -> Result<usize, CnnError> {
    if predicted.shape() != target.shape() {
        return Err(CnnError::ShapeMismatch {
            context: "loss operands",
            expected: target.shape().to_vec(),
            found: predicted.shape().to_vec(),
        });
    }
    match predicted.outer_len() {
        0 => Err(CnnError::EmptyBatch),
        n => Ok(n),
    }
}

/// Half root-mean-square error over a batch:
/// `0.5 * sqrt(sum((target - predicted)^2) / n)` with `n` the number of
/// samples (leading axis), not the number of elements.
pub fn loss(predicted: &Tensor, target: &Tensor) -> Result<f64, CnnError> {
    let n = check_pair(predicted, target)?;
    let sq: f64 = predicted
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok(0.5 * (sq / n as f64).sqrt())
}

/// Loss value and its gradient with respect to `predicted`.
///
/// The gradient is `(predicted - target) / (4 * loss * n)`; at `loss == 0`
/// the square root is not differentiable and the zero subgradient is returned.
pub fn loss_with_grad(predicted: &Tensor, target: &Tensor) -> Result<(f64, Tensor), CnnError> {
    let n = check_pair(predicted, target)?;
    let f = loss(predicted, target)?;
    let mut grad = Tensor::zeros(predicted.shape());
    if f > 0.0 {
        let scale = 1.0 / (4.0 * f * n as f64);
        for ((g, p), t) in grad
            .data_mut()
            .iter_mut()
            .zip(predicted.data())
            .zip(target.data())
        {
            *g = (p - t) * scale;
        }
    }
    Ok((f, grad))
}
