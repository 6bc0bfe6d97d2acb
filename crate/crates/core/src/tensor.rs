//! Dense row-major `f64` tensor.

use serde::{Deserialize, Serialize};

use crate::cnn::CnnError;

/// Dense multi-dimensional array stored contiguously in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    /// Wraps `data` with the given shape; fails if the lengths disagree.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, CnnError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CnnError::ShapeMismatch {
                context: "tensor construction",
                expected: shape.to_vec(),
                found: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Size of the leading axis (0 for a rank-0 tensor).
    pub fn outer_len(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of elements in one slice along the leading axis.
    pub fn inner_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    /// The `i`-th slice along the leading axis.
    pub fn outer(&self, i: usize) -> &[f64] {
        let n = self.inner_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn outer_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.inner_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    /// Copies the listed leading-axis slices into a new tensor.
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let n = self.inner_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.outer(i));
        }
        let mut shape = self.shape.clone();
        if let Some(first) = shape.first_mut() {
            *first = indices.len();
        }
        Tensor { shape, data }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the largest element of each leading-axis slice. Ties go to
    /// the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.outer_len())
            .map(|i| {
                let row = self.outer(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}
