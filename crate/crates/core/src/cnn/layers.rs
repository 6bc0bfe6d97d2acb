//! Layer kernels. Each layer works on one sample at a time; feature maps are
//! laid out `(maps, rows, cols)` row-major.

use serde::{Deserialize, Serialize};

use super::CnnError;
use crate::tensor::Tensor;

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Spatial size of a feature-map stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapShape {
    pub maps: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MapShape {
    pub fn len(&self) -> usize {
        self.maps * self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.maps, self.rows, self.cols]
    }

    fn of(input: &Tensor) -> Result<Self, CnnError> {
        match *input.shape() {
            [rows, cols] => Ok(MapShape {
                maps: 1,
                rows,
                cols,
            }),
            [maps, rows, cols] => Ok(MapShape { maps, rows, cols }),
            _ => Err(CnnError::ShapeMismatch {
                context: "feature map input must be (maps, rows, cols)",
                expected: vec![0, 0, 0],
                found: input.shape().to_vec(),
            }),
        }
    }
}

/// Valid cross-correlation of every input map with a `kernel x kernel`
/// filter, summed over input maps, plus a per-output-map bias, through tanh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_maps: usize,
    pub out_maps: usize,
    pub kernel: usize,
    /// `(out_maps, in_maps, kernel, kernel)`.
    pub weights: Tensor,
    pub biases: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(in_maps: usize, out_maps: usize, kernel: usize) -> Self {
        ConvLayer {
            in_maps,
            out_maps,
            kernel,
            weights: Tensor::zeros(&[out_maps, in_maps, kernel, kernel]),
            biases: vec![0.0; out_maps],
        }
    }

    pub fn output_shape(&self, input: MapShape) -> Result<MapShape, CnnError> {
        if input.maps != self.in_maps {
            return Err(CnnError::ShapeMismatch {
                context: "convolution input maps",
                expected: vec![self.in_maps],
                found: vec![input.maps],
            });
        }
        if input.rows < self.kernel || input.cols < self.kernel {
            return Err(CnnError::ShapeMismatch {
                context: "convolution input smaller than kernel",
                expected: vec![self.kernel, self.kernel],
                found: vec![input.rows, input.cols],
            });
        }
        Ok(MapShape {
            maps: self.out_maps,
            rows: input.rows - self.kernel + 1,
            cols: input.cols - self.kernel + 1,
        })
    }

    /// Forward pass on a `(in_maps, rows, cols)` or `(rows, cols)` tensor.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, CnnError> {
        let in_shape = MapShape::of(input)?;
        let out_shape = self.output_shape(in_shape)?;
        let mut out = vec![0.0; out_shape.len()];
        self.forward_raw(input.data(), in_shape, &mut out);
        Tensor::from_vec(&out_shape.dims(), out)
    }

    pub(crate) fn forward_raw(&self, input: &[f64], shape: MapShape, out: &mut [f64]) {
        let k = self.kernel;
        let (oh, ow) = (shape.rows - k + 1, shape.cols - k + 1);
        let w = self.weights.data();
        let in_plane = shape.rows * shape.cols;
        for o in 0..self.out_maps {
            let out_map = &mut out[o * oh * ow..(o + 1) * oh * ow];
            out_map.fill(self.biases[o]);
            for i in 0..self.in_maps {
                let in_map = &input[i * in_plane..(i + 1) * in_plane];
                let kern = &w[(o * self.in_maps + i) * k * k..][..k * k];
                for kr in 0..k {
                    for kc in 0..k {
                        let wv = kern[kr * k + kc];
                        for r in 0..oh {
                            let src = &in_map[(r + kr) * shape.cols + kc..][..ow];
                            let dst = &mut out_map[r * ow..(r + 1) * ow];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
            for v in out_map.iter_mut() {
                *v = v.tanh();
            }
        }
    }

    /// Accumulates parameter gradients into `grad` and, if requested, writes
    /// the gradient with respect to the input into `d_input`.
    ///
    /// `d_output` is the gradient with respect to this layer's (post-tanh)
    /// output and is overwritten with the pre-activation gradient.
    pub(crate) fn backward_raw(
        &self,
        input: &[f64],
        shape: MapShape,
        output: &[f64],
        d_output: &mut [f64],
        grad: &mut ConvLayer,
        d_input: Option<&mut [f64]>,
    ) {
        let k = self.kernel;
        let (oh, ow) = (shape.rows - k + 1, shape.cols - k + 1);
        let in_plane = shape.rows * shape.cols;
        for (d, y) in d_output.iter_mut().zip(output) {
            *d *= 1.0 - y * y;
        }
        let w = self.weights.data();
        let gw = grad.weights.data_mut();
        for o in 0..self.out_maps {
            let dz = &d_output[o * oh * ow..(o + 1) * oh * ow];
            grad.biases[o] += dz.iter().sum::<f64>();
            for i in 0..self.in_maps {
                let in_map = &input[i * in_plane..(i + 1) * in_plane];
                let gk = &mut gw[(o * self.in_maps + i) * k * k..][..k * k];
                for kr in 0..k {
                    for kc in 0..k {
                        let mut acc = 0.0;
                        for r in 0..oh {
                            let src = &in_map[(r + kr) * shape.cols + kc..][..ow];
                            let d = &dz[r * ow..(r + 1) * ow];
                            acc += d.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        }
                        gk[kr * k + kc] += acc;
                    }
                }
            }
        }
        if let Some(d_in) = d_input {
            d_in.fill(0.0);
            for o in 0..self.out_maps {
                let dz = &d_output[o * oh * ow..(o + 1) * oh * ow];
                for i in 0..self.in_maps {
                    let d_map = &mut d_in[i * in_plane..(i + 1) * in_plane];
                    let kern = &w[(o * self.in_maps + i) * k * k..][..k * k];
                    for kr in 0..k {
                        for kc in 0..k {
                            let wv = kern[kr * k + kc];
                            for r in 0..oh {
                                let dst = &mut d_map[(r + kr) * shape.cols + kc..][..ow];
                                let d = &dz[r * ow..(r + 1) * ow];
                                for (t, s) in dst.iter_mut().zip(d) {
                                    *t += wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Trainable pooling: each output is `tanh(beta * sum of a 2x2 block + bias)`,
/// with one `beta` and one bias per map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleLayer {
    pub beta: Vec<f64>,
    pub biases: Vec<f64>,
}

impl SubsampleLayer {
    pub const FACTOR: usize = 2;

    pub fn new(maps: usize) -> Self {
        SubsampleLayer {
            beta: vec![1.0; maps],
            biases: vec![0.0; maps],
        }
    }

    pub fn zeros(maps: usize) -> Self {
        SubsampleLayer {
            beta: vec![0.0; maps],
            biases: vec![0.0; maps],
        }
    }

    pub fn maps(&self) -> usize {
        self.beta.len()
    }

    pub fn output_shape(&self, input: MapShape) -> Result<MapShape, CnnError> {
        if input.maps != self.maps() {
            return Err(CnnError::ShapeMismatch {
                context: "subsample input maps",
                expected: vec![self.maps()],
                found: vec![input.maps],
            });
        }
        if input.rows % Self::FACTOR != 0 || input.cols % Self::FACTOR != 0 || input.rows == 0 {
            return Err(CnnError::OddSpatialSize {
                rows: input.rows,
                cols: input.cols,
            });
        }
        Ok(MapShape {
            maps: input.maps,
            rows: input.rows / Self::FACTOR,
            cols: input.cols / Self::FACTOR,
        })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, CnnError> {
        let in_shape = MapShape::of(input)?;
        let out_shape = self.output_shape(in_shape)?;
        let mut out = vec![0.0; out_shape.len()];
        self.forward_raw(input.data(), in_shape, &mut out);
        Tensor::from_vec(&out_shape.dims(), out)
    }

    fn block_sum(input: &[f64], cols: usize, r: usize, c: usize) -> f64 {
        let top = 2 * r * cols + 2 * c;
        let bottom = top + cols;
        input[top] + input[top + 1] + input[bottom] + input[bottom + 1]
    }

    pub(crate) fn forward_raw(&self, input: &[f64], shape: MapShape, out: &mut [f64]) {
        let (oh, ow) = (shape.rows / 2, shape.cols / 2);
        let in_plane = shape.rows * shape.cols;
        for m in 0..shape.maps {
            let src = &input[m * in_plane..(m + 1) * in_plane];
            let dst = &mut out[m * oh * ow..(m + 1) * oh * ow];
            for r in 0..oh {
                for c in 0..ow {
                    let s = Self::block_sum(src, shape.cols, r, c);
                    dst[r * ow + c] = (self.beta[m] * s + self.biases[m]).tanh();
                }
            }
        }
    }

    pub(crate) fn backward_raw(
        &self,
        input: &[f64],
        shape: MapShape,
        output: &[f64],
        d_output: &mut [f64],
        grad: &mut SubsampleLayer,
        d_input: Option<&mut [f64]>,
    ) {
        let (oh, ow) = (shape.rows / 2, shape.cols / 2);
        let in_plane = shape.rows * shape.cols;
        for (d, y) in d_output.iter_mut().zip(output) {
            *d *= 1.0 - y * y;
        }
        for m in 0..shape.maps {
            let src = &input[m * in_plane..(m + 1) * in_plane];
            let dz = &d_output[m * oh * ow..(m + 1) * oh * ow];
            let mut g_beta = 0.0;
            for r in 0..oh {
                for c in 0..ow {
                    g_beta += dz[r * ow + c] * Self::block_sum(src, shape.cols, r, c);
                }
            }
            grad.beta[m] += g_beta;
            grad.biases[m] += dz.iter().sum::<f64>();
        }
        if let Some(d_in) = d_input {
            for m in 0..shape.maps {
                let dz = &d_output[m * oh * ow..(m + 1) * oh * ow];
                let d_map = &mut d_in[m * in_plane..(m + 1) * in_plane];
                for r in 0..oh {
                    for c in 0..ow {
                        let g = self.beta[m] * dz[r * ow + c];
                        let top = 2 * r * shape.cols + 2 * c;
                        let bottom = top + shape.cols;
                        d_map[top] = g;
                        d_map[top + 1] = g;
                        d_map[bottom] = g;
                        d_map[bottom + 1] = g;
                    }
                }
            }
        }
    }
}

/// Fully connected classification layer with sigmoid outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOutputLayer {
    /// `(outputs, inputs)`.
    pub weights: Tensor,
    pub biases: Vec<f64>,
}

impl DenseOutputLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseOutputLayer {
            weights: Tensor::zeros(&[outputs, inputs]),
            biases: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    /// Forward pass on any tensor whose flattened length matches the input width.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, CnnError> {
        if input.len() != self.inputs() {
            return Err(CnnError::ShapeMismatch {
                context: "dense input length",
                expected: vec![self.inputs()],
                found: vec![input.len()],
            });
        }
        let mut out = vec![0.0; self.outputs()];
        self.forward_raw(input.data(), &mut out);
        Tensor::from_vec(&[self.outputs()], out)
    }

    pub(crate) fn forward_raw(&self, input: &[f64], out: &mut [f64]) {
        let n = self.inputs();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights.data()[j * n..(j + 1) * n];
            let z = self.biases[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            *o = sigmoid(z);
        }
    }

    pub(crate) fn backward_raw(
        &self,
        input: &[f64],
        output: &[f64],
        d_output: &mut [f64],
        grad: &mut DenseOutputLayer,
        d_input: Option<&mut [f64]>,
    ) {
        let n = self.inputs();
        for (d, y) in d_output.iter_mut().zip(output) {
            *d *= y * (1.0 - y);
        }
        let gw = grad.weights.data_mut();
        for (j, &dz) in d_output.iter().enumerate() {
            grad.biases[j] += dz;
            for (g, x) in gw[j * n..(j + 1) * n].iter_mut().zip(input) {
                *g += dz * x;
            }
        }
        if let Some(d_in) = d_input {
            d_in.fill(0.0);
            for (j, &dz) in d_output.iter().enumerate() {
                let row = &self.weights.data()[j * n..(j + 1) * n];
                for (t, w) in d_in.iter_mut().zip(row) {
                    *t += w * dz;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Scalar oracle: out[o][r][c] = tanh(b[o] + sum_i sum_kr sum_kc w[o][i][kr][kc] * x[i][r+kr][c+kc])
    fn conv_oracle(layer: &ConvLayer, x: &Tensor) -> Vec<f64> {
        let [maps, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2]];
        let k = layer.kernel;
        let mut out = Vec::new();
        for o in 0..layer.out_maps {
            for r in 0..=h - k {
                for c in 0..=w - k {
                    let mut s = layer.biases[o];
                    for i in 0..maps {
                        for kr in 0..k {
                            for kc in 0..k {
                                let wi = ((o * maps + i) * k + kr) * k + kc;
                                let xi = (i * h + r + kr) * w + c + kc;
                                s += layer.weights.data()[wi] * x.data()[xi];
                            }
                        }
                    }
                    out.push(s.tanh());
                }
            }
        }
        out
    }

    fn pseudo(n: usize, salt: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (i as f64 * 0.7 + salt).sin() * 0.5)
            .collect()
    }

    #[test]
    fn mnist_first_layer_shape() {
        let layer = ConvLayer::zeros(1, 6, 5);
        let out = layer.forward(&Tensor::zeros(&[28, 28])).unwrap();
        assert_eq!(out.shape(), &[6, 24, 24]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ones_kernel_on_constant_input() {
        let mut layer = ConvLayer::zeros(1, 1, 5);
        layer.weights.data_mut().fill(1.0);
        let x = Tensor::filled(&[1, 6, 6], 0.1);
        let out = layer.forward(&x).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        let oracle = conv_oracle(&layer, &x);
        for (a, b) in out.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
            assert!((a - 2.5f64.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_scalar_oracle() {
        let mut layer = ConvLayer::zeros(3, 4, 3);
        layer.weights = Tensor::from_vec(&[4, 3, 3, 3], pseudo(108, 0.3)).unwrap();
        layer.biases = pseudo(4, 1.1);
        let x = Tensor::from_vec(&[3, 7, 6], pseudo(126, 2.0)).unwrap();
        let out = layer.forward(&x).unwrap();
        assert_eq!(out.shape(), &[4, 5, 4]);
        for (a, b) in out.data().iter().zip(conv_oracle(&layer, &x)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn conv_rejects_map_mismatch() {
        let layer = ConvLayer::zeros(6, 12, 5);
        assert!(matches!(
            layer.forward(&Tensor::zeros(&[5, 12, 12])),
            Err(CnnError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn subsample_shapes_and_values() {
        let layer = SubsampleLayer::new(1);
        assert_eq!(
            layer.forward(&Tensor::zeros(&[1, 24, 24])).unwrap().shape(),
            &[1, 12, 12]
        );
        let zero = SubsampleLayer::zeros(2);
        let out = zero.forward(&Tensor::filled(&[2, 4, 4], 0.9)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));

        let quarter = SubsampleLayer {
            beta: vec![0.25],
            biases: vec![0.0],
        };
        let out = quarter.forward(&Tensor::filled(&[1, 4, 4], 0.5)).unwrap();
        // oracle: tanh(0.25 * (0.5 + 0.5 + 0.5 + 0.5) + 0)
        let expected = (0.25 * (4.0 * 0.5) + 0.0f64).tanh();
        assert!(out.data().iter().all(|&v| v == expected));
        assert!((expected - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn subsample_rejects_odd_size() {
        let layer = SubsampleLayer::new(1);
        assert!(matches!(
            layer.forward(&Tensor::zeros(&[1, 5, 4])),
            Err(CnnError::OddSpatialSize { rows: 5, cols: 4 })
        ));
    }

    #[test]
    fn dense_zero_gives_half() {
        let layer = DenseOutputLayer::zeros(7, 10);
        let out = layer.forward(&Tensor::filled(&[7], 3.0)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn dense_saturates_toward_strong_weight() {
        let mut layer = DenseOutputLayer::zeros(3, 10);
        layer.weights.data_mut()[4 * 3 + 1] = 50.0;
        let out = layer
            .forward(&Tensor::from_vec(&[3], vec![0.0, 1.0, 0.0]).unwrap())
            .unwrap();
        assert!(out.data()[4] > 0.999_999);
        assert_eq!(out.argmax_rows_flat(), 4);
    }

    #[test]
    fn dense_matches_dot_product_oracle() {
        let mut layer = DenseOutputLayer::zeros(12, 10);
        layer.weights = Tensor::from_vec(&[10, 12], pseudo(120, 0.9)).unwrap();
        layer.biases = pseudo(10, 4.0);
        let x = Tensor::from_vec(&[12], pseudo(12, 7.0)).unwrap();
        let out = layer.forward(&x).unwrap();
        for j in 0..10 {
            let mut z = layer.biases[j];
            for i in 0..12 {
                z += layer.weights.data()[j * 12 + i] * x.data()[i];
            }
            assert!((out.data()[j] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_rejects_length_mismatch() {
        let layer = DenseOutputLayer::zeros(4, 10);
        assert!(layer.forward(&Tensor::zeros(&[5])).is_err());
    }

    impl Tensor {
        fn argmax_rows_flat(&self) -> usize {
            Tensor::from_vec(&[1, self.len()], self.data().to_vec())
                .unwrap()
                .argmax_rows()[0]
        }
    }
}
