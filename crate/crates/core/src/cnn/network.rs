use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{ConvLayer, DenseOutputLayer, MapShape, SubsampleLayer};
use super::params::{Layout, ParamKind, ParamVector};
use super::CnnError;
use crate::mnist::{MiniBatch, NUM_CLASSES};
use crate::rng::seeded;
use crate::tensor::Tensor;

/// One convolution stage; every stage is followed by a factor-2 subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub maps: usize,
    pub kernel: usize,
}

/// Layer sizes of a conv/subsample stack ending in a dense output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
    pub stages: Vec<StageSpec>,
    pub classes: usize,
}

/// Map shapes around one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShapes {
    pub input: MapShape,
    pub conv: MapShape,
    pub pool: MapShape,
}

impl Architecture {
    /// `i-6c-2s-12c-2s` on 28x28 digits with 5x5 kernels.
    pub fn mnist() -> Self {
        Architecture {
            input_rows: 28,
            input_cols: 28,
            stages: vec![
                StageSpec { maps: 6, kernel: 5 },
                StageSpec {
                    maps: 12,
                    kernel: 5,
                },
            ],
            classes: NUM_CLASSES,
        }
    }

    /// Short notation such as `i-6c-2s-12c-2s`.
    pub fn tag(&self) -> String {
        let mut tag = String::from("i");
        for s in &self.stages {
            tag.push_str(&format!("-{}c-{}s", s.maps, SubsampleLayer::FACTOR));
        }
        tag
    }

    pub fn shape_chain(&self) -> Result<Vec<StageShapes>, CnnError> {
        let mut input = MapShape {
            maps: 1,
            rows: self.input_rows,
            cols: self.input_cols,
        };
        let mut chain = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let conv = ConvLayer::zeros(input.maps, s.maps, s.kernel).output_shape(input)?;
            let pool = SubsampleLayer::zeros(s.maps).output_shape(conv)?;
            chain.push(StageShapes { input, conv, pool });
            input = pool;
        }
        Ok(chain)
    }

    pub fn feature_len(&self) -> Result<usize, CnnError> {
        Ok(match self.shape_chain()?.last() {
            Some(s) => s.pool.len(),
            None => self.input_rows * self.input_cols,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub conv: ConvLayer,
    pub pool: SubsampleLayer,
}

/// Conv/subsample stages followed by a sigmoid classification layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    chain: Vec<StageShapes>,
    pub(crate) stages: Vec<Stage>,
    pub(crate) dense: DenseOutputLayer,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub conv: Vec<Vec<f64>>,
    pub pool: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Network {
    /// Network with every parameter zero except subsampling `beta`, which is 1.
    pub fn zeroed(arch: Architecture) -> Result<Self, CnnError> {
        let chain = arch.shape_chain()?;
        let stages = chain
            .iter()
            .map(|s| Stage {
                conv: ConvLayer::zeros(s.input.maps, s.conv.maps, s.conv_kernel()),
                pool: SubsampleLayer::new(s.conv.maps),
            })
            .collect();
        let dense = DenseOutputLayer::zeros(arch.feature_len()?, arch.classes);
        Ok(Network {
            arch,
            chain,
            stages,
            dense,
        })
    }

    /// Fan-based uniform initialization: weights in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases 0, subsampling beta 1.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self, CnnError> {
        let mut net = Self::zeroed(arch)?;
        let mut rng = seeded(seed);
        for stage in &mut net.stages {
            let k2 = (stage.conv.kernel * stage.conv.kernel) as f64;
            let fan_in = stage.conv.in_maps as f64 * k2;
            let fan_out = stage.conv.out_maps as f64 * k2;
            let bound = (6.0 / (fan_in + fan_out)).sqrt();
            for w in stage.conv.weights.data_mut() {
                *w = rng.random_range(-bound..bound);
            }
        }
        let bound = (6.0 / (net.dense.inputs() + net.dense.outputs()) as f64).sqrt();
        for w in net.dense.weights.data_mut() {
            *w = rng.random_range(-bound..bound);
        }
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn dense(&self) -> &DenseOutputLayer {
        &self.dense
    }

    pub fn shape_chain(&self) -> &[StageShapes] {
        &self.chain
    }

    pub fn layout(&self) -> Layout {
        let mut parts = Vec::new();
        for (s, stage) in self.stages.iter().enumerate() {
            parts.push((
                2 * s,
                ParamKind::ConvWeights,
                stage.conv.weights.shape().to_vec(),
            ));
            parts.push((2 * s, ParamKind::ConvBiases, vec![stage.conv.biases.len()]));
            parts.push((2 * s + 1, ParamKind::PoolBeta, vec![stage.pool.beta.len()]));
            parts.push((
                2 * s + 1,
                ParamKind::PoolBiases,
                vec![stage.pool.biases.len()],
            ));
        }
        let last = 2 * self.stages.len();
        parts.push((
            last,
            ParamKind::DenseWeights,
            self.dense.weights.shape().to_vec(),
        ));
        parts.push((last, ParamKind::DenseBiases, vec![self.dense.biases.len()]));
        Layout::from_shapes(parts)
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for stage in &self.stages {
            out.push(stage.conv.weights.data());
            out.push(&stage.conv.biases);
            out.push(&stage.pool.beta);
            out.push(&stage.pool.biases);
        }
        out.push(self.dense.weights.data());
        out.push(&self.dense.biases);
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for stage in &mut self.stages {
            out.push(stage.conv.weights.data_mut());
            out.push(&mut stage.conv.biases);
            out.push(&mut stage.pool.beta);
            out.push(&mut stage.pool.biases);
        }
        out.push(self.dense.weights.data_mut());
        out.push(&mut self.dense.biases);
        out
    }

    pub fn flatten(&self) -> ParamVector {
        let values = self.param_slices().concat();
        ParamVector {
            values,
            layout: self.layout(),
        }
    }

    /// Overwrites every parameter from `params`.
    pub fn load_params(&mut self, params: &ParamVector) -> Result<(), CnnError> {
        if params.layout != self.layout() {
            return Err(CnnError::LayoutMismatch {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        self.load_values(&params.values)
    }

    /// Overwrites every parameter from a bare slice in layout order.
    pub fn load_values(&mut self, values: &[f64]) -> Result<(), CnnError> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(CnnError::LayoutMismatch {
                expected,
                found: values.len(),
            });
        }
        let mut rest = values;
        for dst in self.param_slices_mut() {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Copy of this network carrying the parameters in `params`.
    pub fn unflatten(&self, params: &ParamVector) -> Result<Network, CnnError> {
        let mut net = self.clone();
        net.load_params(params)?;
        Ok(net)
    }

    /// `params += scale * delta` over every parameter.
    pub fn apply_update(&mut self, scale: f64, delta: &ParamVector) -> Result<(), CnnError> {
        if delta.len() != self.param_count() {
            return Err(CnnError::LayoutMismatch {
                expected: self.param_count(),
                found: delta.len(),
            });
        }
        let mut rest = delta.as_slice();
        for dst in self.param_slices_mut() {
            let (head, tail) = rest.split_at(dst.len());
            for (p, d) in dst.iter_mut().zip(head) {
                *p += scale * d;
            }
            rest = tail;
        }
        Ok(())
    }

    pub(crate) fn zeros_like(&self) -> Network {
        let mut net = self.clone();
        for dst in net.param_slices_mut() {
            dst.fill(0.0);
        }
        net
    }

    pub(crate) fn new_activations(&self) -> Activations {
        Activations {
            conv: self.chain.iter().map(|s| vec![0.0; s.conv.len()]).collect(),
            pool: self.chain.iter().map(|s| vec![0.0; s.pool.len()]).collect(),
            output: vec![0.0; self.arch.classes],
        }
    }

    pub(crate) fn forward_sample(&self, input: &[f64], acts: &mut Activations) {
        for (s, (stage, shapes)) in self.stages.iter().zip(&self.chain).enumerate() {
            let (done, rest) = acts.pool.split_at_mut(s);
            let src: &[f64] = if s == 0 { input } else { &done[s - 1] };
            stage.conv.forward_raw(src, shapes.input, &mut acts.conv[s]);
            stage
                .pool
                .forward_raw(&acts.conv[s], shapes.conv, &mut rest[0]);
        }
        let features: &[f64] = acts.pool.last().map_or(input, |v| v.as_slice());
        self.dense.forward_raw(features, &mut acts.output);
    }

    pub(crate) fn check_inputs(&self, inputs: &Tensor) -> Result<(), CnnError> {
        let expected = [
            inputs.outer_len(),
            self.arch.input_rows,
            self.arch.input_cols,
        ];
        if inputs.shape() != expected {
            return Err(CnnError::ShapeMismatch {
                context: "network input must be (batch, rows, cols)",
                expected: expected.to_vec(),
                found: inputs.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Class scores for a `(batch, rows, cols)` input, shape `(batch, classes)`.
    pub fn forward(&self, inputs: &Tensor) -> Result<Tensor, CnnError> {
        self.check_inputs(inputs)?;
        let n = inputs.outer_len();
        let mut out = Tensor::zeros(&[n, self.arch.classes]);
        let mut acts = self.new_activations();
        for i in 0..n {
            self.forward_sample(inputs.outer(i), &mut acts);
            out.outer_mut(i).copy_from_slice(&acts.output);
        }
        Ok(out)
    }

    pub fn forward_batch(&self, batch: &MiniBatch) -> Result<Tensor, CnnError> {
        self.forward(&batch.inputs)
    }

    /// Intermediate activations of one sample: conv and pool outputs of every
    /// stage, then the class scores.
    pub fn forward_layers(&self, input: &Tensor) -> Result<Vec<Tensor>, CnnError> {
        let batch = Tensor::from_vec(
            &[1, self.arch.input_rows, self.arch.input_cols],
            input.data().to_vec(),
        )?;
        self.check_inputs(&batch)?;
        let mut acts = self.new_activations();
        self.forward_sample(batch.data(), &mut acts);
        let mut out = Vec::new();
        for (s, shapes) in self.chain.iter().enumerate() {
            out.push(Tensor::from_vec(&shapes.conv.dims(), acts.conv[s].clone())?);
            out.push(Tensor::from_vec(&shapes.pool.dims(), acts.pool[s].clone())?);
        }
        out.push(Tensor::from_vec(&[self.arch.classes], acts.output)?);
        Ok(out)
    }
}

impl StageShapes {
    fn conv_kernel(&self) -> usize {
        self.input.rows - self.conv.rows + 1
    }
}
