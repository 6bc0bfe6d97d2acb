//! Flat parameter-vector view of a [`Network`](super::Network).
//!
//! Segments are ordered stage by stage (conv weights, conv biases, pool beta,
//! pool biases) and end with the dense weights and biases.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::CnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    ConvWeights,
    ConvBiases,
    PoolBeta,
    PoolBiases,
    DenseWeights,
    DenseBiases,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Position in the layer stack: conv/pool pairs occupy `2s` and `2s + 1`,
    /// the dense layer comes last.
    pub layer: usize,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub segments: Vec<Segment>,
}

impl Layout {
    pub(crate) fn from_shapes(parts: Vec<(usize, ParamKind, Vec<usize>)>) -> Self {
        let mut offset = 0;
        let segments = parts
            .into_iter()
            .map(|(layer, kind, shape)| {
                let seg = Segment {
                    layer,
                    kind,
                    shape,
                    offset,
                };
                offset += seg.len();
                seg
            })
            .collect();
        Layout { segments }
    }

    pub fn total_len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len())
    }

    /// The segment holding flat coordinate `index`, and the position inside it.
    pub fn locate(&self, index: usize) -> Option<(&Segment, usize)> {
        self.segments
            .iter()
            .find(|s| s.range().contains(&index))
            .map(|s| (s, index - s.offset))
    }
}

/// All trainable values of a network, concatenated in [`Layout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        ParamVector {
            values: vec![0.0; layout.total_len()],
            layout,
        }
    }

    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self, CnnError> {
        if values.len() != layout.total_len() {
            return Err(CnnError::LayoutMismatch {
                expected: layout.total_len(),
                found: values.len(),
            });
        }
        Ok(ParamVector { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &ParamVector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn segment(&self, seg: &Segment) -> &[f64] {
        &self.values[seg.range()]
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_contiguous() {
        let layout = Layout::from_shapes(vec![
            (0, ParamKind::ConvWeights, vec![2, 1, 3, 3]),
            (0, ParamKind::ConvBiases, vec![2]),
            (2, ParamKind::DenseBiases, vec![10]),
        ]);
        assert_eq!(layout.total_len(), 30);
        assert_eq!(layout.segments[1].offset, 18);
        assert_eq!(layout.segments[2].offset, 20);
        let (seg, pos) = layout.locate(19).unwrap();
        assert_eq!((seg.kind, pos), (ParamKind::ConvBiases, 1));
        assert!(layout.locate(30).is_none());
    }

    #[test]
    fn rejects_wrong_length() {
        let layout = Layout::from_shapes(vec![(0, ParamKind::DenseBiases, vec![10])]);
        assert!(ParamVector::new(layout.clone(), vec![0.0; 9]).is_err());
        assert!(ParamVector::new(layout, vec![0.0; 10]).is_ok());
    }
}
