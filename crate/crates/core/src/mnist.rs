//! MNIST ingestion: IDX parsing, pixel normalization and seeded mini-batches.
//!
//! IDX layout (all integers big-endian):
//!
//! ```text
//! images: 0x00000803 | count u32 | rows u32 | cols u32 | count*rows*cols u8
//! labels: 0x00000801 | count u32 | count u8
//! ```
//!
//! Files may be raw or gzip-compressed; compression is detected from the
//! `1f 8b` gzip magic rather than the file extension.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded;
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed IDX magic: expected {expected:#010x}, found {found:#010x}")]
    MalformedMagic { expected: u32, found: u32 },
    #[error("truncated IDX data: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("IDX dimensions overflow the addressable size")]
    DimensionOverflow,
    #[error("IDX payload has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("label {label} at index {index} is not a digit class")]
    InvalidLabel { index: usize, label: u8 },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no MNIST file matching {0} found")]
    MissingFile(String),
}

/// Raw unsigned-byte images as stored in an IDX rank-3 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<u8>,
}

impl LabelSet {
    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn gather(&self, indices: &[usize]) -> LabelSet {
        LabelSet {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// One training step's worth of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    /// `(batch, rows, cols)`, values in `[0, 1]`.
    pub inputs: Tensor,
    /// One-hot `(batch, 10)`.
    pub targets: Tensor,
    pub labels: Vec<u8>,
    /// Positions of the samples in the source set.
    pub indices: Vec<usize>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    let end = offset + 4;
    let word = bytes.get(offset..end).ok_or(DataError::Truncated {
        expected: end,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([word[0], word[1], word[2], word[3]]))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), DataError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(DataError::MalformedMagic { expected, found });
    }
    Ok(())
}

fn take_payload(bytes: &[u8], header: usize, len: usize) -> Result<&[u8], DataError> {
    let expected = header
        .checked_add(len)
        .ok_or(DataError::DimensionOverflow)?;
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DataError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    Ok(&bytes[header..])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageSet, DataError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or(DataError::DimensionOverflow)?;
    let pixels = take_payload(bytes, 16, len)?.to_vec();
    Ok(ImageSet {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelSet, DataError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let labels = take_payload(bytes, 8, count)?.to_vec();
    if let Some((index, &label)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= NUM_CLASSES)
    {
        return Err(DataError::InvalidLabel { index, label });
    }
    Ok(LabelSet { labels })
}

pub fn encode_idx_images(images: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for dim in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &LabelSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.labels.len() as u32).to_be_bytes());
    out.extend_from_slice(&labels.labels);
    out
}

/// Reads a file, transparently inflating it if it starts with the gzip magic.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>, DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = fs::read(path).map_err(io_err)?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_images(path: &Path) -> Result<ImageSet, DataError> {
    parse_idx_images(&read_maybe_gzip(path)?)
}

pub fn load_labels(path: &Path) -> Result<LabelSet, DataError> {
    parse_idx_labels(&read_maybe_gzip(path)?)
}

/// Maps every pixel to `value / 255`, giving a `(count, rows, cols)` tensor.
pub fn normalize(images: &ImageSet) -> Tensor {
    let data = images
        .pixels
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    Tensor::from_vec(&[images.count, images.rows, images.cols], data)
        .expect("ImageSet invariant: pixel length equals count*rows*cols")
}

pub fn one_hot(labels: &[u8]) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), NUM_CLASSES]);
    for (i, &l) in labels.iter().enumerate() {
        t.outer_mut(i)[l as usize] = 1.0;
    }
    t
}

/// Assembles a batch from explicit sample positions.
pub fn batch_from_indices(images: &Tensor, labels: &LabelSet, indices: &[usize]) -> MiniBatch {
    let picked = labels.gather(indices);
    MiniBatch {
        inputs: images.gather(indices),
        targets: one_hot(&picked.labels),
        labels: picked.labels,
        indices: indices.to_vec(),
    }
}

/// Shuffles all samples with a seed-determined permutation and cuts them
/// into batches of `batch_size`; a trailing short batch is kept.
pub fn make_batches(
    images: &Tensor,
    labels: &LabelSet,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<MiniBatch>, DataError> {
    if batch_size == 0 {
        return Err(DataError::ZeroBatchSize);
    }
    if images.outer_len() != labels.count() {
        return Err(DataError::CountMismatch {
            images: images.outer_len(),
            labels: labels.count(),
        });
    }
    let order = shuffled_order(labels.count(), seed);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| batch_from_indices(images, labels, chunk))
        .collect())
}

/// Same batches as [`make_batches`], assembled one at a time.
pub fn batch_iter<'a>(
    images: &'a Tensor,
    labels: &'a LabelSet,
    batch_size: usize,
    seed: u64,
) -> Result<impl Iterator<Item = MiniBatch> + 'a, DataError> {
    if batch_size == 0 {
        return Err(DataError::ZeroBatchSize);
    }
    if images.outer_len() != labels.count() {
        return Err(DataError::CountMismatch {
            images: images.outer_len(),
            labels: labels.count(),
        });
    }
    let order = shuffled_order(labels.count(), seed);
    let starts = (0..order.len()).step_by(batch_size);
    Ok(starts.map(move |s| {
        let end = (s + batch_size).min(order.len());
        batch_from_indices(images, labels, &order[s..end])
    }))
}

pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    order
}

/// Picks the first `k` samples in file order while keeping classes balanced:
/// each class gets `k / 10` slots, and the first `k % 10` classes one more.
/// Classes too rare to fill their quota leave the remaining slots empty.
pub fn stratified_subset(labels: &LabelSet, k: usize) -> Vec<usize> {
    let base = k / NUM_CLASSES;
    let extra = k % NUM_CLASSES;
    let mut quota: Vec<usize> = (0..NUM_CLASSES)
        .map(|c| base + usize::from(c < extra))
        .collect();
    let mut picked = Vec::with_capacity(k);
    for (i, &l) in labels.labels.iter().enumerate() {
        if picked.len() == k {
            break;
        }
        let q = &mut quota[l as usize];
        if *q > 0 {
            *q -= 1;
            picked.push(i);
        }
    }
    picked
}

/// Normalized train and test splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train_images: Tensor,
    pub train_labels: LabelSet,
    pub test_images: Tensor,
    pub test_labels: LabelSet,
}

/// Which files were loaded, for the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl DatasetSource {
    /// Locates the four standard MNIST files in `dir`, accepting either the
    /// raw name or a `.gz` suffix, and the `images.idx3-ubyte` and
    /// `idx3.ubyte` spellings.
    pub fn in_dir(dir: &Path) -> Result<Self, DataError> {
        let find = |stem: &str| -> Result<PathBuf, DataError> {
            let dotted_idx = stem.replacen("-idx", ".idx", 1);
            let dotted_ubyte = stem.replacen("-ubyte", ".ubyte", 1);
            for name in [stem, dotted_idx.as_str(), dotted_ubyte.as_str()] {
                for suffix in ["", ".gz"] {
                    let p = dir.join(format!("{name}{suffix}"));
                    if p.is_file() {
                        return Ok(p);
                    }
                }
            }
            Err(DataError::MissingFile(dir.join(stem).display().to_string()))
        };
        Ok(DatasetSource {
            train_images: find("train-images-idx3-ubyte")?,
            train_labels: find("train-labels-idx1-ubyte")?,
            test_images: find("t10k-images-idx3-ubyte")?,
            test_labels: find("t10k-labels-idx1-ubyte")?,
        })
    }

    pub fn load(&self) -> Result<Dataset, DataError> {
        let load_pair = |img: &Path, lbl: &Path| -> Result<(Tensor, LabelSet), DataError> {
            let images = load_images(img)?;
            let labels = load_labels(lbl)?;
            if images.count != labels.count() {
                return Err(DataError::CountMismatch {
                    images: images.count,
                    labels: labels.count(),
                });
            }
            Ok((normalize(&images), labels))
        };
        let (train_images, train_labels) = load_pair(&self.train_images, &self.train_labels)?;
        let (test_images, test_labels) = load_pair(&self.test_images, &self.test_labels)?;
        Ok(Dataset {
            train_images,
            train_labels,
            test_images,
            test_labels,
        })
    }
}
