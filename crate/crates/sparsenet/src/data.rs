//! Labeled datasets: IDX-format image/label files and a deterministic
//! synthetic-blob generator for fast, file-free runs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Which side of the train/test divide a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Feature rows in [0, 1] with one class label per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if classes == 0 {
            return Err(Error::Config("dataset needs at least one class".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Input(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        if !features.data().iter().all(|&v| (0.0..=1.0).contains(&v)) {
            return Err(Error::Input("feature values must lie in [0, 1]".into()));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
            split,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Copy out the rows selected by `idx`, in order.
    pub fn gather(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let cols = self.features.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        let features = Matrix::from_vec(idx.len(), cols, data).expect("rows are valid");
        (features, labels)
    }
}

// ---------------------------------------------------------------------------
// IDX files
// ---------------------------------------------------------------------------

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let slice = bytes.get(offset..offset + 4).ok_or(Error::Format {
        offset: bytes.len() as u64,
        message: format!("truncated while reading {what}"),
    })?;
    Ok(u32::from_be_bytes(slice.try_into().expect("4 bytes")))
}

/// Load an IDX image/label file pair (big-endian headers, unsigned pixel
/// bytes). Pixels are scaled to [0, 1] by dividing by 255; labels must
/// be digits 0-9.
pub fn load_mnist(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let images = fs::read(images_path)?;
    let magic = read_be_u32(&images, 0, "images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("images magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let n = read_be_u32(&images, 4, "image count")? as usize;
    let rows = read_be_u32(&images, 8, "image rows")? as usize;
    let cols = read_be_u32(&images, 12, "image cols")? as usize;
    let expected = 16 + n * rows * cols;
    if images.len() < expected {
        return Err(Error::Format {
            offset: images.len() as u64,
            message: format!(
                "truncated images: {} bytes, expected {expected}",
                images.len()
            ),
        });
    }
    if images.len() > expected {
        return Err(Error::Format {
            offset: expected as u64,
            message: format!("{} trailing bytes in images file", images.len() - expected),
        });
    }

    let labels = fs::read(labels_path)?;
    let magic = read_be_u32(&labels, 0, "labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("labels magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let n_labels = read_be_u32(&labels, 4, "label count")? as usize;
    if labels.len() != 8 + n_labels {
        let offset = labels.len().min(8 + n_labels) as u64;
        return Err(Error::Format {
            offset,
            message: format!(
                "labels file has {} bytes, expected {}",
                labels.len(),
                8 + n_labels
            ),
        });
    }
    if n_labels != n {
        return Err(Error::Format {
            offset: 4,
            message: format!("images file has {n} samples but labels file has {n_labels}"),
        });
    }

    let features: Vec<f64> = images[16..].iter().map(|&b| b as f64 / 255.0).collect();
    let mut label_values = Vec::with_capacity(n);
    for (i, &b) in labels[8..].iter().enumerate() {
        if b > 9 {
            return Err(Error::Format {
                offset: (8 + i) as u64,
                message: format!("label {b} out of range 0-9"),
            });
        }
        label_values.push(b as usize);
    }
    Dataset::new(
        Matrix::from_vec(n, rows * cols, features)?,
        label_values,
        10,
        split,
    )
}

// ---------------------------------------------------------------------------
// Synthetic blobs
// ---------------------------------------------------------------------------

/// Standard deviation of each synthetic cluster.
pub const BLOB_SIGMA: f64 = 0.12;

/// Gaussian clusters, one per class, with unit-separated means on the
/// corners of the feature hypercube (class `c`'s mean repeats the binary
/// code of `c` across dimensions), clipped to [0, 1]. Labels are
/// balanced round-robin and rows are shuffled, all driven by `seed`.
pub fn synth_blobs(
    classes: usize,
    samples: usize,
    dims: usize,
    seed: u64,
    split: Split,
) -> Result<Dataset> {
    if classes == 0 || samples == 0 || dims == 0 {
        return Err(Error::Config(
            "classes, samples, and dims must all be >= 1".into(),
        ));
    }
    let bits = usize::BITS - (classes - 1).leading_zeros(); // ceil(log2(classes))
    let bits = bits.max(1) as usize;
    if bits > dims {
        return Err(Error::Config(format!(
            "{classes} classes need at least {bits} dims for separated means, got {dims}"
        )));
    }
    let mean = |class: usize, dim: usize| -> f64 {
        if (class >> (dim % bits)) & 1 == 1 {
            1.0
        } else {
            0.0
        }
    };

    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(samples * dims);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = i % classes;
        labels.push(class);
        for j in 0..dims {
            let v = mean(class, j) + BLOB_SIGMA * rng.normal();
            data.push(v.clamp(0.0, 1.0));
        }
    }

    // Shuffle rows so class order carries no information.
    let mut order: Vec<usize> = (0..samples).collect();
    rng.shuffle(&mut order);
    let mut shuffled = Vec::with_capacity(samples * dims);
    let mut shuffled_labels = Vec::with_capacity(samples);
    for &i in &order {
        shuffled.extend_from_slice(&data[i * dims..(i + 1) * dims]);
        shuffled_labels.push(labels[i]);
    }

    Dataset::new(
        Matrix::from_vec(samples, dims, shuffled)?,
        shuffled_labels,
        classes,
        split,
    )
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) {
        let mut buf = Vec::new();
        buf.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(images.len() as u32).to_be_bytes());
        buf.extend_from_slice(&(rows as u32).to_be_bytes());
        buf.extend_from_slice(&(cols as u32).to_be_bytes());
        for img in images {
            buf.extend_from_slice(img);
        }
        let mut f = fs::File::create(path).unwrap();
        f.write_all(&buf).unwrap();
    }

    fn write_idx_labels(path: &Path, labels: &[u8]) {
        let mut buf = Vec::new();
        buf.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        buf.extend_from_slice(labels);
        let mut f = fs::File::create(path).unwrap();
        f.write_all(&buf).unwrap();
    }

    #[test]
    fn idx_pair_parses_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("images");
        let labels = dir.path().join("labels");
        write_idx_images(&images, &[vec![0, 128, 255, 64], vec![255; 4]], 2, 2);
        write_idx_labels(&labels, &[3, 7]);
        let ds = load_mnist(&images, &labels, Split::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_dim(), 4);
        assert_eq!(ds.labels(), &[3, 7]);
        assert_eq!(ds.features().at(0, 0), 0.0);
        assert_eq!(ds.features().at(0, 2), 1.0);
        assert_eq!(ds.features().at(1, 0), 1.0);
    }

    #[test]
    fn bad_images_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("images");
        let labels = dir.path().join("labels");
        write_idx_labels(&images, &[1]); // labels magic where images expected
        write_idx_labels(&labels, &[1]);
        match load_mnist(&images, &labels, Split::Train) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, 0);
                assert!(message.contains("magic"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_images_rejected_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("images");
        let labels = dir.path().join("labels");
        write_idx_images(&images, &[vec![1, 2, 3, 4]], 2, 2);
        let full = fs::read(&images).unwrap();
        fs::write(&images, &full[..full.len() - 2]).unwrap();
        write_idx_labels(&labels, &[1]);
        match load_mnist(&images, &labels, Split::Train) {
            Err(Error::Format { message, .. }) => assert!(message.contains("truncated")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("images");
        let labels = dir.path().join("labels");
        write_idx_images(&images, &[vec![0; 4], vec![0; 4]], 2, 2);
        write_idx_labels(&labels, &[1, 2, 3]);
        match load_mnist(&images, &labels, Split::Train) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("2 samples"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("images");
        let labels = dir.path().join("labels");
        write_idx_images(&images, &[vec![0; 4]], 2, 2);
        write_idx_labels(&labels, &[10]);
        match load_mnist(&images, &labels, Split::Train) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn blobs_are_deterministic_per_seed() {
        let a = synth_blobs(3, 30, 8, 42, Split::Train).unwrap();
        let b = synth_blobs(3, 30, 8, 42, Split::Train).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.labels(), b.labels());
        let c = synth_blobs(3, 30, 8, 43, Split::Train).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn blobs_labels_balanced_within_one() {
        let ds = synth_blobs(3, 100, 8, 1, Split::Train).unwrap();
        let mut counts = [0usize; 3];
        for &y in ds.labels() {
            counts[y] += 1;
        }
        let max = *counts.iter().max().unwrap();
        let min = *counts.iter().min().unwrap();
        assert!(max - min <= 1, "{counts:?}");
    }

    #[test]
    fn blobs_values_stay_in_unit_interval() {
        let ds = synth_blobs(4, 200, 6, 9, Split::Test).unwrap();
        assert!(ds
            .features()
            .data()
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn blobs_class_means_are_unit_separated() {
        // With 2 classes and 2 dims the means sit at (0,0) and (1,1);
        // per-class sample means should recover them approximately.
        let ds = synth_blobs(2, 2000, 2, 5, Split::Train).unwrap();
        let mut sums = [[0.0f64; 2]; 2];
        let mut counts = [0usize; 2];
        for i in 0..ds.len() {
            let y = ds.labels()[i];
            counts[y] += 1;
            sums[y][0] += ds.features().at(i, 0);
            sums[y][1] += ds.features().at(i, 1);
        }
        let m0 = [sums[0][0] / counts[0] as f64, sums[0][1] / counts[0] as f64];
        let m1 = [sums[1][0] / counts[1] as f64, sums[1][1] / counts[1] as f64];
        let dist = ((m1[0] - m0[0]).powi(2) + (m1[1] - m0[1]).powi(2)).sqrt();
        // Clipping at the cube boundary pulls means slightly inward.
        assert!(dist > 1.2, "mean separation {dist}");
    }

    #[test]
    fn blobs_reject_too_many_classes_for_dims() {
        assert!(matches!(
            synth_blobs(10, 10, 2, 1, Split::Train),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn blobs_reject_zero_counts() {
        assert!(synth_blobs(0, 10, 2, 1, Split::Train).is_err());
        assert!(synth_blobs(2, 0, 2, 1, Split::Train).is_err());
        assert!(synth_blobs(2, 10, 0, 1, Split::Train).is_err());
    }

    #[test]
    fn gather_copies_selected_rows() {
        let ds = synth_blobs(2, 10, 3, 2, Split::Train).unwrap();
        let (batch, labels) = ds.gather(&[4, 1, 7]);
        assert_eq!(batch.rows(), 3);
        assert_eq!(batch.row(0), ds.features().row(4));
        assert_eq!(batch.row(1), ds.features().row(1));
        assert_eq!(labels, vec![ds.labels()[4], ds.labels()[1], ds.labels()[7]]);
    }
}
