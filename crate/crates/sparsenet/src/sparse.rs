//! CSR-encoded pruned networks for inference and persistence.
//!
//! Each layer keeps exactly the weights its prune mask marked, stored as
//! row offsets / column indices / values; biases stay dense. Forward
//! passes walk rows in order, so logits match the masked dense network.

use crate::error::{Error, Result};
use crate::model::{Activation, DenseLayer, Network};
use crate::numerics::Matrix;
use crate::pruning::PruneMask;

/// One CSR layer block: `rows x cols` logical shape plus dense biases.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrLayer {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub row_offsets: Vec<u64>,
    pub col_indices: Vec<u32>,
    pub values: Vec<f64>,
    pub biases: Vec<f64>,
}

impl CsrLayer {
    /// Check the CSR structural invariants; used for untrusted inputs.
    pub fn validate(&self) -> Result<()> {
        if self.row_offsets.len() != self.rows + 1 {
            return Err(Error::Shape(format!(
                "{} row offsets for {} rows",
                self.row_offsets.len(),
                self.rows
            )));
        }
        if self.row_offsets.first() != Some(&0) {
            return Err(Error::Shape("row offsets must start at 0".into()));
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Shape("row offsets must be nondecreasing".into()));
        }
        let nnz = *self.row_offsets.last().expect("rows + 1 >= 1") as usize;
        if nnz != self.col_indices.len() || nnz != self.values.len() {
            return Err(Error::Shape(format!(
                "final offset {nnz} does not match {} indices / {} values",
                self.col_indices.len(),
                self.values.len()
            )));
        }
        for r in 0..self.rows {
            let lo = self.row_offsets[r] as usize;
            let hi = self.row_offsets[r + 1] as usize;
            let cols = &self.col_indices[lo..hi];
            if cols.iter().any(|&c| c as usize >= self.cols) {
                return Err(Error::Shape(format!(
                    "column index out of range in row {r}"
                )));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!(
                    "column indices must be strictly increasing in row {r}"
                )));
            }
        }
        if self.biases.len() != self.rows {
            return Err(Error::Shape(format!(
                "{} biases for {} rows",
                self.biases.len(),
                self.rows
            )));
        }
        if !self
            .values
            .iter()
            .chain(&self.biases)
            .all(|v| v.is_finite())
        {
            return Err(Error::Input("sparse values must be finite".into()));
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// CSR-encoded network ready for sparse inference.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    layers: Vec<CsrLayer>,
}

impl SparseModel {
    /// Assemble from validated layer blocks.
    pub fn new(layers: Vec<CsrLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config(
                "sparse model needs at least one layer".into(),
            ));
        }
        for layer in &layers {
            layer.validate()?;
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::Shape(format!(
                    "layer {} expects {} inputs but layer {i} emits {}",
                    i + 1,
                    pair[1].cols,
                    pair[0].rows
                )));
            }
        }
        Ok(SparseModel { layers })
    }

    pub fn layers(&self) -> &[CsrLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").rows
    }

    /// Total stored weights.
    pub fn nnz(&self) -> usize {
        self.layers.iter().map(CsrLayer::nnz).sum()
    }

    /// Total bias entries.
    pub fn bias_count(&self) -> usize {
        self.layers.iter().map(|l| l.biases.len()).sum()
    }

    /// Logits for a batch of rows, equal to the masked dense forward.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut out = Matrix::zeros(x.rows(), layer.rows);
            for i in 0..x.rows() {
                let xin = x.row(i);
                for r in 0..layer.rows {
                    let lo = layer.row_offsets[r] as usize;
                    let hi = layer.row_offsets[r + 1] as usize;
                    let mut acc = 0.0;
                    for idx in lo..hi {
                        acc += layer.values[idx] * xin[layer.col_indices[idx] as usize];
                    }
                    out.set(i, r, layer.activation.apply(acc + layer.biases[r]));
                }
            }
            x = out;
        }
        Ok(x)
    }

    /// Densify back to a [`Network`]; dropped positions become zeros.
    pub fn to_network(&self) -> Result<Network> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let mut weights = Matrix::zeros(l.rows, l.cols);
            for r in 0..l.rows {
                let lo = l.row_offsets[r] as usize;
                let hi = l.row_offsets[r + 1] as usize;
                for idx in lo..hi {
                    weights.set(r, l.col_indices[idx] as usize, l.values[idx]);
                }
            }
            layers.push(DenseLayer::new(weights, l.biases.clone(), l.activation)?);
        }
        Network::new(layers)
    }

    /// The keep/drop pattern of the stored weights as a prune mask.
    ///
    /// Built from the CSR pattern rather than the zero pattern, so a
    /// stored weight that happens to be zero stays kept.
    pub fn mask(&self) -> Result<PruneMask> {
        let net = self.to_network()?;
        let mut mask = PruneMask::all_true(&net);
        let mut keep_layers: Vec<Vec<bool>> = self
            .layers
            .iter()
            .map(|l| vec![false; l.rows * l.cols])
            .collect();
        for (keep, l) in keep_layers.iter_mut().zip(&self.layers) {
            for r in 0..l.rows {
                let lo = l.row_offsets[r] as usize;
                let hi = l.row_offsets[r + 1] as usize;
                for idx in lo..hi {
                    keep[r * l.cols + l.col_indices[idx] as usize] = true;
                }
            }
        }
        mask.overwrite_from(keep_layers);
        Ok(mask)
    }
}

/// CSR-encode the masked network; only kept weights are stored.
pub fn to_sparse(net: &Network, mask: &PruneMask) -> Result<SparseModel> {
    if !mask.congruent_with(net) {
        return Err(Error::Shape("mask does not match network shape".into()));
    }
    let mut layers = Vec::with_capacity(net.layers().len());
    for (li, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = (layer.weights().rows(), layer.weights().cols());
        let keep = mask.layer(li);
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0u64);
        for r in 0..rows {
            for c in 0..cols {
                if keep[r * cols + c] {
                    col_indices.push(c as u32);
                    values.push(layer.weights().at(r, c));
                }
            }
            row_offsets.push(col_indices.len() as u64);
        }
        layers.push(CsrLayer {
            rows,
            cols,
            activation: layer.activation(),
            row_offsets,
            col_indices,
            values,
            biases: layer.biases().to_vec(),
        });
    }
    SparseModel::new(layers)
}

// ===========================================================================
// Tests
// ===========================================================================
