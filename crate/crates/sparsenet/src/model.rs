//! Fully-connected feed-forward network with an exact hand-written
//! backward pass. Weight matrices are stored `out x in`, so a batch of
//! shape `n x in` maps through `x * W^T + b`.

use crate::error::{Error, Result};
use crate::numerics::{softmax_cross_entropy, Matrix, Rng};

/// Per-unit nonlinearity. The output layer is always `Identity` so the
/// network emits raw logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation; the ReLU kink at 0
    /// takes the zero branch.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Byte tag used by the model file formats.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One dense layer: `out x in` weights, `out` biases, and an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    biases: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::Shape(format!(
                "{} biases for {} output units",
                biases.len(),
                weights.rows()
            )));
        }
        Ok(DenseLayer {
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

/// Ordered stack of dense layers. Adjacent dimensions must chain and the
/// final layer must use the identity activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
        let input_dim = first.input_dim();
        let mut prev_out = first.output_dim();
        for (i, layer) in layers.iter().enumerate().skip(1) {
            if layer.input_dim() != prev_out {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but layer {} emits {prev_out}",
                    layer.input_dim(),
                    i - 1
                )));
            }
            prev_out = layer.output_dim();
        }
        let last = layers.last().expect("nonempty");
        if last.activation() != Activation::Identity {
            return Err(Error::Config(
                "final layer must use the identity activation (logits)".into(),
            ));
        }
        Ok(Network {
            layers,
            input_dim,
            output_dim: prev_out,
        })
    }

    /// Zero-initialized MLP over the dimension chain `dims`
    /// (input, hidden..., output) with ReLU hidden layers.
    pub fn mlp(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("need at least input and output dims".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let activation = if layers.len() + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::new(
                Matrix::zeros(fan_out, fan_in),
                vec![0.0; fan_out],
                activation,
            )?);
        }
        Network::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Weight-matrix entry count per layer (biases excluded).
    pub fn layer_weight_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|l| l.weights().rows() * l.weights().cols())
            .collect()
    }

    /// Total weight-matrix entries (biases excluded).
    pub fn weight_count(&self) -> usize {
        self.layer_weight_counts().iter().sum()
    }

    /// Total bias entries.
    pub fn bias_count(&self) -> usize {
        self.layers.iter().map(|l| l.biases().len()).sum()
    }

    /// Weight entries with magnitude strictly below `threshold`.
    pub fn count_small_weights(&self, threshold: f64) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.weights()
                    .data()
                    .iter()
                    .filter(|w| w.abs() < threshold)
                    .count()
            })
            .sum()
    }

    /// Weight entries that are exactly zero.
    pub fn zero_weight_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights().data().iter().filter(|w| **w == 0.0).count())
            .sum()
    }

    /// Draw fresh weights and zero the biases.
    ///
    /// `UniformHe` draws each weight from U(-a, a) with a = sqrt(6/fan_in),
    /// giving variance 2/fan_in. Draw order is layer by layer, row-major,
    /// so one seed fully determines the network.
    pub fn init_weights(&mut self, rng: &mut Rng, scheme: InitScheme) {
        match scheme {
            InitScheme::UniformHe => {
                for layer in &mut self.layers {
                    let limit = (6.0 / layer.input_dim() as f64).sqrt();
                    for w in layer.weights.data_mut() {
                        *w = rng.uniform(-limit, limit);
                    }
                    for b in layer.biases.iter_mut() {
                        *b = 0.0;
                    }
                }
            }
        }
    }

    /// Logits for a batch of rows.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_dim
            )));
        }
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut z = x.matmul(&layer.weights.transpose())?;
            z.add_row_bias(&layer.biases)?;
            for v in z.data_mut() {
                *v = layer.activation.apply(*v);
            }
            x = z;
        }
        Ok(x)
    }

    /// Mean loss and exact loss gradients for a labeled batch.
    pub fn backward(&self, batch: &Matrix, labels: &[usize]) -> Result<(f64, Gradients)> {
        let (loss, grads, _) = self.backward_with_logits(batch, labels)?;
        Ok((loss, grads))
    }

    /// Like [`Network::backward`] but also returns the logits from the
    /// forward pass, so callers can score the batch without recomputing.
    pub fn backward_with_logits(
        &self,
        batch: &Matrix,
        labels: &[usize],
    ) -> Result<(f64, Gradients, Matrix)> {
        if batch.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_dim
            )));
        }

        // Forward pass, caching pre-activations and activations.
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut x = batch;
        for layer in &self.layers {
            let mut z = x.matmul(&layer.weights.transpose())?;
            z.add_row_bias(&layer.biases)?;
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = layer.activation.apply(*v);
            }
            pre.push(z);
            post.push(a);
            x = post.last().expect("just pushed");
        }
        let logits = post.last().expect("nonempty").clone();
        let (loss, mut delta) = softmax_cross_entropy(&logits, labels)?;

        // Backward pass. `delta` carries dJ/dz for the current layer.
        let mut weight_grads = vec![Matrix::zeros(0, 0); self.layers.len()];
        let mut bias_grads = vec![Vec::new(); self.layers.len()];
        for k in (0..self.layers.len()).rev() {
            let input = if k == 0 { batch } else { &post[k - 1] };
            weight_grads[k] = delta.transpose().matmul(input)?;
            let mut db = vec![0.0; self.layers[k].output_dim()];
            for r in 0..delta.rows() {
                for (c, db_c) in db.iter_mut().enumerate() {
                    *db_c += delta.at(r, c);
                }
            }
            bias_grads[k] = db;
            if k > 0 {
                let mut prev = delta.matmul(&self.layers[k].weights)?;
                let act = self.layers[k - 1].activation();
                for (v, &z) in prev.data_mut().iter_mut().zip(pre[k - 1].data()) {
                    *v *= act.derivative(z);
                }
                delta = prev;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: weight_grads,
                biases: bias_grads,
            },
            logits,
        ))
    }
}

/// Weight-init schemes for [`Network::init_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    UniformHe,
}

/// Loss gradients shaped exactly like the owning network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// All-zero gradients congruent with `net`.
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.weights().rows(), l.weights().cols()))
                .collect(),
            biases: net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.biases().len()])
                .collect(),
        }
    }
}

// ===========================================================================
// Tests
// ===========================================================================
