//! Magnitude-based weight pruning.
//!
//! All three strategies are keep-k: a target compression rate `r >= 1`
//! translates to `k = round(n / r)` kept weights, which makes sweep
//! points exact and comparable across strategies. Equal magnitudes are
//! broken by (layer index, row-major position), lower wins, so masks are
//! reproducible across runs. Biases are never pruned.

use crate::error::{Error, Result};
use crate::model::Network;
use crate::numerics::Rng;

/// Boolean keep/drop flags, one per weight-matrix entry, congruent with
/// the network the mask was built from (`true` = keep).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    layers: Vec<MaskLayer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct MaskLayer {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl PruneMask {
    /// All-keep mask congruent with `net`.
    pub fn all_true(net: &Network) -> Self {
        PruneMask {
            layers: net
                .layers()
                .iter()
                .map(|l| MaskLayer {
                    rows: l.weights().rows(),
                    cols: l.weights().cols(),
                    keep: vec![true; l.weights().rows() * l.weights().cols()],
                })
                .collect(),
        }
    }

    fn all_false(net: &Network) -> Self {
        let mut mask = PruneMask::all_true(net);
        for layer in &mut mask.layers {
            layer.keep.iter_mut().for_each(|k| *k = false);
        }
        mask
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Keep flags of one layer in row-major order.
    pub fn layer(&self, i: usize) -> &[bool] {
        &self.layers[i].keep
    }

    /// Keep flag for a single weight.
    pub fn kept(&self, layer: usize, row: usize, col: usize) -> bool {
        let l = &self.layers[layer];
        l.keep[row * l.cols + col]
    }

    fn set_kept(&mut self, layer: usize, flat: usize) {
        self.layers[layer].keep[flat] = true;
    }

    /// Total number of kept weights.
    pub fn kept_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.keep.iter().filter(|&&k| k).count())
            .sum()
    }

    /// Kept weights per layer.
    pub fn kept_per_layer(&self) -> Vec<usize> {
        self.layers
            .iter()
            .map(|l| l.keep.iter().filter(|&&k| k).count())
            .collect()
    }

    /// Replace the keep flags wholesale; each vector must match the
    /// layer's entry count.
    pub fn overwrite_from(&mut self, keep: Vec<Vec<bool>>) {
        assert_eq!(keep.len(), self.layers.len(), "layer count mismatch");
        for (layer, flags) in self.layers.iter_mut().zip(keep) {
            assert_eq!(flags.len(), layer.keep.len(), "flag count mismatch");
            layer.keep = flags;
        }
    }

    /// Whether this mask's shape matches `net` layer by layer.
    pub fn congruent_with(&self, net: &Network) -> bool {
        self.layers.len() == net.layers().len()
            && self
                .layers
                .iter()
                .zip(net.layers())
                .all(|(m, l)| m.rows == l.weights().rows() && m.cols == l.weights().cols())
    }

    /// Zero out dropped weights in place; kept weights are untouched.
    pub fn zero_dropped(&self, net: &mut Network) -> Result<()> {
        if !self.congruent_with(net) {
            return Err(Error::Shape("mask does not match network shape".into()));
        }
        for (layer, mask) in net.layers_mut().iter_mut().zip(&self.layers) {
            for (w, &keep) in layer.weights_mut().data_mut().iter_mut().zip(&mask.keep) {
                if !keep {
                    *w = 0.0;
                }
            }
        }
        Ok(())
    }

    /// Sum of |w| over dropped positions; exactly 0 when the net honors
    /// the mask.
    pub fn dropped_magnitude(&self, net: &Network) -> Result<f64> {
        if !self.congruent_with(net) {
            return Err(Error::Shape("mask does not match network shape".into()));
        }
        let mut sum = 0.0;
        for (layer, mask) in net.layers().iter().zip(&self.layers) {
            for (w, &keep) in layer.weights().data().iter().zip(&mask.keep) {
                if !keep {
                    sum += w.abs();
                }
            }
        }
        Ok(sum)
    }
}

fn keep_count(n: usize, rate: f64, what: &str) -> Result<usize> {
    if !(rate.is_finite() && rate >= 1.0) {
        return Err(Error::Config(format!(
            "compression rate must be >= 1, got {rate}"
        )));
    }
    let k = (n as f64 / rate).round() as usize;
    if k == 0 {
        return Err(Error::Config(format!(
            "rate {rate} keeps zero of {n} {what} weights"
        )));
    }
    Ok(k.min(n))
}

/// Keep the `round(total / rate)` largest-magnitude weights across the
/// whole network.
pub fn global_prune(net: &Network, rate: f64) -> Result<PruneMask> {
    let total = net.weight_count();
    let k = keep_count(total, rate, "network")?;
    let mut entries: Vec<(f64, u32, u32)> = Vec::with_capacity(total);
    for (li, layer) in net.layers().iter().enumerate() {
        for (pos, w) in layer.weights().data().iter().enumerate() {
            entries.push((w.abs(), li as u32, pos as u32));
        }
    }
    // Descending magnitude; ties keep the lower (layer, position) first.
    entries.sort_unstable_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    let mut mask = PruneMask::all_false(net);
    for &(_, li, pos) in entries.iter().take(k) {
        mask.set_kept(li as usize, pos as usize);
    }
    Ok(mask)
}

/// Keep the top `round(n_l / rate)` magnitudes independently in each
/// layer, so every layer ends up at the same compression level.
pub fn layerwise_prune(net: &Network, rate: f64) -> Result<PruneMask> {
    let mut mask = PruneMask::all_false(net);
    for (li, layer) in net.layers().iter().enumerate() {
        let n = layer.weights().rows() * layer.weights().cols();
        let k = keep_count(n, rate, "layer")?;
        let mut entries: Vec<(f64, u32)> = layer
            .weights()
            .data()
            .iter()
            .enumerate()
            .map(|(pos, w)| (w.abs(), pos as u32))
            .collect();
        entries.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for &(_, pos) in entries.iter().take(k) {
            mask.set_kept(li, pos as usize);
        }
    }
    Ok(mask)
}

/// Keep `round(total / rate)` uniformly random weights network-wide;
/// deterministic for a given generator state.
pub fn random_prune(net: &Network, rate: f64, rng: &mut Rng) -> Result<PruneMask> {
    let total = net.weight_count();
    let k = keep_count(total, rate, "network")?;
    // Partial Fisher-Yates: after k swaps the prefix is a uniform sample.
    let mut indices: Vec<u32> = (0..total as u32).collect();
    for i in 0..k {
        let j = i + rng.below((total - i) as u64) as usize;
        indices.swap(i, j);
    }
    let sizes = net.layer_weight_counts();
    let mut mask = PruneMask::all_false(net);
    for &flat in &indices[..k] {
        let mut rest = flat as usize;
        for (li, &n) in sizes.iter().enumerate() {
            if rest < n {
                mask.set_kept(li, rest);
                break;
            }
            rest -= n;
        }
    }
    Ok(mask)
}

/// Copy of `net` with dropped weights set to exactly zero.
pub fn apply_mask(net: &Network, mask: &PruneMask) -> Result<Network> {
    let mut out = net.clone();
    mask.zero_dropped(&mut out)?;
    Ok(out)
}

/// Mask keeping exactly the nonzero weights of `net`.
pub fn nonzero_mask(net: &Network) -> PruneMask {
    let mut mask = PruneMask::all_true(net);
    let keep = net
        .layers()
        .iter()
        .map(|l| l.weights().data().iter().map(|&w| w != 0.0).collect())
        .collect();
    mask.overwrite_from(keep);
    mask
}

/// Compression rate `total / remaining`.
pub fn compression_rate(total_params: usize, remaining_nonzero: usize) -> Result<f64> {
    if remaining_nonzero == 0 {
        return Err(Error::Arithmetic(
            "compression rate with zero remaining params".into(),
        ));
    }
    Ok(total_params as f64 / remaining_nonzero as f64)
}

// ===========================================================================
// Tests
// ===========================================================================
