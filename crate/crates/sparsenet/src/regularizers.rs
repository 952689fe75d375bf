//! Norm penalties and their weight-update terms.
//!
//! Four penalty kinds are supported: classic ℓ2 (`sum w^2`) and ℓ1
//! (`sum |w|`), a differentiable ℓ0 surrogate `sum (1 - exp(-beta |w|))`
//! that approaches the true nonzero count as `beta` grows, and the
//! combined ℓ2-ℓ0 form that adds both gradient terms with independent
//! strengths. Penalties apply to weight-matrix entries only; biases are
//! never penalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which penalty participates in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    None,
    L2,
    L1,
    L0,
    L2L0,
}

impl RegKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::L2 => "l2",
            RegKind::L1 => "l1",
            RegKind::L0 => "l0",
            RegKind::L2L0 => "l2l0",
        }
    }
}

impl std::str::FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RegKind::None),
            "l2" => Ok(RegKind::L2),
            "l1" => Ok(RegKind::L1),
            "l0" => Ok(RegKind::L0),
            "l2l0" => Ok(RegKind::L2L0),
            other => Err(Error::Config(format!("unknown regularizer kind `{other}`"))),
        }
    }
}

/// How per-layer hyperparameters are derived from the global ones.
///
/// `Global` applies the same triple to every layer. `Norm` rescales both
/// alphas by (mean layer size / layer size), equalizing each layer's
/// aggregate penalty pressure. `Sep` uses explicitly supplied per-layer
/// triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Global,
    Norm,
    Sep,
}

/// Effective (alpha_l2, alpha_l0, beta) for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerPenalty {
    pub alpha_l2: f64,
    pub alpha_l0: f64,
    pub beta: f64,
}

impl LayerPenalty {
    pub fn new(alpha_l2: f64, alpha_l0: f64, beta: f64) -> Self {
        LayerPenalty {
            alpha_l2,
            alpha_l0,
            beta,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha_l2.is_finite() && self.alpha_l2 >= 0.0) {
            return Err(Error::Config(format!(
                "alpha_l2 must be >= 0, got {}",
                self.alpha_l2
            )));
        }
        if !(self.alpha_l0.is_finite() && self.alpha_l0 >= 0.0) {
            return Err(Error::Config(format!(
                "alpha_l0 must be >= 0, got {}",
                self.alpha_l0
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::Config(format!(
                "beta must be >= 1, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Penalty configuration as supplied by the user.
///
/// `alpha_l2` drives the ℓ2 term; `alpha_l0` drives the sparseness term
/// (the ℓ0 surrogate, and also plain ℓ1 when that kind is selected);
/// `beta` controls how sharply the ℓ0 surrogate approximates the true
/// nonzero count.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub kind: RegKind,
    pub alpha_l2: f64,
    pub alpha_l0: f64,
    pub beta: f64,
    pub strategy: Strategy,
    pub per_layer: Option<Vec<LayerPenalty>>,
}

impl RegularizerSpec {
    /// No regularization at all.
    pub fn none() -> Self {
        RegularizerSpec {
            kind: RegKind::None,
            alpha_l2: 0.0,
            alpha_l0: 0.0,
            beta: 1.0,
            strategy: Strategy::Global,
            per_layer: None,
        }
    }

    /// Global-strategy spec with the given parameters.
    pub fn global(kind: RegKind, alpha_l2: f64, alpha_l0: f64, beta: f64) -> Self {
        RegularizerSpec {
            kind,
            alpha_l2,
            alpha_l0,
            beta,
            strategy: Strategy::Global,
            per_layer: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        LayerPenalty::new(self.alpha_l2, self.alpha_l0, self.beta).validate()?;
        if let Some(layers) = &self.per_layer {
            for p in layers {
                p.validate()?;
            }
        }
        match self.strategy {
            Strategy::Sep => {
                if self.per_layer.is_none() {
                    return Err(Error::Config(
                        "sep strategy requires per-layer overrides".into(),
                    ));
                }
            }
            Strategy::Global | Strategy::Norm => {
                if self.per_layer.is_some() {
                    return Err(Error::Config(
                        "per-layer overrides are only valid with the sep strategy".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Expand the spec into one effective triple per layer.
    ///
    /// `layer_sizes` holds each layer's weight-entry count. With `Norm`,
    /// each alpha becomes `alpha * mean(layer_sizes) / layer_size` while
    /// beta is left untouched; with `Sep` the overrides must cover every
    /// layer and are copied verbatim.
    pub fn resolve(&self, layer_sizes: &[usize]) -> Result<ResolvedReg> {
        self.validate()?;
        if layer_sizes.is_empty() {
            return Err(Error::Config("no layers to resolve".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("zero-size layer".into()));
        }
        let layers = match self.strategy {
            Strategy::Global => layer_sizes
                .iter()
                .map(|_| LayerPenalty::new(self.alpha_l2, self.alpha_l0, self.beta))
                .collect(),
            Strategy::Norm => {
                let mean = layer_sizes.iter().sum::<usize>() as f64 / layer_sizes.len() as f64;
                layer_sizes
                    .iter()
                    .map(|&n| {
                        let scale = mean / n as f64;
                        LayerPenalty::new(self.alpha_l2 * scale, self.alpha_l0 * scale, self.beta)
                    })
                    .collect()
            }
            Strategy::Sep => {
                let overrides = self.per_layer.as_ref().expect("validated");
                if overrides.len() != layer_sizes.len() {
                    return Err(Error::Config(format!(
                        "sep strategy has {} overrides for {} layers",
                        overrides.len(),
                        layer_sizes.len()
                    )));
                }
                overrides.clone()
            }
        };
        Ok(ResolvedReg { layers })
    }
}

/// Per-layer effective penalty parameters, one triple per network layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedReg {
    layers: Vec<LayerPenalty>,
}

impl ResolvedReg {
    pub fn layers(&self) -> &[LayerPenalty] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &LayerPenalty {
        &self.layers[i]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// sign(w) with sign(0) = 0.
#[inline]
pub fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Penalty value over all weights, grouped per layer to pair with the
/// resolved parameters.
///
/// Single-norm kinds return the raw penalty: `sum w^2` for ℓ2,
/// `sum |w|` for ℓ1, and `sum (1 - exp(-beta |w|))` for ℓ0. The combined
/// kind returns `alpha_l2 * Omega_l2 + alpha_l0 * Omega_l0` since no
/// single unweighted penalty exists there. `None` gives 0.
pub fn penalty_value(kind: RegKind, layers: &[&[f64]], resolved: &ResolvedReg) -> Result<f64> {
    if layers.len() != resolved.len() {
        return Err(Error::Shape(format!(
            "{} weight layers for {} resolved layers",
            layers.len(),
            resolved.len()
        )));
    }
    let mut total = 0.0;
    for (ws, p) in layers.iter().zip(resolved.layers()) {
        match kind {
            RegKind::None => {}
            RegKind::L2 => total += ws.iter().map(|w| w * w).sum::<f64>(),
            RegKind::L1 => total += ws.iter().map(|w| w.abs()).sum::<f64>(),
            RegKind::L0 => {
                total += ws
                    .iter()
                    .map(|w| 1.0 - (-p.beta * w.abs()).exp())
                    .sum::<f64>()
            }
            RegKind::L2L0 => {
                let l2: f64 = ws.iter().map(|w| w * w).sum();
                let l0: f64 = ws.iter().map(|w| 1.0 - (-p.beta * w.abs()).exp()).sum();
                total += p.alpha_l2 * l2 + p.alpha_l0 * l0;
            }
        }
    }
    Ok(total)
}

/// Strength-weighted penalty gradient `alpha * dOmega/dw` for one weight.
///
/// The learning rate is *not* included; the training update subtracts
/// `eta * penalty_gradient`. Per kind:
///
/// * ℓ2:   `2 * alpha_l2 * w`
/// * ℓ1:   `alpha_l0 * sign(w)`
/// * ℓ0:   `alpha_l0 * beta * sign(w) * exp(-beta * |w|)`
/// * ℓ2ℓ0: sum of the ℓ2 and ℓ0 terms
///
/// with sign(0) = 0 throughout.
#[inline]
pub fn penalty_gradient(kind: RegKind, w: f64, p: &LayerPenalty) -> f64 {
    match kind {
        RegKind::None => 0.0,
        RegKind::L2 => 2.0 * p.alpha_l2 * w,
        RegKind::L1 => p.alpha_l0 * sign(w),
        RegKind::L0 => p.alpha_l0 * p.beta * sign(w) * (-p.beta * w.abs()).exp(),
        RegKind::L2L0 => {
            2.0 * p.alpha_l2 * w + p.alpha_l0 * p.beta * sign(w) * (-p.beta * w.abs()).exp()
        }
    }
}

/// The additive term a regularizer contributes to one weight update,
/// `-eta * penalty_gradient(kind, w, p)`.
#[inline]
pub fn penalty_term(kind: RegKind, p: &LayerPenalty, eta: f64, w: f64) -> f64 {
    -eta * penalty_gradient(kind, w, p)
}

/// Sample the penalization term over `[w_lo, w_hi]` at `steps` evenly
/// spaced points, for plotting how hard each kind pulls weights toward
/// zero.
pub fn penalization_curve(
    kind: RegKind,
    p: &LayerPenalty,
    eta: f64,
    w_lo: f64,
    w_hi: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    if steps < 2 {
        return Err(Error::Config(format!(
            "curve needs at least 2 steps, got {steps}"
        )));
    }
    if !(w_lo.is_finite() && w_hi.is_finite() && w_lo < w_hi) {
        return Err(Error::Config(format!("bad curve range [{w_lo}, {w_hi}]")));
    }
    let dw = (w_hi - w_lo) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            let w = w_lo + i as f64 * dw;
            (w, penalty_term(kind, p, eta, w))
        })
        .collect())
}

/// Write a sampled curve as `w,term` CSV rows.
pub fn write_curve_csv(points: &[(f64, f64)], out: &mut impl std::io::Write) -> Result<()> {
    writeln!(out, "w,term")?;
    for (w, term) in points {
        writeln!(out, "{w},{term}")?;
    }
    Ok(())
}

// ===========================================================================
// Tests
// ===========================================================================
