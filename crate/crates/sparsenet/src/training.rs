//! Mini-batch gradient descent with norm-penalized weight updates, plus
//! masked fine-tuning and accuracy evaluation.
//!
//! Every weight moves by `-eta * penalty_gradient - eta * dJ/dw` per
//! batch, with both terms evaluated at the pre-update value, so a step
//! decomposes exactly into the plain gradient part and the penalty part.
//! Biases follow the loss gradient only. Training is plain SGD: no
//! momentum, schedules, or early stopping, and a fixed seed reproduces
//! the run bit for bit.

use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Gradients, Network};
use crate::numerics::{Matrix, Rng};
use crate::pruning::PruneMask;
use crate::regularizers::{penalty_gradient, RegKind, RegularizerSpec, ResolvedReg};
use crate::sparse::SparseModel;

/// Weight-magnitude threshold for the per-epoch small-weight count.
pub const SMALL_WEIGHT_THRESHOLD: f64 = 1e-2;

/// Hyperparameters for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub reg: RegularizerSpec,
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn new(
        eta: f64,
        epochs: usize,
        batch_size: usize,
        seed: u64,
        reg: RegularizerSpec,
    ) -> Self {
        TrainConfig {
            eta,
            epochs,
            batch_size,
            seed,
            reg,
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.reg.validate()
    }

    /// Default fine-tuning recipe derived from a training config:
    /// ℓ2-only regularization at the same alpha_l2 and half the learning
    /// rate. Continued ℓ0 pressure is pointless once targets are pruned
    /// and can destabilize the surviving small weights.
    pub fn fine_tune_defaults(&self) -> TrainConfig {
        let mut cfg = self.clone();
        cfg.eta /= 2.0;
        cfg.reg.kind = if cfg.reg.alpha_l2 > 0.0 {
            RegKind::L2
        } else {
            RegKind::None
        };
        cfg
    }
}

/// Per-epoch training metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub small_weight_count: usize,
}

/// One record per completed epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// CSV rows `epoch,loss,train_acc,eval_acc,small_weight_count`; a
    /// missing eval accuracy leaves the field empty.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "epoch,loss,train_acc,eval_acc,small_weight_count")?;
        for r in &self.records {
            let eval = r.eval_accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{eval},{}",
                r.epoch, r.train_loss, r.train_accuracy, r.small_weight_count
            )?;
        }
        Ok(())
    }
}

/// Apply one penalized gradient step in place.
///
/// For each weight, both the penalty term and the loss term are read
/// from the pre-update value; biases receive the loss gradient only.
pub fn sgd_step(
    net: &mut Network,
    grads: &Gradients,
    kind: RegKind,
    resolved: &ResolvedReg,
    eta: f64,
) -> Result<()> {
    if grads.weights.len() != net.layers().len() || resolved.len() != net.layers().len() {
        return Err(Error::Shape(
            "gradient/penalty layout does not match network".into(),
        ));
    }
    for (li, layer) in net.layers_mut().iter_mut().enumerate() {
        let gw = &grads.weights[li];
        if gw.rows() != layer.weights().rows() || gw.cols() != layer.weights().cols() {
            return Err(Error::Shape(format!(
                "gradient shape mismatch in layer {li}"
            )));
        }
        let params = resolved.layer(li);
        for (w, &g) in layer.weights_mut().data_mut().iter_mut().zip(gw.data()) {
            *w -= eta * penalty_gradient(kind, *w, params) + eta * g;
        }
        let gb = &grads.biases[li];
        if gb.len() != layer.biases().len() {
            return Err(Error::Shape(format!(
                "bias gradient mismatch in layer {li}"
            )));
        }
        for (b, &g) in layer.biases_mut().iter_mut().zip(gb) {
            *b -= eta * g;
        }
    }
    Ok(())
}

fn run_training(
    net: &Network,
    mask: Option<&PruneMask>,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    if data.feature_dim() != net.input_dim() {
        return Err(Error::Shape(format!(
            "dataset has {} features, network expects {}",
            data.feature_dim(),
            net.input_dim()
        )));
    }
    if data.classes() > net.output_dim() {
        return Err(Error::Shape(format!(
            "dataset has {} classes but network emits {} logits",
            data.classes(),
            net.output_dim()
        )));
    }
    if let Some(m) = mask {
        if !m.congruent_with(net) {
            return Err(Error::Shape("mask does not match network shape".into()));
        }
    }
    let resolved = cfg.reg.resolve(&net.layer_weight_counts())?;

    let mut net = net.clone();
    if let Some(m) = mask {
        m.zero_dropped(&mut net)?;
    }
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, labels) = data.gather(chunk);
            let (loss, grads, logits) = net.backward_with_logits(&batch, &labels)?;
            sgd_step(&mut net, &grads, cfg.reg.kind, &resolved, cfg.eta)?;
            if let Some(m) = mask {
                m.zero_dropped(&mut net)?;
            }
            loss_sum += loss * chunk.len() as f64;
            correct += count_correct(&logits, &labels);
        }
        let eval_accuracy = match eval {
            Some(d) => Some(evaluate(&net, d)?),
            None => None,
        };
        report.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            eval_accuracy,
            small_weight_count: net.count_small_weights(SMALL_WEIGHT_THRESHOLD),
        });
    }
    Ok((net, report))
}

/// Train a copy of `net` on `data`; the input network is not mutated.
/// When `eval` is given, its accuracy is recorded every epoch.
pub fn train(
    net: &Network,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    run_training(net, None, data, eval, cfg)
}

/// Train under a prune mask: the mask is re-applied after every weight
/// update, so dropped weights stay exactly zero throughout.
pub fn fine_tune(
    net: &Network,
    mask: &PruneMask,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    run_training(net, Some(mask), data, eval, cfg)
}

/// Anything that maps feature batches to logits.
pub trait LogitModel {
    fn input_dim(&self) -> usize;
    fn batch_logits(&self, batch: &Matrix) -> Result<Matrix>;
}

impl LogitModel for Network {
    fn input_dim(&self) -> usize {
        Network::input_dim(self)
    }

    fn batch_logits(&self, batch: &Matrix) -> Result<Matrix> {
        self.forward(batch)
    }
}

impl LogitModel for SparseModel {
    fn input_dim(&self) -> usize {
        SparseModel::input_dim(self)
    }

    fn batch_logits(&self, batch: &Matrix) -> Result<Matrix> {
        self.forward(batch)
    }
}

/// Index of the row maximum; ties resolve to the lowest class index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

fn count_correct(logits: &Matrix, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|(i, &y)| argmax(logits.row(*i)) == y)
        .count()
}

const EVAL_CHUNK: usize = 512;

/// Fraction of samples whose argmax prediction matches the label.
pub fn evaluate<M: LogitModel + ?Sized>(model: &M, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("evaluation dataset is empty".into()));
    }
    if data.feature_dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "dataset has {} features, model expects {}",
            data.feature_dim(),
            model.input_dim()
        )));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (batch, labels) = data.gather(chunk);
        let logits = model.batch_logits(&batch)?;
        correct += count_correct(&logits, &labels);
    }
    Ok(correct as f64 / data.len() as f64)
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_blobs, Split};
    use crate::model::{Activation, DenseLayer, InitScheme};
    use crate::pruning::{apply_mask, global_prune};
    use crate::sparse::to_sparse;

    /// Single 1x1 identity layer holding one weight.
    fn one_weight_net(w: f64) -> Network {
        let layer = DenseLayer::new(
            Matrix::from_vec(1, 1, vec![w]).unwrap(),
            vec![0.0],
            Activation::Identity,
        )
        .unwrap();
        Network::new(vec![layer]).unwrap()
    }

    fn step_once(net: &mut Network, grad: f64, spec: &RegularizerSpec, eta: f64) {
        let resolved = spec.resolve(&net.layer_weight_counts()).unwrap();
        let mut grads = Gradients::zeros_like(net);
        grads.weights[0].set(0, 0, grad);
        sgd_step(net, &grads, spec.kind, &resolved, eta).unwrap();
    }

    #[test]
    fn l2_update_matches_hand_value() {
        let mut net = one_weight_net(0.5);
        let spec = RegularizerSpec::global(RegKind::L2, 0.1, 0.0, 1.0);
        step_once(&mut net, 0.0, &spec, 0.1);
        let w = net.layers()[0].weights().at(0, 0);
        assert!((w - 0.49).abs() < 1e-12);
    }

    #[test]
    fn l1_update_matches_hand_value() {
        let mut net = one_weight_net(0.5);
        let spec = RegularizerSpec::global(RegKind::L1, 0.0, 0.2, 1.0);
        step_once(&mut net, 0.0, &spec, 0.1);
        let w = net.layers()[0].weights().at(0, 0);
        assert!((w - 0.48).abs() < 1e-12);
    }

    #[test]
    fn l0_update_matches_hand_value() {
        let mut net = one_weight_net(0.5);
        let spec = RegularizerSpec::global(RegKind::L0, 0.0, 0.1, 5.0);
        step_once(&mut net, 0.0, &spec, 0.1);
        let w = net.layers()[0].weights().at(0, 0);
        let expected = 0.5 - 0.1 * 0.1 * 5.0 * (-2.5f64).exp();
        assert!((w - expected).abs() < 1e-12);
        assert!((w - 0.4958958).abs() < 1e-7);
    }

    #[test]
    fn combined_update_matches_hand_value() {
        let mut net = one_weight_net(0.5);
        let spec = RegularizerSpec::global(RegKind::L2L0, 0.1, 0.1, 5.0);
        step_once(&mut net, 0.0, &spec, 0.1);
        let w = net.layers()[0].weights().at(0, 0);
        let expected = 0.5 - 0.01 - 0.1 * 0.1 * 5.0 * (-2.5f64).exp();
        assert!((w - expected).abs() < 1e-12);
        assert!((w - 0.4858958).abs() < 1e-7);
    }

    #[test]
    fn zero_alpha_step_is_plain_gradient_descent() {
        let mut net = one_weight_net(0.5);
        let spec = RegularizerSpec::none();
        step_once(&mut net, 0.3, &spec, 0.1);
        let w = net.layers()[0].weights().at(0, 0);
        assert!((w - (0.5 - 0.1 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn penalty_shifts_step_by_exactly_its_term() {
        // With frozen gradients the difference against the plain step is
        // exactly -eta * penalty_gradient at the pre-update weight.
        let g = 0.3;
        let eta = 0.05;
        for kind in [RegKind::L2, RegKind::L1, RegKind::L0, RegKind::L2L0] {
            let spec = RegularizerSpec::global(kind, 0.07, 0.03, 8.0);
            let resolved = spec.resolve(&[1]).unwrap();
            let mut plain = one_weight_net(0.4);
            step_once(&mut plain, g, &RegularizerSpec::none(), eta);
            let mut penalized = one_weight_net(0.4);
            step_once(&mut penalized, g, &spec, eta);
            let diff =
                penalized.layers()[0].weights().at(0, 0) - plain.layers()[0].weights().at(0, 0);
            let expected = -eta * penalty_gradient(kind, 0.4, resolved.layer(0));
            assert!((diff - expected).abs() < 1e-15, "{kind:?}");
        }
    }

    #[test]
    fn biases_never_feel_the_penalty() {
        let mut net = one_weight_net(0.5);
        net.layers_mut()[0].biases_mut()[0] = 0.25;
        let spec = RegularizerSpec::global(RegKind::L2L0, 0.5, 0.5, 5.0);
        step_once(&mut net, 0.0, &spec, 0.1);
        assert_eq!(net.layers()[0].biases()[0], 0.25);
    }

    fn ci_blobs(seed: u64) -> (Dataset, Dataset) {
        let train = synth_blobs(4, 600, 16, seed, Split::Train).unwrap();
        let test = synth_blobs(4, 200, 16, seed + 1000, Split::Test).unwrap();
        (train, test)
    }

    fn fresh_net(seed: u64, dims: &[usize]) -> Network {
        let mut net = Network::mlp(dims).unwrap();
        net.init_weights(&mut Rng::new(seed), InitScheme::UniformHe);
        net
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (data, _) = ci_blobs(3);
        let net = fresh_net(7, &[16, 8, 4]);
        let cfg = TrainConfig::new(0.1, 3, 32, 42, RegularizerSpec::none());
        let (a, ra) = train(&net, &data, None, &cfg).unwrap();
        let (b, rb) = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn training_does_not_mutate_the_input_net() {
        let (data, _) = ci_blobs(4);
        let net = fresh_net(8, &[16, 8, 4]);
        let before = net.clone();
        let cfg = TrainConfig::new(0.1, 1, 32, 1, RegularizerSpec::none());
        let _ = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn training_learns_blobs() {
        let (data, test) = ci_blobs(5);
        let net = fresh_net(9, &[16, 8, 4]);
        let cfg = TrainConfig::new(0.2, 8, 32, 2, RegularizerSpec::none());
        let (trained, report) = train(&net, &data, Some(&test), &cfg).unwrap();
        let acc = evaluate(&trained, &test).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
        assert_eq!(report.records.len(), 8);
        assert_eq!(report.last().unwrap().eval_accuracy, Some(acc));
    }

    #[test]
    fn report_has_one_record_per_epoch() {
        let (data, _) = ci_blobs(6);
        let net = fresh_net(10, &[16, 8, 4]);
        let cfg = TrainConfig::new(0.1, 5, 64, 3, RegularizerSpec::none());
        let (_, report) = train(&net, &data, None, &cfg).unwrap();
        assert_eq!(report.records.len(), 5);
        for (i, r) in report.records.iter().enumerate() {
            assert_eq!(r.epoch, i + 1);
            assert!(r.eval_accuracy.is_none());
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let (data, _) = ci_blobs(7);
        let net = fresh_net(11, &[16, 8, 4]);
        let mut cfg = TrainConfig::new(0.1, 1, 32, 1, RegularizerSpec::none());
        cfg.eta = 0.0;
        assert!(matches!(
            train(&net, &data, None, &cfg),
            Err(Error::Config(_))
        ));
        let mut cfg = TrainConfig::new(0.1, 1, 32, 1, RegularizerSpec::none());
        cfg.epochs = 0;
        assert!(matches!(
            train(&net, &data, None, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fine_tune_keeps_dropped_weights_at_zero() {
        let (data, _) = ci_blobs(8);
        let base = fresh_net(12, &[16, 8, 4]);
        let cfg = TrainConfig::new(0.2, 2, 32, 5, RegularizerSpec::none());
        let (trained, _) = train(&base, &data, None, &cfg).unwrap();
        let mask = global_prune(&trained, 4.0).unwrap();
        let pruned = apply_mask(&trained, &mask).unwrap();

        // Check the invariant at every epoch boundary.
        let mut current = pruned;
        for seed in 0..3u64 {
            let cfg = TrainConfig::new(0.1, 1, 32, seed, RegularizerSpec::none());
            let (next, _) = fine_tune(&current, &mask, &data, None, &cfg).unwrap();
            assert_eq!(mask.dropped_magnitude(&next).unwrap(), 0.0);
            current = next;
        }
    }

    #[test]
    fn fine_tune_with_all_true_mask_equals_train() {
        let (data, _) = ci_blobs(9);
        let net = fresh_net(13, &[16, 8, 4]);
        let mask = PruneMask::all_true(&net);
        let cfg = TrainConfig::new(
            0.15,
            3,
            32,
            21,
            RegularizerSpec::global(RegKind::L2, 1e-3, 0.0, 1.0),
        );
        let (a, ra) = train(&net, &data, None, &cfg).unwrap();
        let (b, rb) = fine_tune(&net, &mask, &data, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn fine_tune_mask_shape_mismatch_errors() {
        let (data, _) = ci_blobs(10);
        let net = fresh_net(14, &[16, 8, 4]);
        let other = fresh_net(15, &[16, 6, 4]);
        let mask = PruneMask::all_true(&other);
        let cfg = TrainConfig::new(0.1, 1, 32, 1, RegularizerSpec::none());
        assert!(matches!(
            fine_tune(&net, &mask, &data, None, &cfg),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn fine_tune_defaults_swap_to_l2_and_halve_eta() {
        let cfg = TrainConfig::new(
            0.2,
            4,
            32,
            1,
            RegularizerSpec::global(RegKind::L2L0, 1e-4, 0.02, 20.0),
        );
        let ft = cfg.fine_tune_defaults();
        assert_eq!(ft.reg.kind, RegKind::L2);
        assert_eq!(ft.reg.alpha_l2, 1e-4);
        assert_eq!(ft.eta, 0.1);
        assert_eq!(ft.epochs, 4);
    }

    #[test]
    fn l0_training_induces_more_small_weights_than_l2() {
        let mut l0_counts = Vec::new();
        let mut l2_counts = Vec::new();
        for seed in [1u64, 2, 3] {
            let (data, _) = ci_blobs(seed);
            let net = fresh_net(seed + 50, &[16, 8, 4]);
            let l0_cfg = TrainConfig::new(
                0.2,
                8,
                32,
                seed,
                RegularizerSpec::global(RegKind::L0, 0.0, 0.02, 25.0),
            );
            let l2_cfg = TrainConfig::new(
                0.2,
                8,
                32,
                seed,
                RegularizerSpec::global(RegKind::L2, 1e-4, 0.0, 1.0),
            );
            let (l0_net, _) = train(&net, &data, None, &l0_cfg).unwrap();
            let (l2_net, _) = train(&net, &data, None, &l2_cfg).unwrap();
            l0_counts.push(l0_net.count_small_weights(SMALL_WEIGHT_THRESHOLD));
            l2_counts.push(l2_net.count_small_weights(SMALL_WEIGHT_THRESHOLD));
        }
        l0_counts.sort_unstable();
        l2_counts.sort_unstable();
        assert!(
            l0_counts[1] > l2_counts[1],
            "l0 median {} should exceed l2 median {}",
            l0_counts[1],
            l2_counts[1]
        );
    }

    #[test]
    fn evaluate_perfect_memorizer_is_one() {
        let layer =
            DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Identity).unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let features = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let data = Dataset::new(features, vec![0, 1], 2, Split::Train).unwrap();
        assert_eq!(evaluate(&net, &data).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_constant_logits_hits_chance_level() {
        let net = Network::mlp(&[8, 10]).unwrap(); // all-zero weights
        let data = synth_blobs(10, 1000, 8, 3, Split::Test).unwrap();
        let acc = evaluate(&net, &data).unwrap();
        assert!((acc - 0.1).abs() < 0.01, "accuracy {acc}");
    }

    #[test]
    fn evaluate_dense_and_sparse_agree() {
        let (data, test) = ci_blobs(11);
        let net = fresh_net(16, &[16, 8, 4]);
        let cfg = TrainConfig::new(0.2, 4, 32, 9, RegularizerSpec::none());
        let (trained, _) = train(&net, &data, None, &cfg).unwrap();
        let mask = global_prune(&trained, 3.0).unwrap();
        let dense = apply_mask(&trained, &mask).unwrap();
        let sparse = to_sparse(&trained, &mask).unwrap();
        let a = evaluate(&dense, &test).unwrap();
        let b = evaluate(&sparse, &test).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_rejects_empty_dataset() {
        let net = Network::mlp(&[4, 2]).unwrap();
        let data = Dataset::new(Matrix::zeros(0, 4), vec![], 2, Split::Test).unwrap();
        assert!(matches!(evaluate(&net, &data), Err(Error::Input(_))));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn report_csv_round_trips_small_fields() {
        let report = TrainReport {
            records: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.25,
                train_accuracy: 0.875,
                eval_accuracy: None,
                small_weight_count: 12,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,loss,train_acc,eval_acc,small_weight_count\n"));
        assert!(text.contains("1,0.25,0.875,,12"));
    }
}
