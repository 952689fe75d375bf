//! End-to-end library flows: train, prune, fine-tune, sweep.

use sparsenet::data::{synth_blobs, Split};
use sparsenet::model::{InitScheme, Network};
use sparsenet::numerics::Rng;
use sparsenet::pruning::{apply_mask, global_prune};
use sparsenet::regularizers::{RegKind, RegularizerSpec};
use sparsenet::sweep::{sweep_with_threads, PruneStrategy};
use sparsenet::training::{evaluate, fine_tune, train, TrainConfig};

fn fresh_net(seed: u64, dims: &[usize]) -> Network {
    let mut net = Network::mlp(dims).unwrap();
    net.init_weights(&mut Rng::new(seed), InitScheme::UniformHe);
    net
}

#[test]
fn linear_model_separates_two_blobs() {
    let train_ds = synth_blobs(2, 1000, 2, 3, Split::Train).unwrap();
    let test_ds = synth_blobs(2, 400, 2, 1003, Split::Test).unwrap();
    // Single identity layer: a plain linear classifier.
    let net = fresh_net(1, &[2, 2]);
    let cfg = TrainConfig::new(0.5, 5, 32, 7, RegularizerSpec::none());
    let (trained, _) = train(&net, &train_ds, None, &cfg).unwrap();
    let acc = evaluate(&trained, &test_ds).unwrap();
    assert!(acc > 0.95, "linear model reached only {acc}");
}

#[test]
fn fine_tuning_recovers_accuracy_at_16x() {
    let mut pre_ft = Vec::new();
    let mut post_ft = Vec::new();
    for seed in [1u64, 2, 3] {
        let train_ds = synth_blobs(4, 2000, 32, 100 + seed, Split::Train).unwrap();
        let test_ds = synth_blobs(4, 800, 32, 200 + seed, Split::Test).unwrap();
        let net = fresh_net(seed, &[32, 16, 4]);
        let cfg = TrainConfig::new(
            0.2,
            10,
            32,
            seed,
            RegularizerSpec::global(RegKind::L2L0, 1e-4, 0.02, 20.0),
        );
        let (trained, _) = train(&net, &train_ds, None, &cfg).unwrap();
        let mask = global_prune(&trained, 16.0).unwrap();
        let pruned = apply_mask(&trained, &mask).unwrap();
        pre_ft.push(evaluate(&pruned, &test_ds).unwrap());

        let mut ft_cfg = cfg.fine_tune_defaults();
        ft_cfg.epochs = 5;
        let (tuned, _) = fine_tune(&pruned, &mask, &train_ds, None, &ft_cfg).unwrap();
        post_ft.push(evaluate(&tuned, &test_ds).unwrap());
    }
    pre_ft.sort_by(f64::total_cmp);
    post_ft.sort_by(f64::total_cmp);
    assert!(
        post_ft[1] >= pre_ft[1],
        "median post-FT {} below median pre-FT {}",
        post_ft[1],
        pre_ft[1]
    );
}

#[test]
fn magnitude_pruning_beats_random_at_8x() {
    let train_ds = synth_blobs(4, 2000, 32, 5, Split::Train).unwrap();
    let test_ds = synth_blobs(4, 800, 32, 1005, Split::Test).unwrap();
    let net = fresh_net(9, &[32, 16, 4]);
    let cfg = TrainConfig::new(
        0.2,
        10,
        32,
        9,
        RegularizerSpec::global(RegKind::L2L0, 1e-4, 0.02, 20.0),
    );
    let (trained, _) = train(&net, &train_ds, None, &cfg).unwrap();
    let records = sweep_with_threads(
        &trained,
        &train_ds,
        &test_ds,
        &[8.0],
        &[PruneStrategy::Gp, PruneStrategy::Rp],
        false,
        &cfg.fine_tune_defaults(),
        &[1, 2, 3],
        1,
    )
    .unwrap();
    let median = |strategy: PruneStrategy| -> f64 {
        let mut accs: Vec<f64> = records
            .iter()
            .filter(|r| r.strategy == strategy)
            .map(|r| r.accuracy)
            .collect();
        accs.sort_by(f64::total_cmp);
        accs[accs.len() / 2]
    };
    let (gp, rp) = (median(PruneStrategy::Gp), median(PruneStrategy::Rp));
    assert!(gp >= rp, "GP median {gp} below RP median {rp}");
}
