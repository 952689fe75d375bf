//! Accuracy-versus-compression sweeps.
//!
//! For every (strategy, rate, seed) combination the base network is
//! pruned fresh, evaluated, optionally fine-tuned under the mask and
//! evaluated again. The base network is never mutated. Combinations are
//! independent, so they may run on worker threads; results are sorted by
//! (strategy, rate, seed, fine-tuned) before being returned, making the
//! output identical regardless of thread count.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Network;
use crate::numerics::Rng;
use crate::pruning::{apply_mask, global_prune, layerwise_prune, random_prune, PruneMask};
use crate::training::{evaluate, fine_tune, TrainConfig};

/// Environment variable capping sweep parallelism; 0 or unset runs the
/// single-threaded deterministic path.
pub const THREADS_ENV: &str = "SPARSENET_THREADS";

/// Which pruning rule a sweep point used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneStrategy {
    /// Global magnitude pruning.
    Gp,
    /// Layerwise magnitude pruning.
    Lp,
    /// Random pruning.
    Rp,
}

impl PruneStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PruneStrategy::Gp => "GP",
            PruneStrategy::Lp => "LP",
            PruneStrategy::Rp => "RP",
        }
    }

    /// Build the mask for this strategy; `seed` only matters for `Rp`.
    pub fn prune(self, net: &Network, rate: f64, seed: u64) -> Result<PruneMask> {
        match self {
            PruneStrategy::Gp => global_prune(net, rate),
            PruneStrategy::Lp => layerwise_prune(net, rate),
            PruneStrategy::Rp => random_prune(net, rate, &mut Rng::new(seed)),
        }
    }
}

impl std::str::FromStr for PruneStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(PruneStrategy::Gp),
            "lp" => Ok(PruneStrategy::Lp),
            "rp" => Ok(PruneStrategy::Rp),
            other => Err(Error::Config(format!("unknown prune strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for PruneStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub strategy: PruneStrategy,
    pub rate: f64,
    pub fine_tuned: bool,
    pub accuracy: f64,
    /// Kept (nonzero) weight count under the prune mask; biases are not
    /// included and can be added back from the model shape.
    pub nnz: usize,
    pub seed: u64,
}

/// Number of worker threads requested via [`THREADS_ENV`].
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(raw) if raw.trim().is_empty() => Ok(1),
        Ok(raw) => {
            raw.trim().parse::<usize>().map(|n| n.max(1)).map_err(|_| {
                Error::Config(format!("{THREADS_ENV} must be an integer, got `{raw}`"))
            })
        }
    }
}

fn validate_inputs(rates: &[f64], strategies: &[PruneStrategy], seeds: &[u64]) -> Result<()> {
    if rates.is_empty() || strategies.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs rates, strategies, and seeds".into(),
        ));
    }
    for pair in rates.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::Config(
                "sweep rates must be strictly ascending".into(),
            ));
        }
    }
    if rates[0] < 1.0 {
        return Err(Error::Config("sweep rates must be >= 1".into()));
    }
    Ok(())
}

fn run_combination(
    net: &Network,
    train_data: &Dataset,
    test_data: &Dataset,
    strategy: PruneStrategy,
    rate: f64,
    seed: u64,
    ft: Option<&TrainConfig>,
) -> Result<Vec<SweepRecord>> {
    let mask = strategy.prune(net, rate, seed)?;
    let pruned = apply_mask(net, &mask)?;
    let nnz = mask.kept_count();
    let mut records = vec![SweepRecord {
        strategy,
        rate,
        fine_tuned: false,
        accuracy: evaluate(&pruned, test_data)?,
        nnz,
        seed,
    }];
    if let Some(ft_cfg) = ft {
        let mut cfg = ft_cfg.clone();
        cfg.seed = seed;
        let (tuned, _) = fine_tune(&pruned, &mask, train_data, None, &cfg)?;
        records.push(SweepRecord {
            strategy,
            rate,
            fine_tuned: true,
            accuracy: evaluate(&tuned, test_data)?,
            nnz,
            seed,
        });
    }
    Ok(records)
}

/// Run the sweep single-threaded or across `threads` workers; every
/// thread count yields the same record list.
#[allow(clippy::too_many_arguments)]
pub fn sweep_with_threads(
    net: &Network,
    train_data: &Dataset,
    test_data: &Dataset,
    rates: &[f64],
    strategies: &[PruneStrategy],
    with_fine_tune: bool,
    ft_cfg: &TrainConfig,
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<SweepRecord>> {
    validate_inputs(rates, strategies, seeds)?;
    let ft = if with_fine_tune { Some(ft_cfg) } else { None };

    let mut combos = Vec::new();
    for &strategy in strategies {
        for &rate in rates {
            for &seed in seeds {
                combos.push((strategy, rate, seed));
            }
        }
    }

    let mut records: Vec<SweepRecord> = if threads <= 1 {
        let mut out = Vec::new();
        for &(strategy, rate, seed) in &combos {
            out.extend(run_combination(
                net, train_data, test_data, strategy, rate, seed, ft,
            )?);
        }
        out
    } else {
        let next = AtomicUsize::new(0);
        let workers = threads.min(combos.len());
        std::thread::scope(|scope| -> Result<Vec<SweepRecord>> {
            let mut handles = Vec::with_capacity(workers);
            for _ in 0..workers {
                let next = &next;
                let combos = &combos;
                handles.push(scope.spawn(move || -> Result<Vec<SweepRecord>> {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&(strategy, rate, seed)) = combos.get(i) else {
                            return Ok(local);
                        };
                        local.extend(run_combination(
                            net, train_data, test_data, strategy, rate, seed, ft,
                        )?);
                    }
                }));
            }
            let mut out = Vec::new();
            for handle in handles {
                out.extend(handle.join().expect("sweep worker panicked")?);
            }
            Ok(out)
        })?
    };

    records.sort_by(|a, b| {
        a.strategy
            .cmp(&b.strategy)
            .then(a.rate.total_cmp(&b.rate))
            .then(a.seed.cmp(&b.seed))
            .then(a.fine_tuned.cmp(&b.fine_tuned))
    });
    Ok(records)
}

/// [`sweep_with_threads`] with the worker count taken from
/// [`THREADS_ENV`].
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    net: &Network,
    train_data: &Dataset,
    test_data: &Dataset,
    rates: &[f64],
    strategies: &[PruneStrategy],
    with_fine_tune: bool,
    ft_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<SweepRecord>> {
    let threads = threads_from_env()?;
    sweep_with_threads(
        net,
        train_data,
        test_data,
        rates,
        strategies,
        with_fine_tune,
        ft_cfg,
        seeds,
        threads,
    )
}

/// Write records as `strategy,rate,fine_tuned,accuracy,nnz,seed` CSV.
pub fn write_sweep_csv(records: &[SweepRecord], out: &mut impl Write) -> Result<()> {
    writeln!(out, "strategy,rate,fine_tuned,accuracy,nnz,seed")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.strategy, r.rate, r.fine_tuned, r.accuracy, r.nnz, r.seed
        )?;
    }
    Ok(())
}

/// Parse CSV produced by [`write_sweep_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "strategy,rate,fine_tuned,accuracy,nnz,seed" {
        return Err(Error::Input(format!(
            "unexpected sweep CSV header `{header}`"
        )));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Input(format!(
                "line {}: expected 6 fields",
                lineno + 2
            )));
        }
        let parse_err = |what: &str| Error::Input(format!("line {}: bad {what}", lineno + 2));
        records.push(SweepRecord {
            strategy: fields[0].parse()?,
            rate: fields[1].parse().map_err(|_| parse_err("rate"))?,
            fine_tuned: fields[2].parse().map_err(|_| parse_err("fine_tuned"))?,
            accuracy: fields[3].parse().map_err(|_| parse_err("accuracy"))?,
            nnz: fields[4].parse().map_err(|_| parse_err("nnz"))?,
            seed: fields[5].parse().map_err(|_| parse_err("seed"))?,
        });
    }
    Ok(records)
}

// ===========================================================================
// Tests
// ===========================================================================
