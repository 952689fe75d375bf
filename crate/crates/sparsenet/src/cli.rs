//! Command-line interface.
//!
//! Subcommands: `train`, `prune`, `finetune`, `eval`, `sweep`, `curve`,
//! and `export`. Experiments are described by a JSON run config; models
//! travel as `SND1` (dense) and `SNZ1` (sparse) files, results as CSV.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::data::{load_mnist, synth_blobs, Dataset, Split};
use crate::error::{Error, Result};
use crate::io::{load_model, save_model, ModelFile};
use crate::model::{InitScheme, Network};
use crate::numerics::Rng;
use crate::pruning::{apply_mask, compression_rate, nonzero_mask};
use crate::regularizers::{penalization_curve, write_curve_csv, LayerPenalty, RegKind};
use crate::sparse::to_sparse;
use crate::sweep::{sweep_with_threads, threads_from_env, write_sweep_csv, PruneStrategy};
use crate::training::{evaluate, fine_tune, train, TrainReport};

/// Sparseness-driven compression for dense networks: penalized training,
/// magnitude pruning, masked fine-tuning, and sparse inference.
#[derive(Debug, Parser)]
#[command(name = "sparsenet", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a dense network from a JSON run config.
    Train {
        /// Run-config path.
        #[arg(long)]
        config: PathBuf,
        /// Write the trained model here (SND1).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-epoch report here (CSV).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Override the config's training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Prune a dense model at a target compression rate.
    Prune {
        /// Dense model path (SND1).
        #[arg(long)]
        model: PathBuf,
        /// Pruning strategy: gp, lp, or rp.
        #[arg(long)]
        strategy: String,
        /// Target compression rate (>= 1).
        #[arg(long)]
        rate: f64,
        /// Seed for random pruning.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the pruned model here (SNZ1).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune a sparse model under its own mask.
    Finetune {
        /// Run-config path (provides data and fine-tune settings).
        #[arg(long)]
        config: PathBuf,
        /// Sparse model path (SNZ1).
        #[arg(long)]
        model: PathBuf,
        /// Write the fine-tuned model here (SNZ1).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-epoch report here (CSV).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Override the fine-tune seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report a model's accuracy on a dataset.
    Eval {
        /// Model path (SND1 or SNZ1).
        #[arg(long)]
        model: PathBuf,
        /// Dataset: `train`/`test` (with --config), `synth:C,N,D,SEED`,
        /// or `idx:IMAGES,LABELS`.
        #[arg(long)]
        data: String,
        /// Run config providing the train/test datasets.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the accuracy-versus-compression sweep from a run config.
    Sweep {
        /// Run-config path (must contain a `sweep` section).
        #[arg(long)]
        config: PathBuf,
        /// Write sweep records here (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Reuse a trained dense model instead of training one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Emit penalization-term samples over [-1, 1] as CSV.
    Curve {
        /// Penalty kind: l2, l1, l0, or l2l0.
        #[arg(long)]
        kind: String,
        /// Surrogate sharpness (>= 1).
        #[arg(long, default_value_t = 5.0)]
        beta: f64,
        /// Learning rate in the plotted term.
        #[arg(long)]
        eta: f64,
        /// Penalty strength (fills both alpha slots).
        #[arg(long)]
        alpha: f64,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert SND1 to SNZ1 (keeping nonzero weights) or SNZ1 to SND1.
    Export {
        /// Input model path.
        #[arg(long)]
        model: PathBuf,
        /// Output model path; the direction is inferred from the input.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Samples in each side of the emitted curve (odd, so w = 0 is sampled).
const CURVE_STEPS: usize = 2001;

/// Entry point for `main`: parse `std::env::args`, run, map errors to
/// exit codes.
pub fn run_env() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => match run(cli) {
            Ok(()) => 0,
            Err(err) => {
                eprintln!("error: {err}");
                1
            }
        },
        Err(err) => {
            // clap prints its own message (help/usage included).
            let _ = err.print();
            if err.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

/// Execute one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            report,
            seed,
        } => cmd_train(&config, out, report, seed),
        Command::Prune {
            model,
            strategy,
            rate,
            seed,
            out,
        } => cmd_prune(&model, &strategy, rate, seed, &out),
        Command::Finetune {
            config,
            model,
            out,
            report,
            seed,
        } => cmd_finetune(&config, &model, out, report, seed),
        Command::Eval {
            model,
            data,
            config,
        } => cmd_eval(&model, &data, config.as_deref()),
        Command::Sweep { config, out, model } => cmd_sweep(&config, &out, model.as_deref()),
        Command::Curve {
            kind,
            beta,
            eta,
            alpha,
            out,
        } => cmd_curve(&kind, beta, eta, alpha, out.as_deref()),
        Command::Export { model, out } => cmd_export(&model, &out),
    }
}

fn init_network(cfg: &RunConfig, input_dim: usize, classes: usize, seed: u64) -> Result<Network> {
    let dims = cfg.network_dims(input_dim, classes);
    let mut net = Network::mlp(&dims)?;
    net.init_weights(&mut Rng::new(seed), InitScheme::UniformHe);
    Ok(net)
}

fn write_report(report: &TrainReport, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn print_report(report: &TrainReport) {
    for r in &report.records {
        let eval = r
            .eval_accuracy
            .map(|a| format!(" eval_acc {a:.4}"))
            .unwrap_or_default();
        println!(
            "epoch {:>3}  loss {:.6}  train_acc {:.4}{eval}  |w|<{:.0e}: {}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            crate::training::SMALL_WEIGHT_THRESHOLD,
            r.small_weight_count
        );
    }
}

fn cmd_train(
    config: &Path,
    out: Option<PathBuf>,
    report_path: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let (train_ds, test_ds) = cfg.load_data()?;
    let mut tc = cfg.train_config()?;
    if let Some(seed) = seed {
        tc.seed = seed;
    }
    let net = init_network(&cfg, train_ds.feature_dim(), train_ds.classes(), tc.seed)?;
    let (trained, report) = train(&net, &train_ds, Some(&test_ds), &tc)?;
    print_report(&report);
    println!(
        "trained {} weights + {} biases; test accuracy {:.4}",
        trained.weight_count(),
        trained.bias_count(),
        evaluate(&trained, &test_ds)?
    );
    if let Some(path) = report_path {
        write_report(&report, &path)?;
    }
    if let Some(path) = out {
        save_model(&path, &ModelFile::Dense(trained))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_prune(model: &Path, strategy: &str, rate: f64, seed: u64, out: &Path) -> Result<()> {
    let strategy: PruneStrategy = strategy.parse()?;
    let ModelFile::Dense(net) = load_model(model)? else {
        return Err(Error::Config("prune expects a dense (SND1) model".into()));
    };
    let mask = strategy.prune(&net, rate, seed)?;
    let pruned = apply_mask(&net, &mask)?;
    let sparse = to_sparse(&pruned, &mask)?;
    let weights = net.weight_count();
    let biases = net.bias_count();
    let kept = mask.kept_count();
    println!(
        "{strategy} rate {rate}: kept {kept} of {weights} weights ({biases} biases untouched)"
    );
    println!(
        "compression: {:.2}x over weights, {:.2}x over all params",
        compression_rate(weights, kept)?,
        compression_rate(weights + biases, kept + biases)?
    );
    save_model(out, &ModelFile::Sparse(sparse))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_finetune(
    config: &Path,
    model: &Path,
    out: Option<PathBuf>,
    report_path: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let (train_ds, test_ds) = cfg.load_data()?;
    let ModelFile::Sparse(sparse) = load_model(model)? else {
        return Err(Error::Config(
            "finetune expects a sparse (SNZ1) model".into(),
        ));
    };
    let net = sparse.to_network()?;
    let mask = sparse.mask()?;
    let mut ft = cfg.fine_tune_config()?;
    if let Some(seed) = seed {
        ft.seed = seed;
    }
    let before = evaluate(&net, &test_ds)?;
    let (tuned, report) = fine_tune(&net, &mask, &train_ds, Some(&test_ds), &ft)?;
    print_report(&report);
    println!(
        "test accuracy {before:.4} -> {:.4} ({} nonzero weights)",
        evaluate(&tuned, &test_ds)?,
        mask.kept_count()
    );
    if let Some(path) = report_path {
        write_report(&report, &path)?;
    }
    if let Some(path) = out {
        save_model(&path, &ModelFile::Sparse(to_sparse(&tuned, &mask)?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Resolve an `--data` argument into a dataset.
///
/// Accepted forms: `train` / `test` (requires `--config`),
/// `synth:classes,samples,dims,seed`, and `idx:images_path,labels_path`.
fn resolve_dataset(spec: &str, config: Option<&Path>) -> Result<Dataset> {
    match spec {
        "train" | "test" => {
            let path = config.ok_or_else(|| {
                Error::Config(format!(
                    "--data {spec} needs --config to supply the dataset"
                ))
            })?;
            let cfg = RunConfig::from_path(path)?;
            let (train_ds, test_ds) = cfg.load_data()?;
            Ok(if spec == "train" { train_ds } else { test_ds })
        }
        _ if spec.starts_with("synth:") => {
            let rest = &spec["synth:".len()..];
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Config(format!(
                    "expected synth:classes,samples,dims,seed; got `{spec}`"
                )));
            }
            let nums: Vec<u64> = parts
                .iter()
                .map(|p| {
                    p.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Config(format!("bad synth field `{p}`")))
                })
                .collect::<Result<_>>()?;
            synth_blobs(
                nums[0] as usize,
                nums[1] as usize,
                nums[2] as usize,
                nums[3],
                Split::Test,
            )
        }
        _ if spec.starts_with("idx:") => {
            let rest = &spec["idx:".len()..];
            let (images, labels) = rest.split_once(',').ok_or_else(|| {
                Error::Config(format!(
                    "expected idx:images_path,labels_path; got `{spec}`"
                ))
            })?;
            load_mnist(
                Path::new(images.trim()),
                Path::new(labels.trim()),
                Split::Test,
            )
        }
        other => Err(Error::Config(format!(
            "unknown --data `{other}`; use train, test, synth:..., or idx:..."
        ))),
    }
}

fn cmd_eval(model: &Path, data: &str, config: Option<&Path>) -> Result<()> {
    let dataset = resolve_dataset(data, config)?;
    let (accuracy, nnz, total) = match load_model(model)? {
        ModelFile::Dense(net) => {
            let nnz = net.weight_count() - net.zero_weight_count();
            let total = net.weight_count();
            (evaluate(&net, &dataset)?, nnz, total)
        }
        ModelFile::Sparse(sparse) => {
            let dense_total: usize = sparse.layers().iter().map(|l| l.rows * l.cols).sum();
            (evaluate(&sparse, &dataset)?, sparse.nnz(), dense_total)
        }
    };
    println!(
        "accuracy {accuracy:.4} on {} samples ({nnz}/{total} weights)",
        dataset.len()
    );
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, model: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let section = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("config has no `sweep` section".into()))?;
    let (train_ds, test_ds) = cfg.load_data()?;
    let net = match model {
        Some(path) => {
            let ModelFile::Dense(net) = load_model(path)? else {
                return Err(Error::Config("sweep expects a dense (SND1) model".into()));
            };
            net
        }
        None => {
            let tc = cfg.train_config()?;
            let fresh = init_network(&cfg, train_ds.feature_dim(), train_ds.classes(), tc.seed)?;
            println!("training base network ({} epochs)...", tc.epochs);
            let (trained, _) = train(&fresh, &train_ds, None, &tc)?;
            trained
        }
    };
    let ft_cfg = cfg.fine_tune_config()?;
    let threads = threads_from_env()?;
    let records = sweep_with_threads(
        &net,
        &train_ds,
        &test_ds,
        &section.rates,
        &section.strategies,
        section.fine_tune,
        &ft_cfg,
        &section.seeds,
        threads,
    )?;
    let mut buf = Vec::new();
    write_sweep_csv(&records, &mut buf)?;
    fs::write(out, buf)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn cmd_curve(kind: &str, beta: f64, eta: f64, alpha: f64, out: Option<&Path>) -> Result<()> {
    let kind: RegKind = kind.parse()?;
    let params = LayerPenalty::new(alpha, alpha, beta);
    let points = penalization_curve(kind, &params, eta, -1.0, 1.0, CURVE_STEPS)?;
    let mut buf = Vec::new();
    write_curve_csv(&points, &mut buf)?;
    match out {
        Some(path) => {
            fs::write(path, buf)?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            std::io::Write::write_all(&mut stdout, &buf)?;
        }
    }
    Ok(())
}

fn cmd_export(model: &Path, out: &Path) -> Result<()> {
    match load_model(model)? {
        ModelFile::Dense(net) => {
            let mask = nonzero_mask(&net);
            let sparse = to_sparse(&net, &mask)?;
            println!(
                "dense -> sparse: {} of {} weights stored",
                sparse.nnz(),
                net.weight_count()
            );
            save_model(out, &ModelFile::Sparse(sparse))?;
        }
        ModelFile::Sparse(sparse) => {
            let net = sparse.to_network()?;
            println!(
                "sparse -> dense: {} stored weights into {} slots",
                sparse.nnz(),
                net.weight_count()
            );
            save_model(out, &ModelFile::Dense(net))?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
