//! Training runs, evaluation, circuit-family comparison and variance sweeps
//! built from the library pieces.

mod checkpoint;
mod config;
mod model;
pub mod plot;

pub use checkpoint::{Checkpoint, TensorEntry, MAGIC, VERSION};
pub use config::{HeadKind, NoiseEngine, NoiseKind, NoiseSpec, TrainConfig, DEFAULT_NOISE_P};
pub use model::{mode_for, BatchGrads, Model, QuantumMode};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::circuits::{Family, InitScheme};
use crate::data::{batches, load_dir, prepare_splits, Dataset};
use crate::diagnostics::{
    accuracy, variance_sweep, write_metrics_csv, write_timing_csv, write_variance_csv, MetricsRecord, SweepConfig,
    VarianceRow,
};
use crate::error::{Error, Result};
use crate::numerics::{mean, Rng};
use crate::optim::{Optimizer, OptimizerKind};
use crate::quantum::KrausChannel;

const EVAL_SALT: u64 = 0xE7A1_5EED;

/// Training and validation sets of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
}

impl Splits {
    pub fn load(cfg: &TrainConfig) -> Result<Self> {
        let (train, test) = load_dir(&cfg.data_dir)?;
        let (train, val) = prepare_splits(train, test, cfg.subset_train, cfg.subset_val, cfg.split_seed);
        Ok(Self { train, val })
    }
}

/// Owns the model, optimizer and master random stream of one run.
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    pub optimizer: Optimizer,
    pub metrics: Vec<MetricsRecord>,
    /// Epochs completed.
    pub epoch: usize,
    rng: Rng,
    channel: Option<KrausChannel>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model: Model::new(&config)?,
            optimizer: Optimizer::new(config.optimizer),
            metrics: Vec::new(),
            epoch: 0,
            rng: Rng::new(config.seed),
            channel: config.noise.channel()?,
            config,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut t = Self::new(ck.config.clone())?;
        ck.restore(&mut t.model)?;
        t.optimizer = ck.optimizer();
        t.metrics = ck.metrics.clone();
        t.epoch = ck.epoch;
        t.rng = Rng::from_state(&ck.rng);
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.config, self.epoch, self.rng.state(), &self.model, &self.optimizer, &self.metrics)
    }

    /// Accuracy and mean loss over `data` in eval mode.
    pub fn evaluate(&self, data: &Dataset) -> Result<(f64, f64)> {
        self.evaluate_with(data, mode_for(&self.config, self.channel.as_ref(), false, 0))
    }

    /// Like [`Trainer::evaluate`] with an explicit quantum mode; trajectory
    /// seeds are fixed per sample position.
    pub fn evaluate_with(&self, data: &Dataset, mode: QuantumMode) -> Result<(f64, f64)> {
        let exec = self.config.exec;
        let (mut preds, mut losses) = (Vec::with_capacity(data.len()), Vec::with_capacity(data.len()));
        let all: Vec<usize> = (0..data.len()).collect();
        for (c, chunk) in all.chunks(self.config.eval_batch).enumerate() {
            let mode = match mode {
                QuantumMode::Trajectory { channel, count, .. } => QuantumMode::Trajectory {
                    channel,
                    count,
                    seed: (self.config.seed ^ EVAL_SALT).wrapping_add(c as u64),
                },
                m => m,
            };
            let (p, l) = self.model.predict(data, chunk, mode, exec)?;
            preds.extend(p);
            losses.extend(l);
        }
        Ok((accuracy(&preds, &data.labels)?, mean(&losses)))
    }

    /// One pass over `train`: `(mean loss, mean per-batch variance of the
    /// circuit-angle gradient)`.
    pub fn train_epoch(&mut self, train: &Dataset) -> Result<(f64, f64)> {
        let mut rng = self.rng.fork();
        let order = batches(train.len(), self.config.batch_size, &mut rng)?;
        let (mut loss_sum, mut var_sum) = (0.0, 0.0);
        for idx in &order {
            let flips: Vec<bool> = idx.iter().map(|_| rng.bernoulli(self.config.hflip)).collect();
            let mode = mode_for(&self.config, self.channel.as_ref(), true, rng.next_u64());
            let g = self.model.batch_grads(train, idx, &flips, mode, self.config.exec)?;
            loss_sum += g.loss.iter().sum::<f64>();
            var_sum += g.pqc_variance();
            let grads = model_grads(self.model.head_kind, &g);
            self.optimizer.step(&mut self.model.params_mut(), &grads)?;
        }
        self.optimizer.end_epoch();
        Ok((loss_sum / train.len().max(1) as f64, var_sum / order.len().max(1) as f64))
    }

    /// Trains up to the configured epoch count, calling `on_epoch` after each
    /// validation. The untrained model is logged as epoch 0.
    pub fn run(&mut self, splits: &Splits, mut on_epoch: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        if self.metrics.is_empty() {
            let start = Instant::now();
            let (acc, _) = self.evaluate(&splits.val)?;
            self.metrics.push(MetricsRecord {
                epoch: 0,
                loss: None,
                val_acc: acc,
                pqc_grad_var: None,
                seconds: start.elapsed().as_secs_f64(),
            });
            on_epoch(self)?;
        }
        while self.epoch < self.config.epochs {
            let start = Instant::now();
            let (loss, var) = self.train_epoch(&splits.train)?;
            let (acc, _) = self.evaluate(&splits.val)?;
            self.epoch += 1;
            self.metrics.push(MetricsRecord {
                epoch: self.epoch,
                loss: Some(loss),
                val_acc: acc,
                pqc_grad_var: Some(var),
                seconds: start.elapsed().as_secs_f64(),
            });
            log::info!("epoch {} loss {loss:.4} val_acc {acc:.4} pqc_grad_var {var:.3e}", self.epoch);
            on_epoch(self)?;
        }
        Ok(())
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.metrics.last().map(|m| m.val_acc)
    }
}

fn model_grads(head: HeadKind, g: &BatchGrads) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = g.encoder.iter().map(Vec::as_slice).collect();
    out.push(&g.theta);
    if head == HeadKind::Mlp {
        out.push(&g.head_w);
        out.push(&g.head_b);
    }
    out
}

/// Output file locations under a run directory.
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }
    pub fn config(&self) -> PathBuf {
        self.dir.join("config.toml")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn timing(&self) -> PathBuf {
        self.dir.join("timing.csv")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.bin")
    }
    pub fn accuracy_plot(&self) -> PathBuf {
        self.dir.join("accuracy.svg")
    }
}

fn write_run_outputs(t: &Trainer, paths: &RunPaths) -> Result<()> {
    write_metrics_csv(&paths.metrics(), &t.metrics)?;
    write_timing_csv(&paths.timing(), &t.metrics)?;
    t.checkpoint().save(&paths.checkpoint())?;
    if t.config.plots {
        let pts: Vec<(f64, f64)> = t.metrics.iter().map(|m| (m.epoch as f64, m.val_acc)).collect();
        plot::line_plot(&paths.accuracy_plot(), "validation accuracy", "epoch", "accuracy", &[("val_acc".into(), pts)])?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub metrics: Vec<MetricsRecord>,
    pub final_val_acc: f64,
    pub pqc_params: usize,
    pub out_dir: PathBuf,
}

/// Trains from `cfg` (or resumes from `resume`), writing the metrics,
/// timing, checkpoint and echoed config into `cfg.out_dir` after every
/// epoch.
pub fn cmd_train(cfg: &TrainConfig, splits: &Splits, resume: Option<&Checkpoint>) -> Result<TrainSummary> {
    let mut trainer = match resume {
        Some(ck) => Trainer::from_checkpoint(ck)?,
        None => Trainer::new(cfg.clone())?,
    };
    let paths = RunPaths::new(&trainer.config.out_dir);
    crate::io::write_atomic(&paths.config(), trainer.config.to_toml()?.as_bytes())?;
    trainer.run(splits, |t| write_run_outputs(t, &paths))?;
    Ok(TrainSummary {
        metrics: trainer.metrics.clone(),
        final_val_acc: trainer.final_accuracy().unwrap_or(0.0),
        pqc_params: trainer.model.pqc.n_params(),
        out_dir: paths.dir,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Eval-mode accuracy of a checkpoint. `expect` optionally pins the
/// architecture the checkpoint must have.
pub fn cmd_eval(ck: &Checkpoint, splits: &Splits, split: Split, expect: Option<&TrainConfig>) -> Result<f64> {
    if let Some(e) = expect {
        let mut probe = Model::new(e)?;
        ck.restore(&mut probe)?;
    }
    let t = Trainer::from_checkpoint(ck)?;
    let data = match split {
        Split::Train => &splits.train,
        Split::Val => &splits.val,
    };
    Ok(t.evaluate(data)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub family: Family,
    pub qubits: usize,
    pub depth: usize,
    pub params: usize,
    pub val_acc: f64,
}

/// Trains each family under the protocol of `base` and tabulates final
/// validation accuracy, best first.
pub fn cmd_compare_pqc(base: &TrainConfig, families: &[Family], splits: &Splits) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for &family in families {
        let mut cfg = base.clone();
        cfg.pqc = family;
        cfg.out_dir = base.out_dir.join(family.to_string());
        let s = cmd_train(&cfg, splits, None)?;
        rows.push(CompareRow {
            family,
            qubits: cfg.n_qubits,
            depth: cfg.n_blocks,
            params: s.pqc_params,
            val_acc: s.final_val_acc,
        });
    }
    rows.sort_by(|a, b| b.val_acc.total_cmp(&a.val_acc));
    write_rows(&base.out_dir.join("compare.csv"), &rows)?;
    Ok(rows)
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    crate::io::write_atomic(path, &bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub optimizer: OptimizerKind,
    pub scheme: InitScheme,
    pub seed: u64,
    pub val_acc: f64,
}

/// Gradient-variance sweep plus an optional optimizer × initialization
/// training grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCommand {
    pub qubits: Vec<usize>,
    pub schemes: Vec<InitScheme>,
    pub sweep: SweepConfig,
    pub grid_optimizers: Vec<OptimizerKind>,
    pub grid_schemes: Vec<InitScheme>,
    pub grid_seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

pub fn cmd_sweep_variance(
    cmd: &SweepCommand,
    base: &TrainConfig,
    splits: Option<&Splits>,
) -> Result<(Vec<VarianceRow>, Vec<GridRow>)> {
    let rows = variance_sweep(&cmd.qubits, &cmd.schemes, &cmd.sweep, base.exec)?;
    write_variance_csv(&cmd.out_dir.join("variance.csv"), &rows)?;
    if base.plots {
        let series: Vec<(String, Vec<(f64, f64)>)> = cmd
            .schemes
            .iter()
            .map(|s| {
                let pts = rows
                    .iter()
                    .filter(|r| r.scheme == *s)
                    .map(|r| (r.qubits as f64, r.variance.max(f64::MIN_POSITIVE).log10()))
                    .collect();
                (s.to_string(), pts)
            })
            .collect();
        plot::line_plot(&cmd.out_dir.join("variance.svg"), "gradient variance", "qubits", "log10 variance", &series)?;
    }
    let mut grid = Vec::new();
    let runs = cmd.grid_optimizers.len() * cmd.grid_schemes.len() * cmd.grid_seeds.len();
    if runs > 0 {
        let splits = splits.ok_or_else(|| Error::Config("training grid needs a dataset".into()))?;
        for &optimizer in &cmd.grid_optimizers {
            for &scheme in &cmd.grid_schemes {
                for &seed in &cmd.grid_seeds {
                    let mut cfg = base.clone();
                    cfg.optimizer.kind = optimizer;
                    cfg.init = scheme;
                    cfg.seed = seed;
                    cfg.out_dir = cmd.out_dir.join(format!("{optimizer}-{scheme}-{seed}"));
                    let s = cmd_train(&cfg, splits, None)?;
                    grid.push(GridRow {
                        optimizer,
                        scheme,
                        seed,
                        val_acc: s.final_val_acc,
                    });
                }
            }
        }
        write_rows(&cmd.out_dir.join("grid.csv"), &grid)?;
    }
    Ok((rows, grid))
}

/// Per-epoch circuit-gradient variance with a trained linear head and with
/// the fixed identity head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpVarianceReport {
    pub with_mlp: Vec<f64>,
    pub without_mlp: Vec<f64>,
}

impl MlpVarianceReport {
    pub fn mean_with(&self) -> f64 {
        mean(&self.with_mlp)
    }

    pub fn mean_without(&self) -> f64 {
        mean(&self.without_mlp)
    }
}

/// Runs both arms for `epochs`. The arms must agree on everything except
/// the head.
pub fn mlp_variance_paired(with: &TrainConfig, without: &TrainConfig, epochs: usize, splits: &Splits) -> Result<MlpVarianceReport> {
    let mut probe = without.clone();
    probe.head = with.head;
    probe.out_dir.clone_from(&with.out_dir);
    if probe != *with {
        return Err(Error::Pairing("arms differ in more than the head".into()));
    }
    let arm = |cfg: &TrainConfig| -> Result<Vec<f64>> {
        let mut cfg = cfg.clone();
        cfg.epochs = epochs;
        let mut t = Trainer::new(cfg)?;
        t.run(splits, |_| Ok(()))?;
        Ok(t.metrics.iter().filter_map(|m| m.pqc_grad_var).collect())
    };
    Ok(MlpVarianceReport {
        with_mlp: arm(with)?,
        without_mlp: arm(without)?,
    })
}

pub fn mlp_variance_experiment(cfg: &TrainConfig, epochs: usize, splits: &Splits) -> Result<MlpVarianceReport> {
    let mut with = cfg.clone();
    with.head = HeadKind::Mlp;
    let mut without = cfg.clone();
    without.head = HeadKind::Identity;
    mlp_variance_paired(&with, &without, epochs, splits)
}
