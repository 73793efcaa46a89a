use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sqdr_core::circuits::{Family, InitScheme};
use sqdr_core::data::{fetch, DatasetName};
use sqdr_core::diagnostics::SweepConfig;
use sqdr_core::experiment::{
    cmd_compare_pqc, cmd_eval, cmd_sweep_variance, cmd_train, Checkpoint, NoiseEngine, NoiseSpec, Split, Splits,
    SweepCommand, TrainConfig,
};
use sqdr_core::optim::OptimizerKind;
use sqdr_core::par::Exec;
use sqdr_core::Error;

#[derive(Parser)]
#[command(name = "sqdr", version, about = "Spiking encoder + re-uploading quantum circuit classifier")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model and write metrics, timing, checkpoint and config.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Accuracy of a checkpoint on the train or validation split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Noisy-circuit engine for evaluation: density or trajectory.
        #[arg(long)]
        engine: Option<String>,
    },
    /// Train every circuit family under one protocol and rank them.
    ComparePqc {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "dr,hea,sqnn")]
        families: Vec<Family>,
    },
    /// Gradient-variance sweep, optionally with an optimizer/init training grid.
    SweepVariance {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "sweep-qubits", value_delimiter = ',', default_value = "2,4,6,8")]
        sweep_qubits: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "tn2pi,u2pi,u01,tn01")]
        schemes: Vec<InitScheme>,
        #[arg(long, default_value_t = 200)]
        draws: usize,
        #[arg(long, default_value = "dr")]
        family: Family,
        /// Circuit depth for the sweep; one block per qubit when omitted.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        grid_optimizers: Vec<OptimizerKind>,
        #[arg(long, value_delimiter = ',')]
        grid_schemes: Vec<InitScheme>,
        #[arg(long, value_delimiter = ',')]
        grid_seeds: Vec<u64>,
    },
    /// Download and verify a dataset's IDX files.
    FetchData {
        #[arg(long, default_value = "mnist")]
        dataset: DatasetName,
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

/// Flags that override keys of the config file.
#[derive(Args, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<DatasetName>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    pqc: Option<Family>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    init: Option<InitScheme>,
    /// none, bitflip[:p], depolarizing[:p] or ampdamp[:gamma].
    #[arg(long)]
    noise: Option<NoiseSpec>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subset_train: Option<usize>,
    #[arg(long)]
    subset_val: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every stage on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.dataset {
            c.dataset = v;
            if self.data_dir.is_none() && self.config.is_none() {
                c.data_dir = PathBuf::from("data").join(v.name());
            }
        }
        macro_rules! set {
            ($($field:ident => $key:expr),*) => {
                $(if let Some(v) = self.$field.clone() { $key(&mut c, v); })*
            };
        }
        set!(
            data_dir => |c: &mut TrainConfig, v| c.data_dir = v,
            qubits => |c: &mut TrainConfig, v| c.n_qubits = v,
            blocks => |c: &mut TrainConfig, v| c.n_blocks = v,
            pqc => |c: &mut TrainConfig, v| c.pqc = v,
            optimizer => |c: &mut TrainConfig, v| c.optimizer.kind = v,
            lr => |c: &mut TrainConfig, v| c.optimizer.lr = v,
            init => |c: &mut TrainConfig, v| c.init = v,
            epochs => |c: &mut TrainConfig, v| c.epochs = v,
            batch => |c: &mut TrainConfig, v| c.batch_size = v,
            seed => |c: &mut TrainConfig, v| c.seed = v,
            subset_train => |c: &mut TrainConfig, v| c.subset_train = Some(v),
            subset_val => |c: &mut TrainConfig, v| c.subset_val = Some(v),
            out => |c: &mut TrainConfig, v| c.out_dir = v
        );
        if let Some(n) = self.noise {
            c.noise.kind = n.kind;
            c.noise.p = n.p;
        }
        if self.sequential {
            c.exec = Exec::Sequential;
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<Error>());
    match core {
        Some(Error::Capacity { .. }) => 3,
        Some(Error::Io { .. } | Error::Download(_) | Error::Checksum { .. } | Error::Format(_) | Error::Length { .. }) => 2,
        Some(_) => 1,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => 2,
        None => 1,
    }
}

fn load_splits(cfg: &TrainConfig) -> Result<Splits> {
    Splits::load(cfg).with_context(|| {
        format!(
            "loading {} from {} (try `sqdr fetch-data --dataset {}`)",
            cfg.dataset,
            cfg.data_dir.display(),
            cfg.dataset
        )
    })
}

fn print_table(header: &[&str], rows: Vec<Vec<String>>) {
    println!("{}", header.join("\t"));
    for r in rows {
        println!("{}", r.join("\t"));
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Train { run, resume } => {
            let (cfg, ck) = match resume {
                Some(p) => {
                    let ck = Checkpoint::load(&p)?;
                    (ck.config.clone(), Some(ck))
                }
                None => (run.config()?, None),
            };
            let splits = load_splits(&cfg)?;
            let s = cmd_train(&cfg, &splits, ck.as_ref())?;
            println!("final val_acc {:.4} ({} circuit angles) -> {}", s.final_val_acc, s.pqc_params, s.out_dir.display());
        }
        Cmd::Eval {
            checkpoint,
            split,
            data_dir,
            engine,
        } => {
            let mut ck = Checkpoint::load(&checkpoint)?;
            if let Some(d) = data_dir {
                ck.config.data_dir = d;
            }
            if let Some(e) = engine {
                ck.config.noise.eval = match e.as_str() {
                    "density" => NoiseEngine::Density,
                    "trajectory" => NoiseEngine::Trajectory,
                    _ => return Err(Error::Config(format!("unknown engine `{e}`")).into()),
                };
            }
            let split = match split.as_str() {
                "train" => Split::Train,
                "val" | "test" => Split::Val,
                _ => return Err(Error::Config(format!("unknown split `{split}`")).into()),
            };
            let splits = load_splits(&ck.config)?;
            let acc = cmd_eval(&ck, &splits, split, None)?;
            println!("accuracy {acc:.4}");
        }
        Cmd::ComparePqc { run, families } => {
            let cfg = run.config()?;
            let splits = load_splits(&cfg)?;
            let rows = cmd_compare_pqc(&cfg, &families, &splits)?;
            print_table(
                &["family", "qubits", "depth", "params", "val_acc"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.family.to_string(),
                            r.qubits.to_string(),
                            r.depth.to_string(),
                            r.params.to_string(),
                            format!("{:.4}", r.val_acc),
                        ]
                    })
                    .collect(),
            );
        }
        Cmd::SweepVariance {
            run,
            sweep_qubits,
            schemes,
            draws,
            family,
            depth,
            grid_optimizers,
            grid_schemes,
            grid_seeds,
        } => {
            let cfg = run.config()?;
            let mut sweep = SweepConfig::new(family, draws, cfg.seed);
            sweep.depth = depth;
            let cmd = SweepCommand {
                qubits: sweep_qubits,
                schemes,
                sweep,
                grid_optimizers,
                grid_schemes,
                grid_seeds,
                out_dir: cfg.out_dir.clone(),
            };
            let grid_runs = cmd.grid_optimizers.len() * cmd.grid_schemes.len() * cmd.grid_seeds.len();
            let splits = if grid_runs > 0 { Some(load_splits(&cfg)?) } else { None };
            let (rows, grid) = cmd_sweep_variance(&cmd, &cfg, splits.as_ref())?;
            print_table(
                &["family", "qubits", "scheme", "variance", "draws"],
                rows.iter()
                    .map(|r| {
                        vec![
                            r.family.to_string(),
                            r.qubits.to_string(),
                            r.scheme.to_string(),
                            format!("{:.6e}", r.variance),
                            r.draws.to_string(),
                        ]
                    })
                    .collect(),
            );
            if !grid.is_empty() {
                print_table(
                    &["optimizer", "scheme", "seed", "val_acc"],
                    grid.iter()
                        .map(|g| vec![g.optimizer.to_string(), g.scheme.to_string(), g.seed.to_string(), format!("{:.4}", g.val_acc)])
                        .collect(),
                );
            }
        }
        Cmd::FetchData { dataset, dir } => {
            let dir = dir.unwrap_or_else(|| Path::new("data").join(dataset.name()));
            for p in fetch(dataset, &dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
