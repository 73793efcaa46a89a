mod common;

use sqdr_core::circuits::{Family, InitScheme};
use sqdr_core::diagnostics::SweepConfig;
use sqdr_core::experiment::{
    cmd_compare_pqc, cmd_eval, cmd_sweep_variance, cmd_train, mlp_variance_paired, Checkpoint, HeadKind, RunPaths,
    Split, Splits, SweepCommand, TrainConfig, Trainer,
};
use sqdr_core::optim::OptimizerKind;
use sqdr_core::Error;

fn splits() -> Splits {
    Splits {
        train: common::synthetic_dataset(24, 8, 1),
        val: common::synthetic_dataset(12, 8, 2),
    }
}

fn config(dir: &std::path::Path) -> TrainConfig {
    let mut cfg = common::smooth_config(3);
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.eval_batch = 5;
    cfg.out_dir = dir.to_path_buf();
    cfg.plots = false;
    cfg
}

#[test]
fn training_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.plots = true;
    let s = cmd_train(&cfg, &splits(), None).unwrap();
    let paths = RunPaths::new(dir.path());
    for p in [paths.config(), paths.metrics(), paths.timing(), paths.checkpoint(), paths.accuracy_plot()] {
        assert!(p.exists(), "{}", p.display());
    }
    assert_eq!(s.metrics.len(), 3);
    assert_eq!(s.metrics[0].loss, None);
    assert!(s.metrics[1..].iter().all(|m| m.loss.is_some_and(f64::is_finite)));
    let echoed = TrainConfig::load(&paths.config()).unwrap();
    assert_eq!(echoed, cfg);
    let csv = std::fs::read_to_string(paths.metrics()).unwrap();
    assert!(csv.starts_with("epoch,loss,val_acc,pqc_grad_var\n0,,"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn zero_epochs_logs_only_the_untrained_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.epochs = 0;
    let s = cmd_train(&cfg, &splits(), None).unwrap();
    assert_eq!(s.metrics.len(), 1);
    assert_eq!(s.metrics[0].epoch, 0);
}

#[test]
fn same_seed_gives_identical_metrics() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_train(&config(a.path()), &splits(), None).unwrap();
    cmd_train(&config(b.path()), &splits(), None).unwrap();
    let read = |d: &tempfile::TempDir| std::fs::read(RunPaths::new(d.path()).metrics()).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn sequential_and_parallel_runs_match() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut seq = config(b.path());
    seq.exec = sqdr_core::par::Exec::Sequential;
    let x = cmd_train(&config(a.path()), &splits(), None).unwrap();
    let y = cmd_train(&seq, &splits(), None).unwrap();
    for (p, q) in x.metrics.iter().zip(&y.metrics) {
        assert_eq!((p.loss, p.val_acc, p.pqc_grad_var), (q.loss, q.val_acc, q.pqc_grad_var));
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&config(dir.path()), &splits(), None).unwrap();
    let path = RunPaths::new(dir.path()).checkpoint();
    let bytes = std::fs::read(&path).unwrap();
    let ck = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(ck.to_bytes().unwrap(), bytes);
    let t = Trainer::from_checkpoint(&ck).unwrap();
    let again = t.checkpoint();
    assert_eq!(again, ck);
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Length { .. })));
    assert!(matches!(Checkpoint::from_bytes(b"not a checkpoint at all"), Err(Error::Format(_))));
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let (full, part) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let whole = cmd_train(&config(full.path()), &splits(), None).unwrap();
    let mut first = config(part.path());
    first.epochs = 1;
    cmd_train(&first, &splits(), None).unwrap();
    let mut ck = Checkpoint::load(&RunPaths::new(part.path()).checkpoint()).unwrap();
    ck.config.epochs = 2;
    let resumed = cmd_train(&ck.config.clone(), &splits(), Some(&ck)).unwrap();
    assert_eq!(resumed.metrics.len(), whole.metrics.len());
    for (a, b) in resumed.metrics.iter().zip(&whole.metrics) {
        assert_eq!((a.loss, a.val_acc, a.pqc_grad_var), (b.loss, b.val_acc, b.pqc_grad_var));
    }
}

#[test]
fn eval_reproduces_the_last_logged_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let s = cmd_train(&cfg, &splits(), None).unwrap();
    let ck = Checkpoint::load(&RunPaths::new(dir.path()).checkpoint()).unwrap();
    let acc = cmd_eval(&ck, &splits(), Split::Val, Some(&cfg)).unwrap();
    assert_eq!(acc, s.final_val_acc);
}

#[test]
fn mismatched_architecture_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&config(dir.path()), &splits(), None).unwrap();
    let ck = Checkpoint::load(&RunPaths::new(dir.path()).checkpoint()).unwrap();
    let mut other = config(dir.path());
    other.n_qubits = 3;
    assert!(matches!(
        cmd_eval(&ck, &splits(), Split::Val, Some(&other)),
        Err(Error::Compatibility(_))
    ));
}

#[test]
fn family_comparison_ranks_every_family() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.epochs = 1;
    let rows = cmd_compare_pqc(&cfg, &[Family::Dr, Family::Hea, Family::Sqnn], &splits()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].val_acc >= w[1].val_acc));
    let sqnn = rows.iter().find(|r| r.family == Family::Sqnn).unwrap();
    assert_eq!(sqnn.params, 2);
    assert!(dir.path().join("compare.csv").exists());
}

#[test]
fn sweep_grid_has_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.epochs = 1;
    let cmd = SweepCommand {
        qubits: vec![1, 2],
        schemes: InitScheme::ALL.to_vec(),
        sweep: SweepConfig::new(Family::Dr, 20, 4),
        grid_optimizers: vec![OptimizerKind::Adam, OptimizerKind::Sgd],
        grid_schemes: vec![InitScheme::Uniform02Pi, InitScheme::TruncNormal01],
        grid_seeds: vec![0, 1],
        out_dir: dir.path().to_path_buf(),
    };
    let (rows, grid) = cmd_sweep_variance(&cmd, &cfg, Some(&splits())).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(grid.len(), 8);
    let csv = std::fs::read_to_string(dir.path().join("variance.csv")).unwrap();
    assert!(csv.starts_with("family,qubits,scheme,variance,draws\n"));
    assert_eq!(std::fs::read_to_string(dir.path().join("grid.csv")).unwrap().lines().count(), 9);
}

#[test]
fn grid_without_data_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = SweepCommand {
        qubits: vec![1],
        schemes: vec![InitScheme::Uniform02Pi],
        sweep: SweepConfig::new(Family::Dr, 4, 4),
        grid_optimizers: vec![OptimizerKind::Adam],
        grid_schemes: vec![InitScheme::Uniform02Pi],
        grid_seeds: vec![0],
        out_dir: dir.path().to_path_buf(),
    };
    assert!(matches!(cmd_sweep_variance(&cmd, &config(dir.path()), None), Err(Error::Config(_))));
}

#[test]
fn head_variance_arms_must_be_paired() {
    let dir = tempfile::tempdir().unwrap();
    let with = config(dir.path());
    let mut without = with.clone();
    without.head = HeadKind::Identity;
    let r = mlp_variance_paired(&with, &without, 1, &splits()).unwrap();
    assert_eq!((r.with_mlp.len(), r.without_mlp.len()), (1, 1));
    without.seed += 1;
    assert!(matches!(mlp_variance_paired(&with, &without, 1, &splits()), Err(Error::Pairing(_))));
}

#[test]
fn noisy_training_runs_on_both_engines() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.epochs = 1;
    cfg.noise = "depolarizing:0.05".parse().unwrap();
    let a = cmd_train(&cfg, &splits(), None).unwrap();
    cfg.noise.train = sqdr_core::experiment::NoiseEngine::Density;
    let b = cmd_train(&cfg, &splits(), None).unwrap();
    assert!(a.metrics[1].loss.unwrap().is_finite());
    assert!(b.metrics[1].loss.unwrap().is_finite());
    assert_eq!(a.metrics[0].val_acc, b.metrics[0].val_acc);
}
