//! Accuracy, gradient-variance sweeps, the product-variance inequality
//! check, and CSV output for the resulting tables.

use std::f64::consts::TAU;
use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::circuits::{init_params, Family, InitScheme, PqcSpec};
use crate::error::{Error, Result};
use crate::numerics::{mean, sample_uniform, sample_variance, Rng};
use crate::par::Exec;
use crate::quantum::{evolve_statevector, vjp};

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyMetric);
    }
    if predictions.len() != labels.len() {
        return Err(Error::Length {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation, average ranks on ties. `NaN` when either side
/// is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (sx * sy).sqrt()
}

/// Parameter index of the first-applied Euler angle of the first trainable
/// gate on wire 0 in block 1.
pub fn first_trainable_angle(family: Family) -> usize {
    match family {
        Family::Dr => 2,
        Family::Hea | Family::Sqnn => 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    /// Circuit depth; `None` uses one block (or layer) per qubit.
    pub depth: Option<usize>,
    pub n_draws: usize,
    pub seed: u64,
    /// Fraction of draws re-checked by central finite differences.
    pub audit_fraction: f64,
}

impl SweepConfig {
    pub fn new(family: Family, n_draws: usize, seed: u64) -> Self {
        Self {
            family,
            depth: None,
            n_draws,
            seed,
            audit_fraction: 0.01,
        }
    }

    pub fn spec(&self, n_qubits: usize) -> Result<PqcSpec> {
        PqcSpec::new(self.family, n_qubits, self.depth.unwrap_or(n_qubits))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSample {
    pub family: Family,
    pub n_qubits: usize,
    pub scheme: InitScheme,
    pub gradient: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub family: Family,
    pub qubits: usize,
    pub scheme: InitScheme,
    pub variance: f64,
    pub draws: usize,
}

const AUDIT_STEP: f64 = 1e-5;
const AUDIT_TOL: f64 = 1e-6;

/// `∂⟨Z_0⟩/∂θ_target` for one seeded draw of parameters and features.
fn draw_gradient(spec: &PqcSpec, scheme: InitScheme, seed: u64, audit: bool, draw: usize) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let mut params = init_params(scheme, &mut rng, spec.n_params())?;
    let x = sample_uniform(&mut rng, 0.0, TAU, spec.n_features())?;
    let target = first_trainable_angle(spec.family);
    let mut upstream = vec![0.0; spec.n_qubits];
    upstream[0] = 1.0;
    let circuit = spec.build(&x, &params)?;
    let (_, gp, _) = vjp(&circuit, params.len(), x.len(), &upstream)?;
    let g = gp[target];
    if audit {
        let z0 = |p: &[f64]| -> Result<f64> { Ok(evolve_statevector(&spec.build(&x, p)?)?.expectation_z(0)?) };
        let orig = params[target];
        params[target] = orig + AUDIT_STEP;
        let up = z0(&params)?;
        params[target] = orig - AUDIT_STEP;
        let down = z0(&params)?;
        let numeric = (up - down) / (2.0 * AUDIT_STEP);
        if (numeric - g).abs() > AUDIT_TOL {
            return Err(Error::Audit {
                draw,
                analytic: g,
                numeric,
            });
        }
    }
    Ok(g)
}

/// Gradient samples for explicit draw seeds, in seed order.
pub fn variance_samples(
    spec: &PqcSpec,
    scheme: InitScheme,
    seeds: &[u64],
    audit_fraction: f64,
    exec: Exec,
) -> Result<Vec<VarianceSample>> {
    let stride = if audit_fraction > 0.0 {
        (1.0 / audit_fraction).round().max(1.0) as usize
    } else {
        usize::MAX
    };
    exec.map_range(seeds.len(), |i| {
        let gradient = draw_gradient(spec, scheme, seeds[i], i % stride == 0, i)?;
        Ok(VarianceSample {
            family: spec.family,
            n_qubits: spec.n_qubits,
            scheme,
            gradient,
            seed: seeds[i],
        })
    })
    .into_iter()
    .collect()
}

/// Draw seeds for one `(n, scheme)` cell of a sweep.
pub fn draw_seeds(cfg: &SweepConfig, n_qubits: usize, scheme: InitScheme) -> Vec<u64> {
    let cell = (n_qubits as u64) << 8 | InitScheme::ALL.iter().position(|s| *s == scheme).unwrap_or(0) as u64;
    let mut rng = Rng::substream(cfg.seed, cell);
    (0..cfg.n_draws).map(|_| rng.next_u64()).collect()
}

/// Sample variance of `∂⟨Z_0⟩/∂θ_{1,1}` over seeded draws for every
/// `(n, scheme)` pair, in input order.
pub fn variance_sweep(qubits: &[usize], schemes: &[InitScheme], cfg: &SweepConfig, exec: Exec) -> Result<Vec<VarianceRow>> {
    if cfg.n_draws < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 draws, got {}", cfg.n_draws)));
    }
    let mut rows = Vec::new();
    for &n in qubits {
        let spec = cfg.spec(n)?;
        for &scheme in schemes {
            let seeds = draw_seeds(cfg, n, scheme);
            let samples = variance_samples(&spec, scheme, &seeds, cfg.audit_fraction, exec)?;
            let grads: Vec<f64> = samples.iter().map(|s| s.gradient).collect();
            rows.push(VarianceRow {
                family: cfg.family,
                qubits: n,
                scheme,
                variance: sample_variance(&grads),
                draws: grads.len(),
            });
        }
    }
    Ok(rows)
}

/// A scalar distribution with known first two moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dist {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Dist {
    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Constant(c) => c,
            Dist::Normal { mean, .. } => mean,
            Dist::Uniform { lo, hi } => (lo + hi) / 2.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Dist::Constant(_) => 0.0,
            Dist::Normal { std, .. } => std * std,
            Dist::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Dist::Constant(c) => c,
            Dist::Normal { mean, std } => mean + std * rng.standard_normal(),
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub trials: usize,
    pub batches: usize,
    /// Batches where `Var(ab) < Var(b)` by more than three standard errors.
    pub violations: usize,
    /// Smallest `(Var(ab) - Var(b)) / SE` over batches.
    pub min_margin_se: f64,
    pub var_ab: f64,
    pub var_b: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `Var(ab) ≥ Var(b)` for independent `a`, `b` whenever
/// `Var(a) + E[a]² ≥ 1`, in batches of `batch` paired draws.
pub fn variance_inequality_check(a: Dist, b: Dist, n_trials: usize, batch: usize, seed: u64) -> Result<InequalityReport> {
    let second_moment = a.variance() + a.mean().powi(2);
    if second_moment < 1.0 {
        return Err(Error::Premise { value: second_moment });
    }
    if n_trials < 2 || batch < 2 {
        return Err(Error::InvalidArgument("need at least 2 trials per batch".into()));
    }
    let mut rng_a = Rng::substream(seed, 1);
    let mut rng_b = Rng::substream(seed, 2);
    let mut report = InequalityReport {
        trials: 0,
        batches: 0,
        violations: 0,
        min_margin_se: f64::INFINITY,
        var_ab: 0.0,
        var_b: 0.0,
    };
    let (mut ab_all, mut b_all) = (Vec::with_capacity(n_trials), Vec::with_capacity(n_trials));
    while report.trials < n_trials {
        let k = batch.min(n_trials - report.trials);
        if k < 2 {
            break;
        }
        let bs: Vec<f64> = (0..k).map(|_| b.sample(&mut rng_b)).collect();
        let abs: Vec<f64> = bs.iter().map(|bv| a.sample(&mut rng_a) * bv).collect();
        let (m_ab, m_b) = (mean(&abs), mean(&bs));
        // Paired per-draw contributions to Var(ab) - Var(b).
        let u: Vec<f64> = abs
            .iter()
            .zip(&bs)
            .map(|(x, y)| (x - m_ab).powi(2) - (y - m_b).powi(2))
            .collect();
        let diff = sample_variance(&abs) - sample_variance(&bs);
        let se = (sample_variance(&u) / k as f64).sqrt();
        if diff < -3.0 * se {
            report.violations += 1;
        }
        let margin = if se > 0.0 {
            diff / se
        } else if diff >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        report.min_margin_se = report.min_margin_se.min(margin);
        report.trials += k;
        report.batches += 1;
        ab_all.extend(abs);
        b_all.extend(bs);
    }
    report.var_ab = sample_variance(&ab_all);
    report.var_b = sample_variance(&b_all);
    Ok(report)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    crate::io::write_atomic(path, &bytes)
}

/// Columns: `family,qubits,scheme,variance,draws`.
pub fn write_variance_csv(path: &Path, rows: &[VarianceRow]) -> Result<()> {
    write_csv(path, rows)
}

/// One row of the training log. Epoch 0 is the untrained model, so it has
/// no training loss or gradient statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub loss: Option<f64>,
    pub val_acc: f64,
    pub pqc_grad_var: Option<f64>,
    pub seconds: f64,
}

#[derive(Serialize)]
struct MetricsRow {
    epoch: usize,
    loss: Option<f64>,
    val_acc: f64,
    pqc_grad_var: Option<f64>,
}

/// Columns: `epoch,loss,val_acc,pqc_grad_var`. Wall-clock time goes to a
/// separate file so reruns produce identical metrics.
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRecord]) -> Result<()> {
    let rows: Vec<MetricsRow> = rows
        .iter()
        .map(|r| MetricsRow {
            epoch: r.epoch,
            loss: r.loss,
            val_acc: r.val_acc,
            pqc_grad_var: r.pqc_grad_var,
        })
        .collect();
    write_csv(path, &rows)
}

#[derive(Serialize)]
struct TimingRow {
    epoch: usize,
    seconds: f64,
}

/// Columns: `epoch,seconds`.
pub fn write_timing_csv(path: &Path, rows: &[MetricsRecord]) -> Result<()> {
    let t: Vec<TimingRow> = rows
        .iter()
        .map(|r| TimingRow {
            epoch: r.epoch,
            seconds: r.seconds,
        })
        .collect();
    write_csv(path, &t)
}
