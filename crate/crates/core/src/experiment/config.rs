use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuits::{Family, InitScheme, PqcSpec};
use crate::data::DatasetName;
use crate::error::{Error, Result};
use crate::optim::OptimConfig;
use crate::par::Exec;
use crate::quantum::{KrausChannel, ShiftEngine, DENSITY_CAP, STATEVECTOR_CAP};
use crate::snn::EncoderConfig;

pub const DEFAULT_NOISE_P: f64 = 0.02;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    BitFlip,
    Depolarizing,
    AmpDamp,
}

/// How noisy circuits are simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseEngine {
    /// Seeded Pauli-error trajectories on the statevector engine.
    #[default]
    Trajectory,
    /// Exact density-matrix evolution.
    Density,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Error probability, or damping rate for `ampdamp`.
    pub p: f64,
    pub train: NoiseEngine,
    pub eval: NoiseEngine,
    /// Trajectories averaged per sample when evaluating by trajectories.
    pub eval_trajectories: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            p: DEFAULT_NOISE_P,
            train: NoiseEngine::Trajectory,
            eval: NoiseEngine::Density,
            eval_trajectories: 32,
        }
    }
}

impl NoiseSpec {
    pub fn is_noisy(&self) -> bool {
        self.kind != NoiseKind::None
    }

    pub fn channel(&self) -> Result<Option<KrausChannel>> {
        Ok(match self.kind {
            NoiseKind::None => None,
            NoiseKind::BitFlip => Some(KrausChannel::bit_flip(self.p)?),
            NoiseKind::Depolarizing => Some(KrausChannel::depolarizing(self.p)?),
            NoiseKind::AmpDamp => Some(KrausChannel::amplitude_damping(self.p)?),
        })
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NoiseKind::None => f.write_str("none"),
            NoiseKind::BitFlip => write!(f, "bitflip:{}", self.p),
            NoiseKind::Depolarizing => write!(f, "depolarizing:{}", self.p),
            NoiseKind::AmpDamp => write!(f, "ampdamp:{}", self.p),
        }
    }
}

/// `none`, `depolarizing`, `bitflip:0.05`, `ampdamp:0.1`, … A missing value
/// means the default probability.
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = match s.split_once(':') {
            Some((n, v)) => (n, Some(v)),
            None => (s, None),
        };
        let kind = match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "none" => NoiseKind::None,
            "bitflip" => NoiseKind::BitFlip,
            "depolarizing" | "depol" => NoiseKind::Depolarizing,
            "ampdamp" | "amplitudedamping" => NoiseKind::AmpDamp,
            _ => return Err(Error::Config(format!("unknown noise `{s}`"))),
        };
        let p = match value {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad noise strength `{v}`")))?,
            None => DEFAULT_NOISE_P,
        };
        Ok(Self {
            kind,
            p,
            ..Self::default()
        })
    }
}

/// Post-circuit head: a trained linear layer, or a fixed identity map from
/// wire expectations to class logits (padded or truncated to the class
/// count).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    #[default]
    Mlp,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub n_qubits: usize,
    /// Re-upload blocks (`dr`) or ansatz layers (`hea`).
    pub n_blocks: usize,
    pub pqc: Family,
    pub head: HeadKind,
    pub init: InitScheme,
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_batch: usize,
    pub seed: u64,
    /// Seed for the train/validation split and subsets, shared across runs.
    pub split_seed: u64,
    pub subset_train: Option<usize>,
    pub subset_val: Option<usize>,
    /// Probability of a horizontal flip per training image.
    pub hflip: f64,
    pub gradient: ShiftEngine,
    pub exec: Exec,
    pub out_dir: PathBuf,
    pub plots: bool,
    pub optimizer: OptimConfig,
    pub noise: NoiseSpec,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let mut encoder = EncoderConfig::standard(9);
        encoder.adaptive_pool = 2;
        Self {
            dataset: DatasetName::Mnist,
            data_dir: PathBuf::from("data/mnist"),
            n_qubits: 9,
            n_blocks: 2,
            pqc: Family::Dr,
            head: HeadKind::Mlp,
            init: InitScheme::Uniform02Pi,
            epochs: 15,
            batch_size: 64,
            eval_batch: 250,
            seed: 0,
            split_seed: 0,
            subset_train: None,
            subset_val: None,
            hflip: 0.5,
            gradient: ShiftEngine::Reverse,
            exec: Exec::Parallel,
            out_dir: PathBuf::from("runs/default"),
            plots: true,
            optimizer: OptimConfig {
                lr: 3e-3,
                ..OptimConfig::default()
            },
            noise: NoiseSpec::default(),
            encoder,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn pqc_spec(&self) -> Result<PqcSpec> {
        PqcSpec::new(self.pqc, self.n_qubits, self.n_blocks)
    }

    /// Encoder settings with the projection width matched to the circuit.
    pub fn encoder_config(&self) -> EncoderConfig {
        let mut e = self.encoder.clone();
        e.out_features = self.pqc.features_per_qubit() * self.n_qubits;
        e
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_qubits == 0 || self.n_qubits > STATEVECTOR_CAP {
            return fail(format!("n_qubits must be in 1..={STATEVECTOR_CAP}, got {}", self.n_qubits));
        }
        if self.n_blocks == 0 {
            return fail("n_blocks must be at least 1".into());
        }
        if self.batch_size == 0 || self.eval_batch == 0 {
            return fail("batch sizes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.hflip) {
            return fail(format!("hflip probability {} outside [0, 1]", self.hflip));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite()) || o.weight_decay < 0.0 || o.eps <= 0.0 {
            return fail("optimizer needs lr > 0, weight_decay >= 0, eps > 0".into());
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return fail("optimizer betas must lie in [0, 1)".into());
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.p) {
            return fail(format!("noise strength {} outside [0, 1]", n.p));
        }
        if n.is_noisy() {
            if self.n_qubits > DENSITY_CAP {
                return Err(Error::Capacity {
                    n_qubits: self.n_qubits,
                    cap: DENSITY_CAP,
                });
            }
            let pauli = n.kind != NoiseKind::AmpDamp;
            let uses_traj = n.train == NoiseEngine::Trajectory || n.eval == NoiseEngine::Trajectory;
            if !pauli && uses_traj {
                return fail("amplitude damping needs the density engine for training and evaluation".into());
            }
            if n.eval == NoiseEngine::Trajectory && n.eval_trajectories == 0 {
                return fail("eval_trajectories must be at least 1".into());
            }
        }
        self.encoder_config().validate()?;
        self.pqc_spec().map(|_| ())
    }
}
