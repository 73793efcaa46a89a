//! Builders for the data re-upload, hardware-efficient and SQNN circuit
//! families, and trainable-angle initialization.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sample_truncated_normal, sample_uniform, Rng};
use crate::quantum::{AngleSource, Circuit, Gate};

use AngleSource::{Feature, Fixed, Param};

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::shape(format!("{what}: expected {expected} angles, got {found}")))
    }
}

fn rotq(qubit: usize, a: [f64; 3]) -> Gate {
    Gate::RotQ {
        qubit,
        omega: a[0],
        theta: a[1],
        phi: a[2],
    }
}

/// `n_blocks` data re-upload blocks on `n_qubits` wires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrCircuitSpec {
    pub n_qubits: usize,
    pub n_blocks: usize,
}

impl DrCircuitSpec {
    pub fn new(n_qubits: usize, n_blocks: usize) -> Result<Self> {
        if n_qubits == 0 || n_blocks == 0 {
            return Err(Error::InvalidArgument(format!(
                "re-upload circuit needs at least one qubit and one block, got {n_qubits}q/{n_blocks}b"
            )));
        }
        Ok(Self { n_qubits, n_blocks })
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_qubits * self.n_blocks
    }

    pub fn n_features(&self) -> usize {
        3 * self.n_qubits
    }
}

/// CZ pairs closing a ring on `n` wires.
pub fn cz_ring(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|q| (q, (q + 1) % n)).collect(),
    }
}

/// One re-upload block: per wire an encoding `RotQ(x)` then a trainable
/// `RotQ(θ)`, followed by the CZ ring. Angle sources refer to block-local
/// indices offset by `block * 3n`.
pub fn build_dr_block(block: usize, x: &[f64], theta: &[f64]) -> Result<Circuit> {
    if x.is_empty() || x.len() % 3 != 0 {
        return Err(Error::shape(format!(
            "feature length {} is not a positive multiple of 3",
            x.len()
        )));
    }
    let n = x.len() / 3;
    check_len("block angles", 3 * n, theta.len())?;
    let mut c = Circuit::new(n);
    let offset = block * 3 * n;
    for q in 0..n {
        let f = 3 * q;
        c.push_bound(
            rotq(q, [x[f], x[f + 1], x[f + 2]]),
            [Feature(f), Feature(f + 1), Feature(f + 2)],
        );
        c.push_bound(
            rotq(q, [theta[f], theta[f + 1], theta[f + 2]]),
            [Param(offset + f), Param(offset + f + 1), Param(offset + f + 2)],
        );
    }
    for (a, b) in cz_ring(n) {
        c.push(Gate::Cz(a, b));
    }
    Ok(c)
}

pub fn build_dr_circuit(spec: &DrCircuitSpec, x: &[f64], params: &[f64]) -> Result<Circuit> {
    check_len("features", spec.n_features(), x.len())?;
    check_len("parameters", spec.n_params(), params.len())?;
    let per_block = 3 * spec.n_qubits;
    let mut c = Circuit::new(spec.n_qubits);
    for (b, theta) in params.chunks(per_block).enumerate() {
        c.extend(build_dr_block(b, x, theta)?);
    }
    Ok(c)
}

/// Hardware-efficient ansatz with `n·(L+1)` angles. Applied order: the `RZ`
/// cap rank, then `L` times a CNOT chain followed by a rotation rank. Rank
/// `l` (1-based, counted from the cap) is `RZ` when `L - l` is even and `RX`
/// otherwise, so the last rank is always `RZ`.
pub fn build_hea(n_qubits: usize, n_layers: usize, params: &[f64]) -> Result<Circuit> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("HEA needs at least one qubit".into()));
    }
    check_len("HEA parameters", n_qubits * (n_layers + 1), params.len())?;
    let mut c = Circuit::new(n_qubits);
    let bound = |i: usize| [Param(i), Fixed, Fixed];
    for q in 0..n_qubits {
        c.push_bound(Gate::Rz(q, params[q]), bound(q));
    }
    for l in 1..=n_layers {
        for q in 0..n_qubits.saturating_sub(1) {
            c.push(Gate::Cnot {
                control: q,
                target: q + 1,
            });
        }
        for q in 0..n_qubits {
            let i = l * n_qubits + q;
            let gate = if (n_layers - l) % 2 == 0 {
                Gate::Rz(q, params[i])
            } else {
                Gate::Rx(q, params[i])
            };
            c.push_bound(gate, bound(i));
        }
    }
    Ok(c)
}

/// `H` then `RZ(x_q)` on every wire `q`, reading feature `q`.
pub fn angle_encoding(x: &[f64]) -> Circuit {
    let mut c = Circuit::new(x.len());
    for (q, &v) in x.iter().enumerate() {
        c.push(Gate::H(q));
        c.push_bound(Gate::Rz(q, v), [Feature(q), Fixed, Fixed]);
    }
    c
}

/// Encoding rank `H` then `RZ(ω_enc)` per wire, then `RX(ω)` and `RZ(ω)` with
/// one shared trainable `ω` per wire, then CNOTs over `edges`.
pub fn build_sqnn(
    n_qubits: usize,
    enc: &[f64],
    train: &[f64],
    edges: &[(usize, usize)],
) -> Result<Circuit> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("SQNN needs at least one qubit".into()));
    }
    check_len("SQNN encoding angles", n_qubits, enc.len())?;
    check_len("SQNN trainable angles", n_qubits, train.len())?;
    let mut c = angle_encoding(enc);
    for q in 0..n_qubits {
        c.push_bound(Gate::Rx(q, train[q]), [Param(q), Fixed, Fixed]);
        c.push_bound(Gate::Rz(q, train[q]), [Param(q), Fixed, Fixed]);
    }
    for &(control, target) in edges {
        c.push(Gate::Cnot { control, target });
    }
    c.validate()?;
    Ok(c)
}

/// Circular CNOT edges `q → q+1 mod n`.
pub fn cnot_ring(n: usize) -> Vec<(usize, usize)> {
    cz_ring(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dr,
    Hea,
    Sqnn,
}

impl Family {
    pub fn features_per_qubit(self) -> usize {
        match self {
            Family::Dr => 3,
            Family::Hea | Family::Sqnn => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Dr => "dr",
            Family::Hea => "hea",
            Family::Sqnn => "sqnn",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dr" => Ok(Family::Dr),
            "hea" => Ok(Family::Hea),
            "sqnn" => Ok(Family::Sqnn),
            _ => Err(Error::Config(format!("unknown circuit family `{s}`"))),
        }
    }
}

/// A circuit family with its size. Re-upload circuits read `3n` features;
/// HEA and SQNN share the angle encoding and read `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PqcSpec {
    pub family: Family,
    pub n_qubits: usize,
    /// Re-upload blocks for `dr`, layers for `hea`, unused for `sqnn`.
    pub depth: usize,
}

impl PqcSpec {
    pub fn new(family: Family, n_qubits: usize, depth: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
        }
        if family == Family::Dr && depth == 0 {
            return Err(Error::InvalidArgument("re-upload circuit needs at least one block".into()));
        }
        Ok(Self {
            family,
            n_qubits,
            depth,
        })
    }

    pub fn n_params(&self) -> usize {
        match self.family {
            Family::Dr => 3 * self.n_qubits * self.depth,
            Family::Hea => self.n_qubits * (self.depth + 1),
            Family::Sqnn => self.n_qubits,
        }
    }

    pub fn n_features(&self) -> usize {
        self.family.features_per_qubit() * self.n_qubits
    }

    pub fn build(&self, x: &[f64], params: &[f64]) -> Result<Circuit> {
        let n = self.n_qubits;
        check_len("features", self.n_features(), x.len())?;
        match self.family {
            Family::Dr => build_dr_circuit(&DrCircuitSpec::new(n, self.depth)?, x, params),
            Family::Hea => {
                let mut c = angle_encoding(x);
                c.extend(build_hea(n, self.depth, params)?);
                Ok(c)
            }
            Family::Sqnn => build_sqnn(n, x, params, &cnot_ring(n)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitScheme {
    /// `N(0,1)` truncated to `[0, 2π]`.
    #[serde(rename = "tn2pi")]
    TruncNormal02Pi,
    #[serde(rename = "u2pi")]
    Uniform02Pi,
    #[serde(rename = "u01")]
    Uniform01,
    /// `N(0,1)` truncated to `[0, 1]`.
    #[serde(rename = "tn01")]
    TruncNormal01,
}

impl InitScheme {
    pub const ALL: [InitScheme; 4] = [
        InitScheme::TruncNormal02Pi,
        InitScheme::Uniform02Pi,
        InitScheme::Uniform01,
        InitScheme::TruncNormal01,
    ];

    pub fn interval(&self) -> (f64, f64) {
        match self {
            InitScheme::TruncNormal02Pi | InitScheme::Uniform02Pi => (0.0, TAU),
            InitScheme::Uniform01 | InitScheme::TruncNormal01 => (0.0, 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitScheme::TruncNormal02Pi => "tn2pi",
            InitScheme::Uniform02Pi => "u2pi",
            InitScheme::Uniform01 => "u01",
            InitScheme::TruncNormal01 => "tn01",
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitScheme::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown init scheme `{s}`")))
    }
}

pub fn init_params(scheme: InitScheme, rng: &mut Rng, count: usize) -> Result<Vec<f64>> {
    let (lo, hi) = scheme.interval();
    match scheme {
        InitScheme::Uniform02Pi | InitScheme::Uniform01 => sample_uniform(rng, lo, hi, count),
        InitScheme::TruncNormal02Pi | InitScheme::TruncNormal01 => {
            sample_truncated_normal(rng, 0.0, 1.0, lo, hi, count)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::evolve;
    use std::f64::consts::PI;

    #[test]
    fn block_gate_counts() {
        assert_eq!(build_dr_block(0, &[0.0; 3], &[0.0; 3]).unwrap().len(), 2);
        assert_eq!(build_dr_block(0, &[0.0; 27], &[0.0; 27]).unwrap().len(), 27);
        assert_eq!(build_dr_block(0, &[0.0; 6], &[0.0; 6]).unwrap().len(), 5);
        assert!(matches!(
            build_dr_block(0, &[0.0; 6], &[0.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_angles_give_all_up() {
        for n in 1..=5 {
            let spec = DrCircuitSpec::new(n, 2).unwrap();
            let c = build_dr_circuit(&spec, &vec![0.0; 3 * n], &vec![0.0; spec.n_params()]).unwrap();
            assert!(evolve(&c, None).unwrap().iter().all(|e| (e - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(DrCircuitSpec::new(9, 2).unwrap().n_params(), 54);
        let d = DrCircuitSpec::new(18, 4).unwrap().n_params() - DrCircuitSpec::new(18, 2).unwrap().n_params();
        assert_eq!(d, 1298 - 1190);
        assert_eq!(PqcSpec::new(Family::Hea, 9, 1).unwrap().n_params(), 18);
        assert_eq!(PqcSpec::new(Family::Sqnn, 9, 0).unwrap().n_params(), 9);
    }

    #[test]
    fn single_qubit_rz_only_keeps_ground() {
        let spec = DrCircuitSpec::new(1, 1).unwrap();
        let c = build_dr_circuit(&spec, &[PI, 0.0, 0.0], &[0.0; 3]).unwrap();
        assert!((evolve(&c, None).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqnn_shape() {
        let c = build_sqnn(1, &[0.0], &[0.0], &[]).unwrap();
        assert!(evolve(&c, None).unwrap()[0].abs() < 1e-12);
        let c = build_sqnn(9, &[0.1; 9], &[0.2; 9], &cnot_ring(9)).unwrap();
        assert_eq!(c.len(), 2 * 9 + 2 * 9 + 9);
        assert!(matches!(
            build_sqnn(2, &[0.0; 2], &[0.0; 2], &[(0, 5)]),
            Err(Error::QubitIndex { .. })
        ));
    }

    #[test]
    fn hea_and_sqnn_share_the_angle_encoding() {
        for family in [Family::Hea, Family::Sqnn] {
            let spec = PqcSpec::new(family, 3, 2).unwrap();
            assert_eq!(spec.n_features(), 3);
            let c = spec.build(&[0.4, 1.0, 2.0], &vec![0.0; spec.n_params()]).unwrap();
            let head: Vec<&Gate> = c.gates().take(6).collect();
            let enc = angle_encoding(&[0.4, 1.0, 2.0]);
            assert_eq!(head, enc.gates().collect::<Vec<_>>());
        }
        assert_eq!(PqcSpec::new(Family::Dr, 3, 2).unwrap().n_features(), 9);
    }

    #[test]
    fn hea_zero_angles_are_entanglers_only() {
        let c = build_hea(3, 2, &[0.0; 9]).unwrap();
        assert_eq!(c.gates().filter(|g| g.is_two_qubit()).count(), 4);
        assert!(evolve(&c, None).unwrap().iter().all(|e| (e - 1.0).abs() < 1e-12));
    }

    #[test]
    fn init_ranges() {
        let mut rng = Rng::new(5);
        assert!(init_params(InitScheme::Uniform02Pi, &mut rng, 0).unwrap().is_empty());
        for scheme in InitScheme::ALL {
            let (lo, hi) = scheme.interval();
            let v = init_params(scheme, &mut rng, 1000).unwrap();
            assert!(v.iter().all(|x| (lo..=hi).contains(x)), "{scheme}");
        }
        assert_eq!("TN01".parse::<InitScheme>().unwrap(), InitScheme::TruncNormal01);
    }
}
