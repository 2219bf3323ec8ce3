//! Data re-uploading circuit.
//!
//! One layer is `U_ent * U_rot(theta_l) * U_enc(x)`, applied to `|0...0>` (optionally
//! after a Hadamard on every qubit):
//!
//! 1. `RY(x_i)` on every qubit,
//! 2. `RY(theta_{l,i}) * RZ(theta'_{l,i})` on every qubit (RZ acts first),
//! 3. CZ on the entangling edges.
//!
//! Layer 1 is applied first. The final layer's rotation and entangler are data
//! independent, so they cancel in state overlaps; only measured observables see them.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sim::{StateVector, DEFAULT_QUBIT_CAP};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntanglePattern {
    /// CZ on (i, i+1) for i = 0..n-2.
    #[default]
    LinearChain,
    /// Linear chain plus (n-1, 0) when n > 2.
    Ring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub n_qubits: usize,
    pub layers: usize,
    #[serde(default)]
    pub entangle: EntanglePattern,
    #[serde(default = "default_true")]
    pub hadamard_init: bool,
    /// Allow more features than qubits; feature chunks are uploaded round-robin across layers.
    #[serde(default)]
    pub wrap_features: bool,
}

fn default_true() -> bool {
    true
}

impl AnsatzConfig {
    /// Hadamard init, linear-chain CZ, no feature wrapping.
    pub fn new(n_qubits: usize, layers: usize) -> Result<Self> {
        let config = Self {
            n_qubits,
            layers,
            entangle: EntanglePattern::LinearChain,
            hadamard_init: true,
            wrap_features: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_hadamard_init(mut self, on: bool) -> Self {
        self.hadamard_init = on;
        self
    }

    pub fn with_entangle(mut self, pattern: EntanglePattern) -> Self {
        self.entangle = pattern;
        self
    }

    pub fn with_wrap_features(mut self, on: bool) -> Self {
        self.wrap_features = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > DEFAULT_QUBIT_CAP {
            return Err(Error::Capacity {
                requested: self.n_qubits,
                cap: DEFAULT_QUBIT_CAP,
            });
        }
        if self.layers == 0 {
            return Err(Error::InvalidParameter("ansatz needs at least one layer".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        2 * self.n_qubits * self.layers
    }

    pub fn entangling_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_qubits;
        let mut edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.entangle == EntanglePattern::Ring && n > 2 {
            edges.push((n - 1, 0));
        }
        edges
    }

    /// Data angle fed to `qubit` in `layer`.
    fn data_angle(&self, angles: &[f64], layer: usize, qubit: usize) -> f64 {
        let n = self.n_qubits;
        if angles.len() == n {
            return angles[qubit];
        }
        let chunks = angles.len().div_ceil(n);
        let feature = (layer % chunks) * n + qubit;
        angles.get(feature).copied().unwrap_or(0.0)
    }

    fn check_angles(&self, angles: &[f64]) -> Result<()> {
        let d = angles.len();
        let ok = d == self.n_qubits || (self.wrap_features && d > self.n_qubits);
        if !ok {
            return Err(Error::DimensionMismatch {
                context: "encoded features vs qubits",
                expected: self.n_qubits,
                actual: d,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleKind {
    /// theta_{l,i}
    Ry,
    /// theta'_{l,i}
    Rz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamIndex {
    pub layer: usize,
    pub qubit: usize,
    pub kind: AngleKind,
}

impl ParamIndex {
    pub fn new(layer: usize, qubit: usize, kind: AngleKind) -> Self {
        Self { layer, qubit, kind }
    }

    /// Position in the flat vector `[theta (L x n, row-major), theta' (L x n)]`.
    pub fn flat(&self, config: &AnsatzConfig) -> usize {
        let block = config.layers * config.n_qubits;
        let offset = match self.kind {
            AngleKind::Ry => 0,
            AngleKind::Rz => block,
        };
        offset + self.layer * config.n_qubits + self.qubit
    }

    pub fn from_flat(config: &AnsatzConfig, flat: usize) -> Result<Self> {
        let block = config.layers * config.n_qubits;
        if flat >= 2 * block {
            return Err(Error::InvalidParameter(format!(
                "parameter index {flat} out of range ({} parameters)",
                2 * block
            )));
        }
        let (kind, rest) = if flat < block {
            (AngleKind::Ry, flat)
        } else {
            (AngleKind::Rz, flat - block)
        };
        Ok(Self::new(rest / config.n_qubits, rest % config.n_qubits, kind))
    }

    pub fn all(config: &AnsatzConfig) -> impl Iterator<Item = ParamIndex> + '_ {
        (0..config.param_count()).map(move |f| Self::from_flat(config, f).expect("in range"))
    }

    fn check(&self, config: &AnsatzConfig) -> Result<()> {
        if self.layer >= config.layers || self.qubit >= config.n_qubits {
            return Err(Error::InvalidParameter(format!(
                "parameter (layer {}, qubit {}) outside {} x {} ansatz",
                self.layer, self.qubit, config.layers, config.n_qubits
            )));
        }
        Ok(())
    }
}

/// Variational angles: `theta` (RY) and `theta_prime` (RZ), each `layers x n_qubits` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub layers: usize,
    pub n_qubits: usize,
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
}

impl AnsatzParams {
    pub fn zeros(config: &AnsatzConfig) -> Self {
        let len = config.layers * config.n_qubits;
        Self {
            layers: config.layers,
            n_qubits: config.n_qubits,
            theta: vec![0.0; len],
            theta_prime: vec![0.0; len],
        }
    }

    /// Uniform draws in `[-half_width, half_width]`.
    pub fn random_uniform(config: &AnsatzConfig, half_width: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut params = Self::zeros(config);
        for v in params.theta.iter_mut().chain(params.theta_prime.iter_mut()) {
            *v = rng.random_range(-half_width..=half_width);
        }
        params
    }

    /// Default variational initialization: uniform in [-pi/10, pi/10].
    pub fn default_init(config: &AnsatzConfig, seed: u64) -> Self {
        Self::random_uniform(config, PI / 10.0, seed)
    }

    pub fn from_flat(config: &AnsatzConfig, flat: &[f64]) -> Result<Self> {
        if flat.len() != config.param_count() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: config.param_count(),
                actual: flat.len(),
            });
        }
        let block = config.layers * config.n_qubits;
        let params = Self {
            layers: config.layers,
            n_qubits: config.n_qubits,
            theta: flat[..block].to_vec(),
            theta_prime: flat[block..].to_vec(),
        };
        params.check(config)?;
        Ok(params)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.theta_prime).copied().collect()
    }

    pub fn get(&self, config: &AnsatzConfig, idx: ParamIndex) -> Result<f64> {
        idx.check(config)?;
        let i = idx.layer * self.n_qubits + idx.qubit;
        Ok(match idx.kind {
            AngleKind::Ry => self.theta[i],
            AngleKind::Rz => self.theta_prime[i],
        })
    }

    /// Copy with one angle moved by `delta`.
    pub fn shifted(&self, config: &AnsatzConfig, idx: ParamIndex, delta: f64) -> Result<Self> {
        idx.check(config)?;
        let mut out = self.clone();
        let i = idx.layer * self.n_qubits + idx.qubit;
        match idx.kind {
            AngleKind::Ry => out.theta[i] += delta,
            AngleKind::Rz => out.theta_prime[i] += delta,
        }
        Ok(out)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.theta.iter().chain(&self.theta_prime).map(|v| v * v).sum()
    }

    pub fn check(&self, config: &AnsatzConfig) -> Result<()> {
        let len = config.layers * config.n_qubits;
        if self.layers != config.layers
            || self.n_qubits != config.n_qubits
            || self.theta.len() != len
            || self.theta_prime.len() != len
        {
            return Err(Error::DimensionMismatch {
                context: "ansatz parameters vs config",
                expected: len,
                actual: self.theta.len().min(self.theta_prime.len()),
            });
        }
        if self.theta.iter().chain(&self.theta_prime).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ansatz parameters"));
        }
        Ok(())
    }
}

/// Feature vector already mapped to rotation angles in `[0, pi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedAngles(Vec<f64>);

impl EncodedAngles {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if let Some(bad) = angles.iter().find(|a| !(0.0..=PI).contains(*a)) {
            return Err(Error::InvalidParameter(format!(
                "encoded angle {bad} outside [0, pi]"
            )));
        }
        Ok(Self(angles))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for EncodedAngles {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-feature `[min, max]` fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureRanges {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("feature range fit"))?;
        let d = first.as_ref().len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "feature range fit",
                    expected: d,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite("feature value"));
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn constant_features(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.max[j] <= self.min[j]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    pub angles: EncodedAngles,
    /// Features whose fitted range is degenerate; they encode to angle 0.
    pub constant_features: Vec<usize>,
}

/// `angle_i = pi * (x_i - min_i) / (max_i - min_i)`, clamped to `[0, pi]`.
pub fn encode_features(x: &[f64], ranges: &FeatureRanges) -> Result<Encoding> {
    if x.len() != ranges.dim() {
        return Err(Error::DimensionMismatch {
            context: "features vs fitted ranges",
            expected: ranges.dim(),
            actual: x.len(),
        });
    }
    let mut constant_features = Vec::new();
    let mut angles = Vec::with_capacity(x.len());
    for (j, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite("feature value"));
        }
        let (lo, hi) = (ranges.min[j], ranges.max[j]);
        if hi <= lo {
            constant_features.push(j);
            angles.push(0.0);
        } else {
            angles.push((PI * (v - lo) / (hi - lo)).clamp(0.0, PI));
        }
    }
    Ok(Encoding {
        angles: EncodedAngles(angles),
        constant_features,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Gate {
    H(usize),
    Ry(usize, f64),
    Rz(usize, f64),
    Cz(usize, usize),
}

fn circuit(
    angles: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    layers: usize,
) -> Result<Vec<Gate>> {
    config.validate()?;
    config.check_angles(angles)?;
    params.check(config)?;
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("encoded angles"));
    }
    let n = config.n_qubits;
    let edges = config.entangling_edges();
    let mut gates = Vec::with_capacity(n + layers * (3 * n + edges.len()));
    if config.hadamard_init {
        gates.extend((0..n).map(Gate::H));
    }
    for layer in 0..layers {
        gates.extend((0..n).map(|q| Gate::Ry(q, config.data_angle(angles, layer, q))));
        for q in 0..n {
            let i = layer * n + q;
            gates.push(Gate::Rz(q, params.theta_prime[i]));
            gates.push(Gate::Ry(q, params.theta[i]));
        }
        gates.extend(edges.iter().map(|&(a, b)| Gate::Cz(a, b)));
    }
    Ok(gates)
}

fn apply_gate(state: &mut StateVector, gate: Gate) -> Result<()> {
    match gate {
        Gate::H(q) => state.apply_hadamard(q),
        Gate::Ry(q, a) => state.apply_ry(q, a),
        Gate::Rz(q, a) => state.apply_rz(q, a),
        Gate::Cz(a, b) => state.apply_cz(a, b),
    }
}

/// `phi_theta(x) = U(x, theta)|0...0>`.
pub fn prepare_state(
    angles: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<StateVector> {
    prepare_prefix(angles, params, config, config.layers)
}

/// State after only the first `layers` re-uploading layers.
pub fn prepare_prefix(
    angles: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    layers: usize,
) -> Result<StateVector> {
    if layers == 0 || layers > config.layers {
        return Err(Error::InvalidParameter(format!(
            "prefix of {layers} layers requested from a {}-layer ansatz",
            config.layers
        )));
    }
    let mut state = StateVector::new_zero_state(config.n_qubits)?;
    for gate in circuit(angles, params, config, layers)? {
        apply_gate(&mut state, gate)?;
    }
    Ok(state)
}

/// Applies `U(x, theta)^dagger` to `state` in place.
pub fn apply_inverse(
    state: &mut StateVector,
    angles: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<()> {
    for gate in circuit(angles, params, config, config.layers)?.into_iter().rev() {
        let inv = match gate {
            Gate::Ry(q, a) => Gate::Ry(q, -a),
            Gate::Rz(q, a) => Gate::Rz(q, -a),
            self_inverse => self_inverse,
        };
        apply_gate(state, inv)?;
    }
    Ok(())
}
