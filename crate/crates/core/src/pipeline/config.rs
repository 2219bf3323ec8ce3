//! Pipeline configuration (TOML) with `key.path=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::EntanglePattern;
use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::metrics::ThresholdPolicy;
use crate::nystrom::LandmarkStrategy;
use crate::pipeline::split::SplitProportions;
use crate::variational::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Rbf,
    Polynomial,
    Quantum,
    Qfe,
    NystromUniform,
    NystromLeverage,
    /// Placeholder for a hardware-backed kernel; always rejected.
    Hardware,
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Rbf => "rbf",
            ModelKind::Polynomial => "polynomial",
            ModelKind::Quantum => "quantum",
            ModelKind::Qfe => "qfe",
            ModelKind::NystromUniform => "nystrom-uniform",
            ModelKind::NystromLeverage => "nystrom-leverage",
            ModelKind::Hardware => "hardware",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown model {s:?}")))
    }

    pub fn uses_quantum_kernel(&self) -> bool {
        matches!(
            self,
            ModelKind::Quantum | ModelKind::Qfe | ModelKind::NystromUniform | ModelKind::NystromLeverage
        )
    }

    pub fn landmark_strategy(&self) -> Option<LandmarkStrategy> {
        match self {
            ModelKind::NystromUniform => Some(LandmarkStrategy::Uniform),
            ModelKind::NystromLeverage => Some(LandmarkStrategy::Leverage),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub csv: PathBuf,
    pub spec: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmSection {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Candidate C values scored on the validation split; empty keeps `c`.
    pub c_grid: Vec<f64>,
    /// When >= 2, candidates are scored by k-fold AUC on the training split instead.
    pub cv_folds: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: crate::svm::DEFAULT_TOL,
            max_iter: crate::svm::DEFAULT_MAX_ITER,
            c_grid: Vec::new(),
            cv_folds: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnsatzSection {
    /// Qubit count; defaults to the encoded feature count capped at `max_qubits`
    /// (extra features wrap round-robin across layers).
    pub n_qubits: Option<usize>,
    pub max_qubits: usize,
    pub layers: usize,
    pub entangle: EntanglePattern,
    pub hadamard_init: bool,
}

impl Default for AnsatzSection {
    fn default() -> Self {
        Self {
            n_qubits: None,
            max_qubits: 8,
            layers: 2,
            entangle: EntanglePattern::LinearChain,
            hadamard_init: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    /// Defaults to `1 / d`.
    pub rbf_gamma: Option<f64>,
    pub poly_degree: u32,
    pub poly_coef: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self {
            rbf_gamma: None,
            poly_degree: 3,
            poly_coef: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QfeSection {
    /// Defaults to the ansatz depth.
    pub slices: Option<usize>,
    pub target_dim: usize,
}

impl Default for QfeSection {
    fn default() -> Self {
        Self {
            slices: None,
            target_dim: crate::qfe::DEFAULT_TARGET_DIM,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NystromSection {
    /// Defaults to `ceil(sqrt(N_train))`.
    pub landmarks: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationalSection {
    pub enabled: bool,
    /// Training rows used by the optimizer (a stratified subsample of the train split).
    pub max_points: usize,
    pub train: TrainConfig,
}

impl Default for VariationalSection {
    fn default() -> Self {
        Self {
            enabled: false,
            max_points: 64,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Applied to decision values min-max normalized on the validation split.
    pub threshold: f64,
    pub policies: Vec<ThresholdPolicy>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            policies: vec![
                ThresholdPolicy::RecallFirst { min_recall: 0.8 },
                ThresholdPolicy::PrecisionFirst { min_precision: 0.8 },
                ThresholdPolicy::Youden,
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub split: SplitProportions,
    pub models: Vec<ModelKind>,
    pub svm: SvmSection,
    pub ansatz: AnsatzSection,
    pub kernel: KernelMode,
    pub classical: ClassicalSection,
    pub qfe: QfeSection,
    pub nystrom: NystromSection,
    pub variational: VariationalSection,
    pub metrics: MetricsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("qkernel-out"),
            data: DataConfig::default(),
            split: SplitProportions::default(),
            models: vec![ModelKind::Linear, ModelKind::Rbf, ModelKind::Polynomial, ModelKind::Quantum],
            svm: SvmSection::default(),
            ansatz: AnsatzSection::default(),
            kernel: KernelMode::Exact,
            classical: ClassicalSection::default(),
            qfe: QfeSection::default(),
            nystrom: NystromSection::default(),
            variational: VariationalSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `a.b.c=value` to a TOML table, creating intermediate tables as needed.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path {key:?} crosses a non-table value")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("config error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.csv, &mut cfg.data.spec, &mut cfg.output_dir] {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        let bad_c = |c: f64| !(c > 0.0 && c.is_finite());
        if bad_c(self.svm.c) || self.svm.c_grid.iter().any(|&c| bad_c(c)) {
            return Err(Error::Config("SVM C values must be positive".into()));
        }
        if !(self.svm.tol > 0.0) || self.svm.max_iter == 0 {
            return Err(Error::Config("SVM tol and max_iter must be positive".into()));
        }
        if self.svm.cv_folds == 1 {
            return Err(Error::Config("cv_folds must be 0 (off) or at least 2".into()));
        }
        if self.ansatz.layers == 0 || self.ansatz.max_qubits == 0 {
            return Err(Error::Config("ansatz layers and max_qubits must be positive".into()));
        }
        if self.ansatz.n_qubits == Some(0) {
            return Err(Error::Config("ansatz n_qubits must be positive".into()));
        }
        if let Some(g) = self.classical.rbf_gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("rbf_gamma {g} must be positive")));
            }
        }
        if self.classical.poly_degree == 0 {
            return Err(Error::Config("poly_degree must be at least 1".into()));
        }
        if self.nystrom.landmarks == Some(0) {
            return Err(Error::Config("nystrom landmarks must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.metrics.threshold) {
            return Err(Error::Config("metrics threshold must lie in [0, 1]".into()));
        }
        if self.variational.enabled {
            self.variational
                .train
                .validate()
                .map_err(|e| Error::Config(format!("variational: {e}")))?;
            if self.variational.max_points < 4 {
                return Err(Error::Config("variational max_points must be at least 4".into()));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
