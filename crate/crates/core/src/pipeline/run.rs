//! End-to-end experiment: load, split, preprocess, (optionally) train the ansatz, then fit and
//! evaluate every configured model, writing artifacts as each stage finishes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{AnsatzConfig, AnsatzParams};
use crate::classical::{LinearKernel, PolynomialKernel, RbfKernel};
use crate::error::{Error, Result};
use crate::io;
use crate::kernel::{GramMatrix, Kernel, KernelMode, QuantumKernel};
use crate::metrics::{
    auc, classification_report, confusion_at, normalize_scores, roc_curve, score_range, select_threshold,
    ClassificationReport, Confusion, OperatingPoint, ThresholdPolicy,
};
use crate::nystrom::{approx_cross, approx_gram, build_nystrom, pilot_gram, sample_landmarks, LandmarkStrategy};
use crate::pipeline::config::{AnsatzSection, ModelKind, PipelineConfig};
use crate::pipeline::data::{load_csv, DatasetSpec, RawDataset};
use crate::pipeline::preprocess::Preprocessor;
use crate::pipeline::split::{stratified_folds, stratified_split, SplitIndices, SplitProportions};
use crate::qfe::{qfe_transform, QfeConfig, QfeMode, Standardizer};
use crate::rng::{derive_seed, rng_from_seed};
use crate::svm::{decision_values, label_of, train_smo, SvmModel};
use crate::variational::{optimize, TrainTrace};

/// Split, fitted preprocessing and angle encoding of every row.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub split: SplitIndices,
    pub preprocessor: Preprocessor,
    /// Angles for all rows, in file order.
    pub angles: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

impl PreparedData {
    pub fn rows(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<i8>) {
        (
            idx.iter().map(|&i| self.angles[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

pub fn prepare(data: &RawDataset, proportions: SplitProportions, seed: u64) -> Result<PreparedData> {
    let split = stratified_split(&data.labels, proportions, derive_seed(seed, "split")).map_err(|e| e.in_stage("split"))?;
    let preprocessor = Preprocessor::fit(data, &split.train).map_err(|e| e.in_stage("preprocess"))?;
    let angles = preprocessor.transform(data).map_err(|e| e.in_stage("preprocess"))?;
    Ok(PreparedData {
        split,
        preprocessor,
        angles,
        labels: data.labels.clone(),
    })
}

/// Ansatz for `d` encoded features: `n_qubits` defaults to `min(d, max_qubits)`, wrapping the
/// surplus features across layers.
pub fn resolve_ansatz(section: &AnsatzSection, d: usize) -> Result<AnsatzConfig> {
    let n = section.n_qubits.unwrap_or_else(|| d.clamp(1, section.max_qubits));
    Ok(AnsatzConfig::new(n, section.layers)?
        .with_entangle(section.entangle)
        .with_hadamard_init(section.hadamard_init)
        .with_wrap_features(d > n))
}

/// Zero-pads angle rows narrower than the register.
pub fn fit_width(rows: &[Vec<f64>], n_qubits: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            if r.len() < n_qubits {
                r.resize(n_qubits, 0.0);
            }
            r
        })
        .collect()
}

/// Up to `max_points` training rows with both classes in proportion.
pub fn stratified_subsample(labels: &[i8], max_points: usize, seed: u64) -> Vec<usize> {
    if labels.len() <= max_points {
        return (0..labels.len()).collect();
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let want_pos = ((max_points as f64 * pos.len() as f64 / labels.len() as f64).round() as usize)
        .clamp(1.min(pos.len()), pos.len().min(max_points - 1));
    let want_neg = (max_points - want_pos).min(neg.len());
    let mut rng = rng_from_seed(seed);
    let mut out: Vec<usize> = rand::seq::index::sample(&mut rng, pos.len(), want_pos)
        .into_iter()
        .map(|k| pos[k])
        .chain(
            rand::seq::index::sample(&mut rng, neg.len(), want_neg)
                .into_iter()
                .map(|k| neg[k]),
        )
        .collect();
    out.sort_unstable();
    out
}

/// Kernel blocks an SVM is trained and scored on.
pub struct KernelBlocks {
    pub train: GramMatrix,
    pub validation: DMatrix<f64>,
    pub test: DMatrix<f64>,
    pub landmarks: Option<Vec<usize>>,
    pub artifacts: Vec<(String, Artifact)>,
}

pub enum Artifact {
    Gram(GramMatrix),
    Nystrom(crate::nystrom::NystromModel),
    Text(String),
}

/// Everything a model needs besides the config.
pub struct ModelInputs<'a> {
    pub train: &'a [Vec<f64>],
    pub validation: &'a [Vec<f64>],
    pub test: &'a [Vec<f64>],
    pub ansatz: &'a AnsatzConfig,
    pub params: &'a AnsatzParams,
}

fn blocks_from_kernel<K: Kernel + ?Sized>(kernel: &K, inp: &ModelInputs, tag: &str) -> Result<KernelBlocks> {
    let train = kernel.gram(inp.train)?;
    Ok(KernelBlocks {
        validation: kernel.cross(inp.validation, inp.train)?,
        test: kernel.cross(inp.test, inp.train)?,
        landmarks: None,
        artifacts: vec![(format!("gram_{tag}.qkgm"), Artifact::Gram(train.clone()))],
        train,
    })
}

pub fn quantum_kernel(inp: &ModelInputs, mode: KernelMode) -> Result<QuantumKernel> {
    Ok(QuantumKernel::new(inp.ansatz.clone(), inp.params.clone())?.with_mode(mode))
}

/// Builds the train Gram and validation/test cross blocks for one model.
pub fn kernel_blocks(model: ModelKind, cfg: &PipelineConfig, inp: &ModelInputs) -> Result<KernelBlocks> {
    let tag = model.tag();
    let d = inp.train.first().map_or(0, Vec::len);
    match model {
        ModelKind::Linear => blocks_from_kernel(&LinearKernel, inp, tag),
        ModelKind::Rbf => {
            let k = match cfg.classical.rbf_gamma {
                Some(g) => RbfKernel::new(g)?,
                None => RbfKernel::for_dim(d)?,
            };
            blocks_from_kernel(&k, inp, tag)
        }
        ModelKind::Polynomial => blocks_from_kernel(
            &PolynomialKernel::new(cfg.classical.poly_degree, cfg.classical.poly_coef)?,
            inp,
            tag,
        ),
        ModelKind::Quantum => {
            let k = quantum_kernel(inp, cfg.kernel)?;
            let fit = |rows: &[Vec<f64>]| fit_width(rows, inp.ansatz.n_qubits);
            let (tr, va, te) = (fit(inp.train), fit(inp.validation), fit(inp.test));
            blocks_from_kernel(
                &k,
                &ModelInputs {
                    train: &tr,
                    validation: &va,
                    test: &te,
                    ..*inp
                },
                tag,
            )
        }
        ModelKind::NystromUniform | ModelKind::NystromLeverage => {
            let k = quantum_kernel(inp, cfg.kernel)?;
            let fit = |rows: &[Vec<f64>]| fit_width(rows, inp.ansatz.n_qubits);
            let (tr, va, te) = (fit(inp.train), fit(inp.validation), fit(inp.test));
            let n = tr.len();
            let m = cfg.nystrom.landmarks.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).min(n);
            let strategy = model.landmark_strategy().expect("nystrom model");
            let seed = derive_seed(cfg.seed, &format!("landmarks:{tag}"));
            let landmarks = match strategy {
                LandmarkStrategy::Uniform => sample_landmarks(n, m, strategy, seed, None)?,
                LandmarkStrategy::Leverage => {
                    let pilot = pilot_gram(&tr, (2 * m).min(n), &k, derive_seed(cfg.seed, "nystrom:pilot"))?;
                    sample_landmarks(n, m, strategy, seed, Some(&pilot))?
                }
            };
            let ny = build_nystrom(&tr, &landmarks, &k)?;
            let train = approx_gram(&ny)?;
            Ok(KernelBlocks {
                validation: approx_cross(&ny, &k, &tr, &va)?,
                test: approx_cross(&ny, &k, &tr, &te)?,
                landmarks: Some(landmarks),
                artifacts: vec![
                    (format!("gram_{tag}.qkgm"), Artifact::Gram(train.clone())),
                    (format!("{tag}.qkny"), Artifact::Nystrom(ny)),
                ],
                train,
            })
        }
        ModelKind::Qfe => {
            let slices = cfg.qfe.slices.unwrap_or(inp.ansatz.layers);
            let mode = match cfg.kernel {
                KernelMode::Exact => QfeMode::Exact,
                KernelMode::Shots { shots, seed } => QfeMode::Shots {
                    shots,
                    seed: derive_seed(seed, "qfe"),
                },
            };
            let qcfg = QfeConfig::new(inp.ansatz.clone(), inp.params.clone(), slices)?
                .with_target_dim(cfg.qfe.target_dim)?
                .with_mode(mode);
            let fit = |rows: &[Vec<f64>]| fit_width(rows, inp.ansatz.n_qubits);
            let train_fm = qfe_transform(&fit(inp.train), &qcfg)?;
            let scaler = Standardizer::fit_features(&train_fm)?;
            let tr = scaler.transform(&train_fm.rows)?;
            let va = scaler.transform(&qfe_transform(&fit(inp.validation), &qcfg)?.rows)?;
            let te = scaler.transform(&qfe_transform(&fit(inp.test), &qcfg)?.rows)?;
            let mut blocks = blocks_from_kernel(
                &LinearKernel,
                &ModelInputs {
                    train: &tr,
                    validation: &va,
                    test: &te,
                    ..*inp
                },
                tag,
            )?;
            blocks
                .artifacts
                .push(("qfe_train.csv".into(), Artifact::Text(train_fm.to_csv())));
            Ok(blocks)
        }
        ModelKind::Hardware => Err(Error::Unsupported(
            "hardware-backed kernels are not available in this build; use the simulator models".into(),
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CScore {
    pub c: f64,
    pub auc: f64,
}

fn fit_svm(k: &GramMatrix, y: &[i8], c: f64, cfg: &PipelineConfig) -> Result<SvmModel> {
    let model = train_smo(k, y, c, cfg.svm.tol, cfg.svm.max_iter)?;
    if !model.converged {
        log::warn!("SMO stopped after {} iterations without reaching tol {}", model.iterations, cfg.svm.tol);
    }
    Ok(model)
}

/// Chooses C from `svm.c_grid` by validation AUC (or k-fold AUC on train); ties keep the
/// earlier grid entry.
pub fn select_c(
    blocks: &KernelBlocks,
    y_train: &[i8],
    y_val: &[i8],
    cfg: &PipelineConfig,
) -> Result<(f64, Vec<CScore>)> {
    if cfg.svm.c_grid.is_empty() {
        return Ok((cfg.svm.c, Vec::new()));
    }
    let folds = if cfg.svm.cv_folds >= 2 {
        Some(stratified_folds(y_train, cfg.svm.cv_folds, derive_seed(cfg.seed, "cv"))?)
    } else {
        None
    };
    let mut scores = Vec::new();
    for &c in &cfg.svm.c_grid {
        let score = match &folds {
            None => {
                let model = fit_svm(&blocks.train, y_train, c, cfg)?;
                auc(&decision_values(&model, &blocks.validation)?, y_val)?
            }
            Some(folds) => {
                let mut total = 0.0;
                for held in folds {
                    let fit_idx: Vec<usize> = (0..y_train.len()).filter(|i| held.binary_search(i).is_err()).collect();
                    let y_fit: Vec<i8> = fit_idx.iter().map(|&i| y_train[i]).collect();
                    let y_held: Vec<i8> = held.iter().map(|&i| y_train[i]).collect();
                    let model = fit_svm(&blocks.train.select(&fit_idx), &y_fit, c, cfg)?;
                    let cross = DMatrix::from_fn(held.len(), fit_idx.len(), |r, s| blocks.train.get(held[r], fit_idx[s]));
                    total += auc(&decision_values(&model, &cross)?, &y_held)?;
                }
                total / folds.len() as f64
            }
        };
        scores.push(CScore { c, auc: score });
    }
    let best = scores
        .iter()
        .fold(&scores[0], |b, s| if s.auc > b.auc { s } else { b });
    Ok((best.c, scores))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub confusion: Confusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub policy: ThresholdPolicy,
    /// Operating point chosen on the validation split.
    pub validation: Option<OperatingPoint>,
    /// The same raw-score threshold applied to the test split.
    pub test: Option<TestPoint>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub kernel_rows: usize,
    pub c: f64,
    pub c_scores: Vec<CScore>,
    pub support_vectors: usize,
    pub svm_iterations: usize,
    pub svm_converged: bool,
    pub jitter: f64,
    pub landmarks: Option<Vec<usize>>,
    pub train_accuracy: f64,
    pub validation_auc: f64,
    pub test_auc: f64,
    /// Validation decision-value range used for min-max normalization.
    pub score_range: (f64, f64),
    pub threshold: f64,
    pub test_report: ClassificationReport,
    pub operating_points: Vec<PolicyOutcome>,
}

/// Scores of one fitted model on the three splits.
pub struct ModelScores {
    pub svm: SvmModel,
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    pub test: Vec<f64>,
}

pub fn evaluate_model(
    model: ModelKind,
    cfg: &PipelineConfig,
    blocks: &KernelBlocks,
    labels: [&[i8]; 3],
) -> Result<(ModelResult, ModelScores)> {
    let [y_train, y_val, y_test] = labels;
    let (c, c_scores) = select_c(blocks, y_train, y_val, cfg)?;
    let svm = fit_svm(&blocks.train, y_train, c, cfg)?;
    let train_scores = decision_values(&svm, &blocks.train.with_jitter(svm.jitter).into_inner())?;
    let val_scores = decision_values(&svm, &blocks.validation)?;
    let test_scores = decision_values(&svm, &blocks.test)?;
    if test_scores.iter().chain(&val_scores).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("decision values"));
    }

    let train_accuracy = train_scores
        .iter()
        .zip(y_train)
        .filter(|(s, &y)| label_of(**s) == y)
        .count() as f64
        / y_train.len() as f64;
    let (lo, hi) = score_range(&val_scores);
    let test_report = classification_report(&normalize_scores(&test_scores, lo, hi), y_test, cfg.metrics.threshold)?;
    let val_curve = roc_curve(&val_scores, y_val)?;
    let test_curve = roc_curve(&test_scores, y_test)?;

    let mut operating_points = Vec::new();
    for &policy in &cfg.metrics.policies {
        operating_points.push(match select_threshold(&val_curve, &val_scores, y_val, policy) {
            Ok(op) => {
                let conf = confusion_at(&test_scores, y_test, op.threshold)?;
                PolicyOutcome {
                    policy,
                    validation: Some(op),
                    test: Some(TestPoint {
                        threshold: op.threshold,
                        precision: conf.precision(),
                        recall: conf.recall(),
                        fpr: conf.fpr(),
                        confusion: conf,
                    }),
                    error: None,
                }
            }
            Err(e @ Error::Infeasible { .. }) => {
                log::warn!("{}: {e}", model.tag());
                PolicyOutcome {
                    policy,
                    validation: None,
                    test: None,
                    error: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e),
        });
    }

    let result = ModelResult {
        model: model.tag().to_string(),
        kernel_rows: blocks.train.n(),
        c,
        c_scores,
        support_vectors: svm.support_indices.len(),
        svm_iterations: svm.iterations,
        svm_converged: svm.converged,
        jitter: svm.jitter,
        landmarks: blocks.landmarks.clone(),
        train_accuracy,
        validation_auc: val_curve.auc,
        test_auc: test_curve.auc,
        score_range: (lo, hi),
        threshold: cfg.metrics.threshold,
        test_report,
        operating_points,
    };
    Ok((
        result,
        ModelScores {
            svm,
            train: train_scores,
            validation: val_scores,
            test: test_scores,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub encoded_dim: usize,
    pub positives: usize,
    pub split_sizes: [usize; 3],
}

/// Deterministic results; byte-identical across runs with the same config and inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub config_hash: String,
    pub dataset: DatasetSummary,
    pub ansatz: AnsatzConfig,
    pub variational: Option<TrainTrace>,
    pub models: Vec<ModelResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub derived_seeds: BTreeMap<String, u64>,
    /// Hex SHA-256 of each input file.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub metrics: Metrics,
    pub manifest: Manifest,
    pub split: SplitIndices,
    pub timings: Vec<(String, f64)>,
    pub output_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.note(name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).expect("serializable");
        body.push('\n');
        self.text(name, &body)
    }

    fn artifact(&mut self, name: &str, a: &Artifact) -> Result<()> {
        let path = self.dir.join(name);
        match a {
            Artifact::Gram(k) => io::save_gram(&path, k)?,
            Artifact::Nystrom(m) => io::save_nystrom(&path, m)?,
            Artifact::Text(t) => std::fs::write(&path, t)?,
        }
        self.note(name);
        Ok(())
    }

    fn note(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }
}

fn timed<T>(timings: &mut Vec<(String, f64)>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
    log::info!("stage {stage}: {:.3}s", start.elapsed().as_secs_f64());
    out
}

/// Loads the configured CSV and runs the experiment.
pub fn run_experiment(cfg: &PipelineConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut inputs = BTreeMap::new();
    let spec = DatasetSpec::load(&cfg.data.spec).map_err(|e| e.in_stage("load"))?;
    let data = load_csv(&cfg.data.csv, &spec).map_err(|e| e.in_stage("load"))?;
    for (key, path) in [("data", &cfg.data.csv), ("spec", &cfg.data.spec)] {
        inputs.insert(key.to_string(), sha256_hex(&std::fs::read(path)?));
    }
    run_on_dataset(cfg, &data, inputs)
}

/// Runs every stage after loading; `inputs` are recorded in the manifest as given.
pub fn run_on_dataset(
    cfg: &PipelineConfig,
    data: &RawDataset,
    inputs: BTreeMap<String, String>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let mut out = Writer::new(&cfg.output_dir)?;
    let config_hash = cfg.hash();
    let mut seeds = BTreeMap::new();
    seeds.insert("split".to_string(), derive_seed(cfg.seed, "split"));

    let prepared = timed(&mut timings, "split+preprocess", || prepare(data, cfg.split, cfg.seed))?;
    out.json("split.json", &prepared.split)?;
    out.json("preprocess.json", &prepared.preprocessor)?;

    let (x_train, y_train) = prepared.rows(&prepared.split.train);
    let (x_val, y_val) = prepared.rows(&prepared.split.validation);
    let (x_test, y_test) = prepared.rows(&prepared.split.test);
    let d = prepared.preprocessor.dim();
    let ansatz = resolve_ansatz(&cfg.ansatz, d).map_err(|e| e.in_stage("ansatz"))?;
    let init_seed = derive_seed(cfg.seed, "ansatz:init");
    seeds.insert("ansatz:init".into(), init_seed);
    let mut params = AnsatzParams::default_init(&ansatz, init_seed);

    let mut trace = None;
    if cfg.variational.enabled && cfg.models.iter().any(ModelKind::uses_quantum_kernel) {
        let sub_seed = derive_seed(cfg.seed, "variational:subset");
        seeds.insert("variational:subset".into(), sub_seed);
        let (p, t) = timed(&mut timings, "variational", || {
            let idx = stratified_subsample(&y_train, cfg.variational.max_points, sub_seed);
            let xs = fit_width(&idx.iter().map(|&i| x_train[i].clone()).collect::<Vec<_>>(), ansatz.n_qubits);
            let ys: Vec<i8> = idx.iter().map(|&i| y_train[i]).collect();
            optimize(&params, &ansatz, &xs, &ys, &cfg.variational.train)
        })?;
        out.text("variational_trace.csv", &t.to_csv())?;
        params = p;
        trace = Some(t);
    }

    let mut metrics = Metrics {
        config_hash: config_hash.clone(),
        dataset: DatasetSummary {
            rows: data.len(),
            features: data.spec.features.len(),
            encoded_dim: d,
            positives: data.labels.iter().filter(|&&y| y == 1).count(),
            split_sizes: prepared.split.parts().map(<[usize]>::len),
        },
        ansatz: ansatz.clone(),
        variational: trace,
        models: Vec::new(),
    };
    let inp = ModelInputs {
        train: &x_train,
        validation: &x_val,
        test: &x_test,
        ansatz: &ansatz,
        params: &params,
    };
    for &model in &cfg.models {
        let tag = model.tag();
        if let Some(s) = model.landmark_strategy() {
            seeds.insert(format!("landmarks:{tag}"), derive_seed(cfg.seed, &format!("landmarks:{tag}")));
            if s == LandmarkStrategy::Leverage {
                seeds.insert("nystrom:pilot".into(), derive_seed(cfg.seed, "nystrom:pilot"));
            }
        }
        let blocks = timed(&mut timings, &format!("{tag}:kernel"), || kernel_blocks(model, cfg, &inp))?;
        for (name, a) in &blocks.artifacts {
            out.artifact(name, a)?;
        }
        let (result, scores) = timed(&mut timings, &format!("{tag}:svm"), || {
            evaluate_model(model, cfg, &blocks, [&y_train, &y_val, &y_test])
        })?;
        io::save_svm(&out.dir.join(format!("svm_{tag}.qksv")), &scores.svm)?;
        out.note(&format!("svm_{tag}.qksv"));
        out.text(&format!("roc_{tag}.csv"), &roc_curve(&scores.test, &y_test)?.to_csv())?;
        out.text(&format!("scores_{tag}.csv"), &scores_csv(&prepared.split.test, &scores.test, &y_test))?;
        metrics.models.push(result);
        out.json("metrics.json", &metrics)?;
    }

    out.text("report.txt", &render_report(&metrics))?;
    out.json("metrics.json", &metrics)?;
    let mut artifacts = out.written.clone();
    artifacts.extend(["manifest.json".to_string(), "timing.json".to_string()]);
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        seed: cfg.seed,
        derived_seeds: seeds,
        inputs,
        artifacts,
    };
    out.json("manifest.json", &manifest)?;
    let timing_map: BTreeMap<&str, f64> = timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    out.json("timing.json", &timing_map)?;
    out.text("config.toml", &cfg.to_toml())?;
    Ok(ExperimentReport {
        metrics,
        manifest,
        split: prepared.split.clone(),
        timings,
        output_dir: cfg.output_dir.clone(),
    })
}

/// `row,score,label` CSV.
pub fn scores_csv(rows: &[usize], scores: &[f64], labels: &[i8]) -> String {
    let mut s = String::from("row,score,label\n");
    for ((r, v), y) in rows.iter().zip(scores).zip(labels) {
        let _ = writeln!(s, "{r},{v},{y}");
    }
    s
}

/// Reads the score and label columns of a [`scores_csv`] file.
pub fn read_scores_csv<R: std::io::Read>(reader: R) -> Result<(Vec<f64>, Vec<i8>)> {
    #[derive(Deserialize)]
    struct Row {
        score: f64,
        label: i8,
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Data(format!("scores CSV row {r}: {e}")))?;
        if !row.score.is_finite() || !matches!(row.label, 1 | -1) {
            return Err(Error::Data(format!("scores CSV row {r}: need a finite score and a +1/-1 label")));
        }
        scores.push(row.score);
        labels.push(row.label);
    }
    Ok((scores, labels))
}

fn policy_name(p: &ThresholdPolicy) -> String {
    match p {
        ThresholdPolicy::RecallFirst { min_recall } => format!("recall>={min_recall}"),
        ThresholdPolicy::PrecisionFirst { min_precision } => format!("precision>={min_precision}"),
        ThresholdPolicy::Youden => "youden".into(),
    }
}

/// Summary table over models followed by each model's classification report.
pub fn render_report(m: &Metrics) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "rows={} encoded_dim={} positives={} split={:?} qubits={} layers={}\n",
        m.dataset.rows, m.dataset.encoded_dim, m.dataset.positives, m.dataset.split_sizes, m.ansatz.n_qubits, m.ansatz.layers
    );
    let _ = writeln!(
        s,
        "{:<18} {:>8} {:>6} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "model", "C", "SVs", "train_acc", "val_auc", "test_auc", "test_acc", "test_f1+"
    );
    for r in &m.models {
        let _ = writeln!(
            s,
            "{:<18} {:>8.3} {:>6} {:>9.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.model,
            r.c,
            r.support_vectors,
            r.train_accuracy,
            r.validation_auc,
            r.test_auc,
            r.test_report.accuracy,
            r.test_report.positive().f1
        );
    }
    for r in &m.models {
        let _ = writeln!(s, "\n== {} (threshold {} on normalized scores) ==", r.model, r.threshold);
        s.push_str(&r.test_report.render());
        for op in &r.operating_points {
            match (&op.validation, &op.test) {
                (Some(v), Some(t)) => {
                    let _ = writeln!(
                        s,
                        "{:<16} threshold={:.4}  validation P={:.4} R={:.4}  test P={:.4} R={:.4} FPR={:.4}",
                        policy_name(&op.policy),
                        v.threshold,
                        v.precision,
                        v.recall,
                        t.precision,
                        t.recall,
                        t.fpr
                    );
                }
                _ => {
                    let _ = writeln!(
                        s,
                        "{:<16} infeasible: {}",
                        policy_name(&op.policy),
                        op.error.as_deref().unwrap_or("")
                    );
                }
            }
        }
    }
    s
}
