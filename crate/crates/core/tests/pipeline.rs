use std::collections::BTreeMap;
use std::f64::consts::PI;

use qkernel::ansatz::{AnsatzConfig, AnsatzParams};
use qkernel::classical::LinearKernel;
use qkernel::kernel::{Kernel, QuantumKernel};
use qkernel::pipeline::run::{read_scores_csv, run_on_dataset};
use qkernel::pipeline::synth::{generate, SynthKind};
use qkernel::pipeline::{run_experiment, write_csv, ModelKind, PipelineConfig, RawDataset};
use qkernel::svm::{decision_values, label_of, train_smo};
use qkernel::Error;

fn xor() -> (Vec<Vec<f64>>, Vec<i8>) {
    let xs = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    (xs, vec![1, -1, -1, 1])
}

fn train_accuracy(k: &dyn Kernel, xs: &[Vec<f64>], ys: &[i8], c: f64) -> f64 {
    let gram = k.gram(xs).unwrap();
    let model = train_smo(&gram, ys, c, 1e-6, 100_000).unwrap();
    let f = decision_values(&model, gram.matrix()).unwrap();
    let hits = f.iter().zip(ys).filter(|(v, &y)| label_of(**v) == y).count();
    hits as f64 / ys.len() as f64
}

#[test]
fn linear_svm_cannot_fit_xor() {
    let (xs, ys) = xor();
    for c in [0.01, 0.1, 1.0, 10.0, 1000.0] {
        let acc = train_accuracy(&LinearKernel, &xs, &ys, c);
        assert!(acc <= 0.75, "C={c}: accuracy {acc}");
    }
}

#[test]
fn quantum_kernel_fits_xor_for_some_seed() {
    let (xs, ys) = xor();
    let angles: Vec<Vec<f64>> = xs.iter().map(|r| r.iter().map(|v| v * PI / 2.0 + PI / 4.0).collect()).collect();
    let config = AnsatzConfig::new(2, 2).unwrap();
    let perfect = (0..20u64).find(|&seed| {
        let k = QuantumKernel::new(config.clone(), AnsatzParams::default_init(&config, seed)).unwrap();
        train_accuracy(&k, &angles, &ys, 10.0) == 1.0
    });
    assert!(perfect.is_some());
}

fn write_inputs(dir: &std::path::Path, data: &RawDataset) {
    let mut csv = Vec::new();
    write_csv(&mut csv, data).unwrap();
    std::fs::write(dir.join("data.csv"), csv).unwrap();
    std::fs::write(dir.join("spec.toml"), data.spec.to_toml()).unwrap();
}

const SMALL: &str = r#"
seed = 3
models = ["linear", "quantum"]

[data]
csv = "data.csv"
spec = "spec.toml"

[ansatz]
layers = 1
"#;

#[test]
fn emitted_config_reproduces_the_run() {
    let root = tempfile::tempdir().unwrap();
    write_inputs(root.path(), &generate(SynthKind::Mixed { positive_fraction: 0.4 }, 120, 1).unwrap());
    std::fs::write(root.path().join("exp.toml"), SMALL).unwrap();
    let cfg = PipelineConfig::load(&root.path().join("exp.toml"), &["output_dir=\"a\"".into()]).unwrap();
    let first = run_experiment(&cfg).unwrap();

    let replay_path = root.path().join("a").join("config.toml");
    let replay = PipelineConfig::load(&replay_path, &[format!("output_dir={:?}", root.path().join("b"))]).unwrap();
    let second = run_experiment(&replay).unwrap();
    assert_eq!(first.manifest.config_hash, second.manifest.config_hash);
    assert_eq!(first.manifest.derived_seeds, second.manifest.derived_seeds);
    let read = |run: &str, f: &str| std::fs::read(root.path().join(run).join(f)).unwrap();
    for f in ["metrics.json", "report.txt", "roc_linear.csv", "scores_quantum.csv", "gram_quantum.qkgm"] {
        assert_eq!(read("a", f), read("b", f), "{f}");
    }
    for f in &first.manifest.artifacts {
        assert!(root.path().join("a").join(f).exists(), "manifest lists missing {f}");
    }
}

#[test]
fn models_share_one_split() {
    let root = tempfile::tempdir().unwrap();
    let data = generate(SynthKind::TwoGaussians { dim: 3, separation: 2.0, positive_fraction: 0.5 }, 100, 2).unwrap();
    let cfg = PipelineConfig {
        output_dir: root.path().to_path_buf(),
        models: vec![ModelKind::Linear, ModelKind::Rbf, ModelKind::Polynomial],
        ..Default::default()
    };
    let report = run_on_dataset(&cfg, &data, BTreeMap::new()).unwrap();
    let test_rows = report.split.test.clone();
    for m in &report.metrics.models {
        let text = std::fs::read(root.path().join(format!("scores_{}.csv", m.model))).unwrap();
        let (scores, labels) = read_scores_csv(text.as_slice()).unwrap();
        assert_eq!(scores.len(), test_rows.len());
        let want: Vec<i8> = test_rows.iter().map(|&i| data.labels[i]).collect();
        assert_eq!(labels, want);
        assert_eq!(m.kernel_rows, report.split.train.len());
        assert!(m.test_auc > 0.8, "{} test AUC {}", m.model, m.test_auc);
    }
}

#[test]
fn failing_stage_is_named_and_earlier_artifacts_persist() {
    let root = tempfile::tempdir().unwrap();
    let data = generate(SynthKind::Checkerboard { cells: 2 }, 80, 0).unwrap();
    let cfg = PipelineConfig {
        output_dir: root.path().to_path_buf(),
        models: vec![ModelKind::Linear, ModelKind::Hardware],
        ..Default::default()
    };
    let err = run_on_dataset(&cfg, &data, BTreeMap::new()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let Error::Stage { stage, .. } = &err else { panic!("{err}") };
    assert_eq!(stage, "hardware:kernel");
    let metrics = std::fs::read_to_string(root.path().join("metrics.json")).unwrap();
    assert!(metrics.contains("\"linear\""));
    assert!(root.path().join("svm_linear.qksv").exists());
    assert!(!root.path().join("manifest.json").exists());
}

#[test]
fn overrides_and_config_errors() {
    let cfg = PipelineConfig::from_toml_str(SMALL, &["svm.c=2.5".into(), "models=[\"rbf\"]".into()]).unwrap();
    assert_eq!(cfg.svm.c, 2.5);
    assert_eq!(cfg.models, vec![ModelKind::Rbf]);
    assert_eq!(cfg.ansatz.layers, 1);

    for bad in [
        vec!["svm.c=-1".to_string()],
        vec!["split.train=0.9".to_string()],
        vec!["svm.bogus=1".to_string()],
        vec!["models=[\"nope\"]".to_string()],
        vec!["no-equals-sign".to_string()],
    ] {
        let err = PipelineConfig::from_toml_str(SMALL, &bad).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{bad:?}: {err}");
    }
}

#[test]
fn missing_input_file_is_a_data_error() {
    let root = tempfile::tempdir().unwrap();
    let data = generate(SynthKind::Checkerboard { cells: 2 }, 40, 0).unwrap();
    write_inputs(root.path(), &data);
    std::fs::write(root.path().join("exp.toml"), SMALL).unwrap();
    std::fs::write(root.path().join("data.csv"), "x0,x1,label\n0.1,0.2,1\n0.3,,0\n").unwrap();
    let cfg = PipelineConfig::load(&root.path().join("exp.toml"), &[]).unwrap();
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert!(err.to_string().contains("load"));
}
