use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qkernel::ansatz::{AnsatzParams, EntanglePattern};
use qkernel::classical::{LinearKernel, PolynomialKernel, RbfKernel};
use qkernel::io;
use qkernel::kernel::{Kernel, KernelMode, QuantumKernel};
use qkernel::metrics::{
    classification_report, normalize_scores, roc_curve, score_range, select_threshold, ThresholdPolicy,
};
use qkernel::pipeline::config::AnsatzSection;
use qkernel::pipeline::run::{fit_width, read_scores_csv, render_report, resolve_ansatz, scores_csv};
use qkernel::pipeline::synth::{generate, SynthKind};
use qkernel::pipeline::{
    load_csv, read_encoded, run_experiment, stratified_split, write_csv, write_encoded, DatasetSpec, EncodedTable,
    PipelineConfig, Preprocessor, SplitIndices, SplitProportions,
};
use qkernel::svm::{decision_values, kernel_fingerprint, train_smo};
use qkernel::{Error, Result};

#[derive(Parser)]
#[command(name = "qkernel", version, about = "Quantum-kernel classification toolkit")]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its column spec.
    Synth(SynthArgs),
    /// Stratified train/validation/test split of a dataset.
    Split(SplitArgs),
    /// Fit preprocessing on the train split and write encoded angles for every row.
    Preprocess(PreprocessArgs),
    /// Compute and dump a Gram matrix over one split of an encoded table.
    Kernel(KernelArgs),
    /// Train an SVM on the train split.
    Train(TrainArgs),
    /// Score a trained SVM on a split and print the classification report.
    Evaluate(EvaluateArgs),
    /// ROC curve, AUC and an operating point from a scores CSV.
    Roc(RocArgs),
    /// Run the full pipeline from a TOML config.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthChoice {
    TwoGaussians,
    Checkerboard,
    Mixed,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthChoice,
    #[arg(long, default_value_t = 400)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long, default_value_t = 2)]
    cells: usize,
    #[arg(long, default_value_t = 0.4)]
    positive_fraction: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    spec_out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.70)]
    train: f64,
    #[arg(long, default_value_t = 0.15)]
    validation: f64,
    #[arg(long, default_value_t = 0.15)]
    test: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Split file from `qkernel split`; without it the transform is fitted on all rows.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Where to save the fitted transform as JSON.
    #[arg(long)]
    transform_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KernelChoice {
    Linear,
    Rbf,
    Polynomial,
    Quantum,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntangleChoice {
    LinearChain,
    Ring,
}

#[derive(Args)]
struct KernelOpts {
    #[arg(long, value_enum, default_value = "quantum")]
    kernel: KernelChoice,
    /// Qubit count; defaults to the feature count capped at --max-qubits.
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long, default_value_t = 8)]
    max_qubits: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, value_enum, default_value = "linear-chain")]
    entangle: EntangleChoice,
    #[arg(long)]
    no_hadamard: bool,
    /// Seed for the initial variational parameters.
    #[arg(long, default_value_t = 0)]
    param_seed: u64,
    /// Parameters as a JSON array in flat layout (overrides --param-seed).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Estimate overlaps from this many shots instead of exact amplitudes.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    shot_seed: u64,
    /// RBF gamma; defaults to 1/d.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 3)]
    degree: u32,
    #[arg(long, default_value_t = 1.0)]
    coef: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    angles: PathBuf,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    part: Part,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long)]
    out: PathBuf,
    /// Also write the matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    angles: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = qkernel::svm::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = qkernel::svm::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write a readable dump of the model.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    angles: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, value_enum, default_value = "test")]
    part: Part,
    /// Threshold on decision values min-max normalized over the validation split.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    scores_out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyChoice {
    RecallFirst,
    PrecisionFirst,
    Youden,
}

#[derive(Args)]
struct RocArgs {
    /// CSV with `score` and `label` (+1/-1) columns.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_enum, default_value = "youden")]
    policy: PolicyChoice,
    /// Recall or precision floor for the constrained policies.
    #[arg(long, default_value_t = 0.8)]
    floor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set svm.c=2.0` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{what} {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, body + "\n")?;
    Ok(())
}

fn load_table(path: &Path) -> Result<EncodedTable> {
    read_encoded(File::open(path)?)
}

fn part_rows(table: &EncodedTable, split: Option<&SplitIndices>, part: Part) -> Result<(Vec<Vec<f64>>, Vec<i8>)> {
    match (part, split) {
        (Part::All, _) => Ok((table.angles.clone(), table.labels.clone())),
        (_, None) => Err(Error::Config("--split is required unless --part all".into())),
        (Part::Train, Some(s)) => table.select(&s.train),
        (Part::Validation, Some(s)) => table.select(&s.validation),
        (Part::Test, Some(s)) => table.select(&s.test),
    }
}

/// Kernel from the command-line options, plus the row width it expects.
fn build_kernel(opts: &KernelOpts, d: usize) -> Result<(Box<dyn Kernel>, usize)> {
    Ok(match opts.kernel {
        KernelChoice::Linear => (Box::new(LinearKernel), d),
        KernelChoice::Rbf => (
            Box::new(match opts.gamma {
                Some(g) => RbfKernel::new(g)?,
                None => RbfKernel::for_dim(d)?,
            }),
            d,
        ),
        KernelChoice::Polynomial => (Box::new(PolynomialKernel::new(opts.degree, opts.coef)?), d),
        KernelChoice::Quantum => {
            let section = AnsatzSection {
                n_qubits: opts.qubits,
                max_qubits: opts.max_qubits,
                layers: opts.layers,
                entangle: match opts.entangle {
                    EntangleChoice::LinearChain => EntanglePattern::LinearChain,
                    EntangleChoice::Ring => EntanglePattern::Ring,
                },
                hadamard_init: !opts.no_hadamard,
            };
            let cfg = resolve_ansatz(&section, d)?;
            let params = match &opts.params {
                Some(p) => AnsatzParams::from_flat(&cfg, &read_json::<Vec<f64>>(p, "parameter file")?)?,
                None => AnsatzParams::default_init(&cfg, opts.param_seed),
            };
            let mode = match opts.shots {
                Some(shots) => KernelMode::Shots { shots, seed: opts.shot_seed },
                None => KernelMode::Exact,
            };
            let width = cfg.n_qubits.max(d);
            (Box::new(QuantumKernel::new(cfg, params)?.with_mode(mode)), width)
        }
    })
}

fn widen(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    fit_width(&rows, width)
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind = match a.kind {
        SynthChoice::TwoGaussians => SynthKind::TwoGaussians {
            dim: a.dim,
            separation: a.separation,
            positive_fraction: a.positive_fraction,
        },
        SynthChoice::Checkerboard => SynthKind::Checkerboard { cells: a.cells },
        SynthChoice::Mixed => SynthKind::Mixed {
            positive_fraction: a.positive_fraction,
        },
    };
    let data = generate(kind, a.rows, a.seed)?;
    write_csv(create(&a.out)?, &data)?;
    std::fs::write(&a.spec_out, data.spec.to_toml())?;
    println!("wrote {} rows to {}", data.len(), a.out.display());
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let spec = DatasetSpec::load(&a.data.spec)?;
    let data = load_csv(&a.data.data, &spec)?;
    let props = SplitProportions {
        train: a.train,
        validation: a.validation,
        test: a.test,
    };
    let s = stratified_split(&data.labels, props, a.seed)?;
    write_json(&a.out, &s)?;
    println!(
        "train {} / validation {} / test {}",
        s.train.len(),
        s.validation.len(),
        s.test.len()
    );
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let spec = DatasetSpec::load(&a.data.spec)?;
    let data = load_csv(&a.data.data, &spec)?;
    let fit_rows = match &a.split {
        Some(p) => read_json::<SplitIndices>(p, "split file")?.train,
        None => (0..data.len()).collect(),
    };
    let pre = Preprocessor::fit(&data, &fit_rows)?;
    let angles = pre.transform(&data)?;
    write_encoded(create(&a.out)?, &pre.feature_names(), &angles, &data.labels)?;
    if let Some(p) = &a.transform_out {
        write_json(p, &pre)?;
    }
    for w in &pre.warnings {
        eprintln!("warning: {w}");
    }
    println!("encoded {} rows into {} features", angles.len(), pre.dim());
    Ok(())
}

fn kernel(a: KernelArgs) -> Result<()> {
    let table = load_table(&a.angles)?;
    let split = a.split.as_deref().map(|p| read_json::<SplitIndices>(p, "split file")).transpose()?;
    let (xs, _) = part_rows(&table, split.as_ref(), a.part)?;
    let (k, width) = build_kernel(&a.kernel, xs[0].len())?;
    let gram = k.gram(&widen(xs, width))?;
    io::save_gram(&a.out, &gram)?;
    if let Some(p) = &a.csv {
        std::fs::write(p, io::matrix_to_csv(gram.matrix()))?;
    }
    let check = gram.check();
    println!(
        "{}: {} x {} Gram, min eigenvalue {:.3e}, max asymmetry {:.1e}",
        k.name(),
        gram.n(),
        gram.n(),
        check.min_eigenvalue,
        check.max_asymmetry
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let table = load_table(&a.angles)?;
    let split: SplitIndices = read_json(&a.split, "split file")?;
    let (xs, ys) = table.select(&split.train)?;
    let (k, width) = build_kernel(&a.kernel, xs[0].len())?;
    let gram = k.gram(&widen(xs, width))?;
    let model = train_smo(&gram, &ys, a.c, a.tol, a.max_iter)?;
    io::save_svm(&a.out, &model)?;
    if let Some(p) = &a.text {
        std::fs::write(p, model.to_text())?;
    }
    println!(
        "{}: {} support vectors of {}, bias {:.6}, {} iterations{}",
        k.name(),
        model.support_indices.len(),
        model.n(),
        model.bias,
        model.iterations,
        if model.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let table = load_table(&a.angles)?;
    let split: SplitIndices = read_json(&a.split, "split file")?;
    let model = io::load_svm(&a.model)?;
    let (train_x, train_y) = table.select(&split.train)?;
    let (k, width) = build_kernel(&a.kernel, train_x[0].len())?;
    let train_x = widen(train_x, width);
    if kernel_fingerprint(k.gram(&train_x)?.matrix(), &train_y) != model.fingerprint {
        return Err(Error::Data(
            "model fingerprint does not match the training kernel; use the kernel options it was trained with".into(),
        ));
    }
    let (val_x, _) = table.select(&split.validation)?;
    let (lo, hi) = score_range(&decision_values(&model, &k.cross(&widen(val_x, width), &train_x)?)?);
    let (xs, ys) = part_rows(&table, Some(&split), a.part)?;
    let rows: Vec<usize> = match a.part {
        Part::Train => split.train.clone(),
        Part::Validation => split.validation.clone(),
        Part::Test => split.test.clone(),
        Part::All => table.rows.clone(),
    };
    let scores = decision_values(&model, &k.cross(&widen(xs, width), &train_x)?)?;
    let report = classification_report(&normalize_scores(&scores, lo, hi), &ys, a.threshold)?;
    print!("{}", report.render());
    if let Ok(curve) = roc_curve(&scores, &ys) {
        println!("AUC {:.4}", curve.auc);
    }
    if let Some(p) = &a.scores_out {
        std::fs::write(p, scores_csv(&rows, &scores, &ys))?;
    }
    if let Some(p) = &a.json {
        std::fs::write(p, report.to_json())?;
    }
    Ok(())
}

fn roc(a: RocArgs) -> Result<()> {
    let (scores, labels) = read_scores_csv(File::open(&a.scores)?)?;
    let curve = roc_curve(&scores, &labels)?;
    if let Some(p) = &a.out {
        std::fs::write(p, curve.to_csv())?;
    }
    let policy = match a.policy {
        PolicyChoice::RecallFirst => ThresholdPolicy::RecallFirst { min_recall: a.floor },
        PolicyChoice::PrecisionFirst => ThresholdPolicy::PrecisionFirst { min_precision: a.floor },
        PolicyChoice::Youden => ThresholdPolicy::Youden,
    };
    println!("AUC {:.4} over {} points", curve.auc, curve.points.len());
    let op = select_threshold(&curve, &scores, &labels, policy)?;
    println!(
        "threshold {:.6}: precision {:.4}, recall {:.4}, FPR {:.4}",
        op.threshold, op.precision, op.recall, op.fpr
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config, &a.overrides)?;
    let report = run_experiment(&cfg)?;
    print!("{}", render_report(&report.metrics));
    println!("\nartifacts in {}", report.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Split(a) => split(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Kernel(a) => kernel(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Roc(a) => roc(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string();
            eprintln!("error: {message}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !message.contains(&text) {
                    eprintln!("  caused by: {text}");
                }
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
