//! Gradient-descent training of the kernel's variational angles.
//!
//! The objective is `L(theta) = L_svm(K_theta) + (lambda/2) ||theta||^2`, where the inner SVM
//! is re-solved at every evaluation. Gradients hold the dual multipliers fixed at the inner
//! optimum and push parameter-shift kernel derivatives through the data term.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzConfig, AnsatzParams};
use crate::error::{Error, Result};
use crate::kernel::{gram_gradients, GramMatrix, Kernel, KernelMode, QuantumKernel};
use crate::svm::{class_counts, dual_objective, train_smo, SvmModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvmLossKind {
    /// Training-set hinge loss `sum_i max(0, 1 - y_i f(x_i))` of the re-solved SVM.
    Hinge,
    /// Optimal dual value `sum_i a_i - 1/2 a^T Q a`, i.e. the primal optimum
    /// `1/2 ||w||^2 + C sum_i xi_i`.
    #[default]
    DualObjective,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `eta_t = eta_0 / sqrt(t + 1)`.
    InverseSqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Base step size; `None` uses `1 / smoothness_bound`.
    pub learning_rate: Option<f64>,
    pub schedule: LrSchedule,
    pub iterations: usize,
    pub lambda: f64,
    pub svm_c: f64,
    /// Shots per shifted overlap; `None` for exact gradients.
    pub shots: Option<u64>,
    pub seed: u64,
    pub loss: SvmLossKind,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: None,
            schedule: LrSchedule::Constant,
            iterations: 50,
            lambda: 0.01,
            svm_c: 1.0,
            shots: None,
            seed: 0,
            loss: SvmLossKind::default(),
            svm_tol: 1e-8,
            svm_max_iter: 100_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be >= 0", self.lambda)));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C = {} must be > 0", self.svm_c)));
        }
        if let Some(eta) = self.learning_rate {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("learning rate {eta} must be >= 0")));
            }
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidParameter("shot count must be positive".into()));
        }
        Ok(())
    }

    fn kernel_mode(&self, iteration: usize) -> KernelMode {
        match self.shots {
            None => KernelMode::Exact,
            Some(shots) => KernelMode::Shots {
                shots,
                seed: crate::rng::task_seed(self.seed, &[iteration as u64]),
            },
        }
    }
}

/// `beta = 4 N C^2 + lambda`.
pub fn smoothness_bound(n: usize, c: f64, lambda: f64) -> f64 {
    4.0 * n as f64 * c * c + lambda
}

/// Loss value with the pieces it was assembled from.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub loss: f64,
    pub data_term: f64,
    pub regularizer: f64,
    pub gram: GramMatrix,
    pub model: SvmModel,
}

fn check_data(xs: &[Vec<f64>], labels: &[i8]) -> Result<()> {
    if xs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "training rows vs labels",
            expected: xs.len(),
            actual: labels.len(),
        });
    }
    class_counts(labels)?;
    Ok(())
}

fn margins(model: &SvmModel, k: &DMatrix<f64>) -> Vec<f64> {
    (0..model.n())
        .map(|i| {
            let f: f64 = model
                .support_indices
                .iter()
                .map(|&j| model.alpha[j] * f64::from(model.labels[j]) * k[(i, j)])
                .sum::<f64>()
                + model.bias;
            f64::from(model.labels[i]) * f
        })
        .collect()
}

/// Re-solves the inner SVM at `params` and evaluates the composite loss.
pub fn evaluate_loss(
    params: &AnsatzParams,
    config: &AnsatzConfig,
    xs: &[Vec<f64>],
    labels: &[i8],
    train: &TrainConfig,
) -> Result<LossEval> {
    check_data(xs, labels)?;
    let gram = QuantumKernel::new(config.clone(), params.clone())?.gram(xs)?;
    let model = train_smo(&gram, labels, train.svm_c, train.svm_tol, train.svm_max_iter)?;
    let data_term = match train.loss {
        SvmLossKind::Hinge => margins(&model, gram.matrix())
            .iter()
            .map(|m| (1.0 - m).max(0.0))
            .sum(),
        SvmLossKind::DualObjective => -dual_objective(&model.alpha, gram.matrix(), labels),
    };
    let regularizer = 0.5 * train.lambda * params.norm_sqr();
    Ok(LossEval {
        loss: data_term + regularizer,
        data_term,
        regularizer,
        gram,
        model,
    })
}

pub fn composite_loss(
    params: &AnsatzParams,
    config: &AnsatzConfig,
    xs: &[Vec<f64>],
    labels: &[i8],
    train: &TrainConfig,
) -> Result<f64> {
    Ok(evaluate_loss(params, config, xs, labels, train)?.loss)
}

/// Gradient of the data term for fixed multipliers, given `dK/dtheta_p` for every `p`.
fn data_gradient(
    model: &SvmModel,
    gram: &GramMatrix,
    dks: &[DMatrix<f64>],
    kind: SvmLossKind,
) -> Vec<f64> {
    let n = model.n();
    let ay: Vec<f64> = (0..n)
        .map(|i| model.alpha[i] * f64::from(model.labels[i]))
        .collect();
    match kind {
        SvmLossKind::DualObjective => dks
            .iter()
            .map(|dk| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += ay[i] * ay[j] * dk[(i, j)];
                    }
                }
                -0.5 * s
            })
            .collect(),
        SvmLossKind::Hinge => {
            let m = margins(model, gram.matrix());
            let active: Vec<usize> = (0..n).filter(|&i| m[i] < 1.0).collect();
            let free: Vec<usize> = (0..n).filter(|&i| model.is_free(i)).collect();
            dks.iter()
                .map(|dk| {
                    let df = |i: usize| (0..n).map(|j| ay[j] * dk[(i, j)]).sum::<f64>();
                    // bias tracks the free multipliers: b = mean_s (y_s - sum_j a_j y_j K_sj)
                    let db = if free.is_empty() {
                        0.0
                    } else {
                        -free.iter().map(|&s| df(s)).sum::<f64>() / free.len() as f64
                    };
                    active
                        .iter()
                        .map(|&i| -f64::from(model.labels[i]) * (df(i) + db))
                        .sum()
                })
                .collect()
        }
    }
}

/// Full gradient over the `2 n L` flat parameters (layout of [`AnsatzParams::to_flat`]).
///
/// In shot mode the multipliers still come from the exact kernel while every shifted
/// overlap is a shot estimate, so the gradient is an unbiased noisy copy of the exact one.
pub fn loss_gradient(
    params: &AnsatzParams,
    config: &AnsatzConfig,
    xs: &[Vec<f64>],
    labels: &[i8],
    train: &TrainConfig,
    mode: KernelMode,
) -> Result<(LossEval, Vec<f64>)> {
    let eval = evaluate_loss(params, config, xs, labels, train)?;
    let grad = gradient_at(&eval, params, config, xs, train, mode)?;
    Ok((eval, grad))
}

fn gradient_at(
    eval: &LossEval,
    params: &AnsatzParams,
    config: &AnsatzConfig,
    xs: &[Vec<f64>],
    train: &TrainConfig,
    mode: KernelMode,
) -> Result<Vec<f64>> {
    let flat = params.to_flat();
    let data = if eval.model.support_indices.is_empty() {
        vec![0.0; flat.len()]
    } else {
        let dks = gram_gradients(xs, params, config, mode)?;
        data_gradient(&eval.model, &eval.gram, &dks, train.loss)
    };
    Ok(data
        .iter()
        .zip(&flat)
        .map(|(g, t)| g + train.lambda * t)
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Loss at the parameters used in iteration `t`, before its update.
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Loss after the last update.
    pub final_loss: f64,
    pub final_params: Vec<f64>,
}

impl TrainTrace {
    pub fn best_loss(&self) -> f64 {
        self.losses
            .iter()
            .copied()
            .chain(std::iter::once(self.final_loss))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,grad_norm\n");
        for (t, (l, g)) in self.losses.iter().zip(&self.grad_norms).enumerate() {
            let _ = writeln!(out, "{t},{l},{g}");
        }
        out
    }
}

/// Runs `train.iterations` steps of `theta <- theta - eta_t g_t`.
pub fn optimize(
    params0: &AnsatzParams,
    config: &AnsatzConfig,
    xs: &[Vec<f64>],
    labels: &[i8],
    train: &TrainConfig,
) -> Result<(AnsatzParams, TrainTrace)> {
    train.validate()?;
    check_data(xs, labels)?;
    params0.check(config)?;
    let beta = smoothness_bound(xs.len(), train.svm_c, train.lambda);
    let eta0 = train.learning_rate.unwrap_or(1.0 / beta);
    if train.schedule == LrSchedule::Constant && eta0 > 1.0 / beta {
        log::warn!("learning rate {eta0} exceeds 1/beta = {}", 1.0 / beta);
    }

    let mut params = params0.clone();
    let mut trace = TrainTrace::default();
    for t in 0..train.iterations {
        let eval = evaluate_loss(&params, config, xs, labels, train)?;
        if !eval.loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss at iteration {t}; losses so far: {:?}",
                trace.losses
            )));
        }
        let grad = gradient_at(&eval, &params, config, xs, train, train.kernel_mode(t))?;
        let eta = match train.schedule {
            LrSchedule::Constant => eta0,
            LrSchedule::InverseSqrt => eta0 / ((t + 1) as f64).sqrt(),
        };
        trace.losses.push(eval.loss);
        trace.grad_norms.push(grad.iter().map(|g| g * g).sum::<f64>().sqrt());
        trace.learning_rates.push(eta);
        if eta != 0.0 {
            let flat: Vec<f64> = params
                .to_flat()
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - eta * g)
                .collect();
            params = AnsatzParams::from_flat(config, &flat)?;
        }
    }
    trace.final_loss = composite_loss(&params, config, xs, labels, train)?;
    if !trace.final_loss.is_finite() {
        return Err(Error::Numerical("non-finite loss after the last update".into()));
    }
    trace.final_params = params.to_flat();
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::PI;

    fn instance(n_points: usize, n_qubits: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut rng = rng_from_seed(seed);
        let xs: Vec<Vec<f64>> = (0..n_points)
            .map(|_| (0..n_qubits).map(|_| rng.random_range(0.0..PI)).collect())
            .collect();
        let ys = (0..n_points).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        (xs, ys)
    }

    #[test]
    fn smoothness_examples() {
        assert!((smoothness_bound(100, 1.0, 0.01) - 400.01).abs() < 1e-12);
        assert_eq!(smoothness_bound(1, 0.5, 0.0), 1.0);
        assert!(smoothness_bound(2, 1.0, 0.0) > smoothness_bound(1, 1.0, 0.0));
        assert!(smoothness_bound(1, 2.0, 0.0) > smoothness_bound(1, 1.0, 0.0));
        assert!(smoothness_bound(1, 1.0, 0.5) > smoothness_bound(1, 1.0, 0.0));
    }

    #[test]
    fn regularizer_is_additive() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, 0.5, 1);
        let (xs, ys) = instance(6, 2, 2);
        for kind in [SvmLossKind::Hinge, SvmLossKind::DualObjective] {
            let base = TrainConfig { lambda: 0.0, loss: kind, ..Default::default() };
            let reg = TrainConfig { lambda: 0.3, ..base.clone() };
            let a = composite_loss(&params, &config, &xs, &ys, &base).unwrap();
            let b = composite_loss(&params, &config, &xs, &ys, &reg).unwrap();
            assert!((a + 0.15 * params.norm_sqr() - b).abs() < 1e-12);
            let zero = AnsatzParams::zeros(&config);
            let e = evaluate_loss(&zero, &config, &xs, &ys, &reg).unwrap();
            assert_eq!(e.regularizer, 0.0);
        }
    }

    #[test]
    fn separated_data_has_zero_hinge() {
        // two orthogonal encoded states, one per class
        let config = AnsatzConfig::new(1, 1).unwrap().with_hadamard_init(false);
        let params = AnsatzParams::zeros(&config);
        let xs = vec![vec![0.0], vec![PI]];
        let train = TrainConfig { lambda: 0.0, svm_c: 10.0, loss: SvmLossKind::Hinge, ..Default::default() };
        assert!(composite_loss(&params, &config, &xs, &[1, -1], &train).unwrap().abs() < 1e-9);
    }

    #[test]
    fn regularizer_only_gradient_when_no_support_vectors() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, 1.0, 5);
        let (xs, ys) = instance(4, 2, 1);
        let train = TrainConfig { lambda: 0.7, ..Default::default() };
        let mut eval = evaluate_loss(&params, &config, &xs, &ys, &train).unwrap();
        eval.model.alpha.iter_mut().for_each(|a| *a = 0.0);
        eval.model.support_indices.clear();
        let g = gradient_at(&eval, &params, &config, &xs, &train, KernelMode::Exact).unwrap();
        for (gi, t) in g.iter().zip(params.to_flat()) {
            assert!((gi - 0.7 * t).abs() < 1e-15);
        }
    }

    fn finite_difference(
        params: &AnsatzParams,
        config: &AnsatzConfig,
        xs: &[Vec<f64>],
        ys: &[i8],
        train: &TrainConfig,
    ) -> Vec<f64> {
        let h = 1e-5;
        let flat = params.to_flat();
        (0..flat.len())
            .map(|p| {
                let mut up = flat.clone();
                let mut down = flat.clone();
                up[p] += h;
                down[p] -= h;
                let lu = composite_loss(&AnsatzParams::from_flat(config, &up).unwrap(), config, xs, ys, train).unwrap();
                let ld = composite_loss(&AnsatzParams::from_flat(config, &down).unwrap(), config, xs, ys, train).unwrap();
                (lu - ld) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_difference_single_layer() {
        let config = AnsatzConfig::new(2, 1).unwrap();
        for seed in 0..5 {
            let params = AnsatzParams::random_uniform(&config, PI, seed);
            let (xs, ys) = instance(4, 2, seed + 10);
            for kind in [SvmLossKind::Hinge, SvmLossKind::DualObjective] {
                let train = TrainConfig { lambda: 0.1, loss: kind, ..Default::default() };
                let (_, g) = loss_gradient(&params, &config, &xs, &ys, &train, KernelMode::Exact).unwrap();
                let fd = finite_difference(&params, &config, &xs, &ys, &train);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() < 1e-4, "{kind:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn dual_objective_gradient_matches_finite_difference_deeper() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        for seed in 0..5 {
            let params = AnsatzParams::random_uniform(&config, PI, seed);
            let (xs, ys) = instance(4, 2, seed + 20);
            let train = TrainConfig { lambda: 0.1, ..Default::default() };
            let (_, g) = loss_gradient(&params, &config, &xs, &ys, &train, KernelMode::Exact).unwrap();
            let fd = finite_difference(&params, &config, &xs, &ys, &train);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-4, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_step_leaves_everything_fixed() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::default_init(&config, 3);
        let (xs, ys) = instance(6, 2, 3);
        let train = TrainConfig { learning_rate: Some(0.0), iterations: 4, ..Default::default() };
        let (out, trace) = optimize(&params, &config, &xs, &ys, &train).unwrap();
        assert_eq!(out, params);
        assert_eq!(trace.losses.len(), 4);
        assert!(trace.losses.iter().all(|&l| l == trace.losses[0]));
        assert_eq!(trace.final_loss, trace.losses[0]);
    }

    #[test]
    fn shot_training_is_reproducible() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::default_init(&config, 3);
        let (xs, ys) = instance(6, 2, 4);
        let train = TrainConfig { iterations: 3, shots: Some(200), seed: 9, ..Default::default() };
        let a = optimize(&params, &config, &xs, &ys, &train).unwrap();
        let b = optimize(&params, &config, &xs, &ys, &train).unwrap();
        assert_eq!(a, b);
        let other = TrainConfig { seed: 10, ..train };
        assert_ne!(a.1.grad_norms, optimize(&params, &config, &xs, &ys, &other).unwrap().1.grad_norms);
    }

    #[test]
    fn schedule_and_trace_csv() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::default_init(&config, 3);
        let (xs, ys) = instance(4, 2, 6);
        let train = TrainConfig {
            learning_rate: Some(0.2),
            schedule: LrSchedule::InverseSqrt,
            iterations: 4,
            ..Default::default()
        };
        let (_, trace) = optimize(&params, &config, &xs, &ys, &train).unwrap();
        assert!((trace.learning_rates[3] - 0.1).abs() < 1e-15);
        let csv = trace.to_csv();
        assert!(csv.starts_with("iteration,loss,grad_norm\n0,"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn rejects_bad_configs() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::default_init(&config, 3);
        let (xs, ys) = instance(4, 2, 6);
        for bad in [
            TrainConfig { iterations: 0, ..Default::default() },
            TrainConfig { lambda: -1.0, ..Default::default() },
            TrainConfig { svm_c: 0.0, ..Default::default() },
            TrainConfig { shots: Some(0), ..Default::default() },
        ] {
            assert!(optimize(&params, &config, &xs, &ys, &bad).is_err());
        }
        assert!(optimize(&params, &config, &xs, &[1, 1, 1, 1], &TrainConfig::default()).is_err());
    }
}
