//! Soft-margin SVM dual on a precomputed kernel.
//!
//! Both solvers work on the minimization form
//! `min_a 1/2 sum_ij a_i a_j y_i y_j K_ij - sum_i a_i` subject to `sum_i a_i y_i = 0` and
//! `0 <= a_i <= C`. [`train_smo`] is the production path; [`solve_dual_reference`] is an
//! independent projected-gradient solver kept as a test oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, PSD_TOL};

/// Multipliers above this are support vectors.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000;

const TAU: f64 = 1e-12;

/// Counts `(negatives, positives)`; rejects labels other than +/-1 and single-class input.
pub fn class_counts(labels: &[i8]) -> Result<(usize, usize)> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let mut neg = 0;
    let mut pos = 0;
    for &y in labels {
        match y {
            1 => pos += 1,
            -1 => neg += 1,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "label {other} is not +1 or -1"
                )))
            }
        }
    }
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass("SVM training"));
    }
    Ok((neg, pos))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub labels: Vec<i8>,
    pub support_indices: Vec<usize>,
    pub c: f64,
    /// Hex SHA-256 of the training kernel and labels.
    pub fingerprint: String,
    /// Diagonal shift applied to repair a non-PSD training kernel (0 if none).
    pub jitter: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    pub fn equality_residual(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.labels)
            .map(|(a, &y)| a * f64::from(y))
            .sum()
    }

    /// Human-readable dump.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "svm-model v1\nn = {}\nC = {}\nbias = {:.17e}\njitter = {:e}\nfingerprint = {}\nsupport_vectors = {}\n",
            self.n(),
            self.c,
            self.bias,
            self.jitter,
            self.fingerprint,
            self.support_indices.len()
        );
        out.push_str("index\tlabel\talpha\n");
        for (i, (a, y)) in self.alpha.iter().zip(&self.labels).enumerate() {
            out.push_str(&format!("{i}\t{y:+}\t{a:.17e}\n"));
        }
        out
    }
}

pub fn kernel_fingerprint(k: &DMatrix<f64>, labels: &[i8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((k.nrows() as u64).to_le_bytes());
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            hasher.update(k[(i, j)].to_le_bytes());
        }
    }
    for &y in labels {
        hasher.update([y as u8]);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn check_problem(k: &GramMatrix, labels: &[i8], c: f64) -> Result<()> {
    if k.n() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel vs labels",
            expected: k.n(),
            actual: labels.len(),
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("box constant C = {c} must be positive")));
    }
    class_counts(labels)?;
    Ok(())
}

/// Returns the kernel actually optimized and the jitter added to reach PSD.
fn repaired(k: &GramMatrix) -> (DMatrix<f64>, f64) {
    let min_eig = k.min_eigenvalue();
    if min_eig < -PSD_TOL {
        let jitter = -min_eig + 1e-10;
        log::warn!("kernel min eigenvalue {min_eig:e} below -{PSD_TOL:e}; adding jitter {jitter:e}");
        (k.with_jitter(jitter).into_inner(), jitter)
    } else {
        (k.matrix().clone(), 0.0)
    }
}

fn signed_kernel(k: &DMatrix<f64>, labels: &[i8]) -> DMatrix<f64> {
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        f64::from(labels[i]) * f64::from(labels[j]) * k[(i, j)]
    })
}

/// `1/2 a^T Q a - sum(a)` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(alpha: &[f64], k: &DMatrix<f64>, labels: &[i8]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += alpha[j] * f64::from(labels[j]) * k[(i, j)];
        }
        quad += alpha[i] * f64::from(labels[i]) * row;
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Bias from the dual gradient `G = Q a - 1`: mean of `-y_i G_i` over free multipliers,
/// or the midpoint of the KKT-feasible interval when none are free. Multipliers within
/// `1e-12 max(C, 1)` of a bound count as at the bound.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], labels: &[i8], c: f64) -> f64 {
    let eps = 1e-12 * c.max(1.0);
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for i in 0..alpha.len() {
        let y = f64::from(labels[i]);
        let yg = y * grad[i];
        if alpha[i] >= c - eps {
            if labels[i] == -1 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[i] <= eps {
            if labels[i] == 1 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    -rho
}

fn finish(
    alpha: Vec<f64>,
    grad: &[f64],
    k: &GramMatrix,
    labels: &[i8],
    c: f64,
    jitter: f64,
    iterations: usize,
    converged: bool,
) -> SvmModel {
    let bias = bias_from_gradient(&alpha, grad, labels, c);
    let support_indices = alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > SUPPORT_THRESHOLD)
        .map(|(i, _)| i)
        .collect();
    SvmModel {
        fingerprint: kernel_fingerprint(k.matrix(), labels),
        alpha,
        bias,
        labels: labels.to_vec(),
        support_indices,
        c,
        jitter,
        iterations,
        converged,
    }
}

/// Sequential minimal optimization with maximal-violating-pair working-set selection.
///
/// Stops when `max_{I_up} -y_t G_t - min_{I_low} -y_t G_t <= tol` or after `max_iter`
/// pair updates.
pub fn train_smo(
    k: &GramMatrix,
    labels: &[i8],
    c: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SvmModel> {
    check_problem(k, labels, c)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let (kmat, jitter) = repaired(k);
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * kmat[(i, j)];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let mut i_sel = usize::MAX;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > gmax {
                gmax = v;
                i_sel = t;
            }
            if in_low && v < gmin {
                gmin = v;
                j_sel = t;
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin <= tol {
            converged = true;
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
        iterations += 1;
    }
    if !converged {
        log::warn!("SMO stopped after {max_iter} iterations without reaching tol {tol:e}");
    }
    Ok(finish(alpha, &grad, k, labels, c, jitter, iterations, converged))
}

/// Euclidean projection onto `{0 <= a <= C, y^T a = 0}`.
///
/// The projection is `clip(v - nu y, 0, C)` for the root `nu` of the non-increasing
/// piecewise-linear `h(nu) = sum_i y_i clip(v_i - nu y_i)`; bisection brackets the root
/// and a final solve on the free set makes it exact.
pub fn project_feasible(v: &[f64], labels: &[i8], c: f64) -> Vec<f64> {
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let at = |nu: f64| -> Vec<f64> {
        v.iter()
            .zip(&y)
            .map(|(vi, yi)| (vi - nu * yi).clamp(0.0, c))
            .collect()
    };
    let h = |nu: f64| -> f64 { at(nu).iter().zip(&y).map(|(a, yi)| a * yi).sum() };
    let spread = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-spread, spread);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * spread {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    // exact solve on the free set at this nu
    let mut fixed = 0.0;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for (vi, yi) in v.iter().zip(&y) {
        let u = vi - nu * yi;
        if u > 0.0 && u < c {
            free += 1;
            free_sum += yi * vi;
        } else {
            fixed += yi * u.clamp(0.0, c);
        }
    }
    if free > 0 {
        let exact = (fixed + free_sum) / free as f64;
        let same_partition = v.iter().zip(&y).all(|(vi, yi)| {
            let (a, b) = (vi - nu * yi, vi - exact * yi);
            let class = |u: f64| if u <= 0.0 { 0 } else if u >= c { 2 } else { 1 };
            class(a) == class(b)
        });
        if same_partition {
            return at(exact);
        }
    }
    at(nu)
}

/// Projected-gradient ascent on the dual with step `1 / lambda_max(Q)`.
pub fn solve_dual_reference(
    k: &GramMatrix,
    labels: &[i8],
    c: f64,
    iterations: usize,
) -> Result<SvmModel> {
    let trace = reference_trace(k, labels, c, iterations, false)?;
    Ok(trace.0)
}

/// Reference solve that also records the dual objective (minimization form) after every
/// iteration when `record` is set.
pub fn reference_trace(
    k: &GramMatrix,
    labels: &[i8],
    c: f64,
    iterations: usize,
    record: bool,
) -> Result<(SvmModel, Vec<f64>)> {
    check_problem(k, labels, c)?;
    let (kmat, jitter) = repaired(k);
    let q = signed_kernel(&kmat, labels);
    let lmax = SymmetricEigen::new(q.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(v));
    let step = if lmax > 0.0 { 1.0 / lmax } else { 1.0 };
    let n = labels.len();
    let mut alpha = DVector::<f64>::zeros(n);
    let mut objectives = Vec::new();
    let mut done = 0;
    for it in 0..iterations {
        let grad = &q * &alpha - DVector::from_element(n, 1.0);
        let v: Vec<f64> = (0..n).map(|i| alpha[i] - step * grad[i]).collect();
        let next = DVector::from_vec(project_feasible(&v, labels, c));
        let moved = (&next - &alpha).amax();
        alpha = next;
        done = it + 1;
        if record {
            objectives.push(dual_objective(alpha.as_slice(), &kmat, labels));
        }
        if moved < 1e-15 {
            break;
        }
    }
    let grad = &q * &alpha - DVector::from_element(n, 1.0);
    let model = finish(
        alpha.as_slice().to_vec(),
        grad.as_slice(),
        k,
        labels,
        c,
        jitter,
        done,
        true,
    );
    Ok((model, objectives))
}

/// `sum_i a_i y_i k_row_i + b`.
pub fn decision_value(model: &SvmModel, k_row: &[f64]) -> Result<f64> {
    if k_row.len() != model.n() {
        return Err(Error::DimensionMismatch {
            context: "kernel row vs training set",
            expected: model.n(),
            actual: k_row.len(),
        });
    }
    Ok(model
        .support_indices
        .iter()
        .map(|&i| model.alpha[i] * f64::from(model.labels[i]) * k_row[i])
        .sum::<f64>()
        + model.bias)
}

/// Sign of the decision value; exactly 0 maps to +1.
pub fn predict(model: &SvmModel, k_row: &[f64]) -> Result<i8> {
    Ok(label_of(decision_value(model, k_row)?))
}

pub fn label_of(decision: f64) -> i8 {
    if decision >= 0.0 {
        1
    } else {
        -1
    }
}

/// Decision values for every row of a `test x train` kernel block.
pub fn decision_values(model: &SvmModel, cross: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..cross.nrows())
        .map(|r| {
            let row: Vec<f64> = cross.row(r).iter().copied().collect();
            decision_value(model, &row)
        })
        .collect()
}

/// Largest KKT violation on the training set, measured on margins `y_i f(x_i)`.
pub fn kkt_violation(model: &SvmModel, k: &GramMatrix) -> Result<f64> {
    let kmat = k.with_jitter(model.jitter);
    let mut worst = 0.0f64;
    for i in 0..model.n() {
        let row: Vec<f64> = kmat.matrix().column(i).iter().copied().collect();
        let margin = f64::from(model.labels[i]) * decision_value(model, &row)?;
        let a = model.alpha[i];
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Sum of hinge losses `max(0, 1 - y_i f(x_i))` over the training set.
pub fn training_hinge_loss(model: &SvmModel, k: &GramMatrix) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..model.n() {
        let row: Vec<f64> = k.matrix().column(i).iter().copied().collect();
        let margin = f64::from(model.labels[i]) * decision_value(model, &row)?;
        total += (1.0 - margin).max(0.0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn gram(m: DMatrix<f64>) -> GramMatrix {
        GramMatrix::new(m).unwrap()
    }

    fn random_psd(n: usize, seed: u64) -> GramMatrix {
        let mut rng = rng_from_seed(seed);
        let d = rng.random_range(1..=n + 2);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
        let k = &x * x.transpose();
        gram(DMatrix::from_fn(n, n, |i, j| 0.5 * (k[(i, j)] + k[(j, i)])))
    }

    fn random_labels(n: usize, seed: u64) -> Vec<i8> {
        let mut rng = rng_from_seed(seed ^ 0xABCD);
        let mut y: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        y[0] = 1;
        y[1] = -1;
        y
    }

    #[test]
    fn two_point_identity() {
        let k = gram(DMatrix::identity(2, 2));
        let y = [1, -1];
        let m = train_smo(&k, &y, 10.0, 1e-6, 1000).unwrap();
        assert!((m.alpha[0] - 1.0).abs() < 1e-12 && (m.alpha[1] - 1.0).abs() < 1e-12);
        assert!(m.bias.abs() < 1e-12);
        let r = solve_dual_reference(&k, &y, 10.0, 10_000).unwrap();
        assert!((r.alpha[0] - 1.0).abs() < 1e-9 && (r.alpha[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_problems() {
        let k = gram(DMatrix::identity(3, 3));
        assert!(matches!(train_smo(&k, &[1, 1, 1], 1.0, 1e-3, 10), Err(Error::SingleClass(_))));
        assert!(train_smo(&k, &[1, -1], 1.0, 1e-3, 10).is_err());
        assert!(train_smo(&k, &[1, -1, 2], 1.0, 1e-3, 10).is_err());
        assert!(train_smo(&k, &[1, -1, 1], 0.0, 1e-3, 10).is_err());
        assert!(solve_dual_reference(&k, &[-1, -1, -1], 1.0, 10).is_err());
    }

    #[test]
    fn non_psd_kernel_gets_jitter() {
        let k = gram(DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]));
        assert!(k.min_eigenvalue() < -PSD_TOL);
        let m = train_smo(&k, &[1, -1, 1], 1.0, 1e-6, 10_000).unwrap();
        assert!(m.jitter > 0.0);
        assert!(k.with_jitter(m.jitter).min_eigenvalue() >= -PSD_TOL);
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            let n = rng.random_range(2..12);
            let y = random_labels(n, rng.random());
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let c = rng.random_range(0.1..2.0);
            let p = project_feasible(&v, &y, c);
            let eq: f64 = p.iter().zip(&y).map(|(a, &l)| a * f64::from(l)).sum();
            assert!(eq.abs() <= 1e-10, "{eq}");
            assert!(p.iter().all(|&a| (0.0..=c).contains(&a)));
            let again = project_feasible(&p, &y, c);
            for (a, b) in p.iter().zip(&again) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reference_iterates_ascend() {
        let k = random_psd(8, 3);
        let y = random_labels(8, 3);
        let (model, objectives) = reference_trace(&k, &y, 1.0, 500, true).unwrap();
        for w in objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        assert!(model.equality_residual().abs() <= 1e-10);
    }

    #[test]
    fn smo_matches_reference_on_random_instances() {
        for seed in 0..30 {
            let k = random_psd(8, seed);
            let y = random_labels(8, seed);
            let smo = train_smo(&k, &y, 1.0, 1e-6, 100_000).unwrap();
            let reference = solve_dual_reference(&k, &y, 1.0, 200_000).unwrap();
            let a = dual_objective(&smo.alpha, k.matrix(), &y);
            let b = dual_objective(&reference.alpha, k.matrix(), &y);
            assert!((a - b).abs() <= 1e-4, "seed {seed}: {a} vs {b}");
            assert!(smo.equality_residual().abs() <= 1e-8);
            assert!(smo.alpha.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn kkt_holds_after_training() {
        for seed in 0..20 {
            let k = random_psd(10, seed + 100);
            let y = random_labels(10, seed + 100);
            let m = train_smo(&k, &y, 2.0, 1e-3, DEFAULT_MAX_ITER).unwrap();
            assert!(m.converged);
            assert!(kkt_violation(&m, &k).unwrap() <= 1e-3);
            let expected: Vec<usize> = (0..10).filter(|&i| m.alpha[i] > SUPPORT_THRESHOLD).collect();
            assert_eq!(m.support_indices, expected);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let k = random_psd(9, 7);
        let y = random_labels(9, 7);
        assert_eq!(
            train_smo(&k, &y, 1.0, 1e-3, 1000).unwrap(),
            train_smo(&k, &y, 1.0, 1e-3, 1000).unwrap()
        );
    }

    fn toy_model(alpha: Vec<f64>, bias: f64) -> SvmModel {
        let n = alpha.len();
        SvmModel {
            support_indices: (0..n).filter(|&i| alpha[i] > SUPPORT_THRESHOLD).collect(),
            alpha,
            bias,
            labels: (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect(),
            c: 1.0,
            fingerprint: String::new(),
            jitter: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn decision_and_prediction() {
        let m = toy_model(vec![0.0, 0.0, 0.0], 0.3);
        assert!((decision_value(&m, &[0.5, 0.2, 0.9]).unwrap() - 0.3).abs() < 1e-15);
        assert!(decision_value(&m, &[0.5]).is_err());

        let m = toy_model(vec![0.4, 0.7, 0.3], -0.2);
        let k = [0.1, 0.5, 0.8];
        let k2: Vec<f64> = k.iter().map(|v| 2.0 * v).collect();
        let f1 = decision_value(&m, &k).unwrap() - m.bias;
        let f2 = decision_value(&m, &k2).unwrap() - m.bias;
        assert!((f2 - 2.0 * f1).abs() < 1e-15);

        assert_eq!(label_of(0.7), 1);
        assert_eq!(label_of(-0.1), -1);
        assert_eq!(label_of(0.0), 1);
        let zero = toy_model(vec![0.0, 0.0], 0.0);
        assert_eq!(predict(&zero, &[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn free_support_vector_sits_on_margin() {
        let k = random_psd(10, 55);
        let y = random_labels(10, 55);
        let m = train_smo(&k, &y, 5.0, 1e-6, 100_000).unwrap();
        for i in (0..10).filter(|&i| m.is_free(i)) {
            let row: Vec<f64> = k.matrix().column(i).iter().copied().collect();
            let f = decision_value(&m, &row).unwrap();
            assert!((f - f64::from(y[i])).abs() <= 1e-5);
        }
    }

    #[test]
    fn text_dump_lists_every_multiplier() {
        let m = toy_model(vec![0.5, 0.5], 0.0);
        let text = m.to_text();
        assert!(text.starts_with("svm-model v1"));
        assert_eq!(text.lines().count(), 7 + 1 + 2);
    }
}
