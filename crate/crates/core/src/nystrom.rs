//! Nyström low-rank kernel reconstruction `K~ = C W^+ C^T` and observable selection.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::ansatz::{prepare_state, AnsatzConfig, AnsatzParams};
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, Kernel};
use crate::rng::rng_from_seed;

/// Singular values below `PINV_RELATIVE_CUTOFF * sigma_max` are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;
const LEVERAGE_MAX_RANK: usize = 32;
const LEVERAGE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkStrategy {
    #[default]
    Uniform,
    Leverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NystromModel {
    pub landmark_indices: Vec<usize>,
    /// `N x m` block `K(X, landmarks)`.
    pub c: DMatrix<f64>,
    pub w_pinv: DMatrix<f64>,
    pub pinv_cutoff: f64,
}

impl NystromModel {
    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn m(&self) -> usize {
        self.landmark_indices.len()
    }

    /// Landmark-landmark block, read out of `C`.
    pub fn w(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |a, b| self.c[(self.landmark_indices[a], b)])
    }

    /// Kernel evaluations spent building `C`.
    pub fn evaluations(&self) -> usize {
        self.n() * self.m()
    }

    pub fn validate(&self) -> Result<()> {
        check_landmarks(self.n(), &self.landmark_indices)?;
        if self.c.ncols() != self.m() || self.w_pinv.shape() != (self.m(), self.m()) {
            return Err(Error::Format("Nyström block shapes are inconsistent".into()));
        }
        Ok(())
    }
}

fn check_landmarks(n: usize, landmarks: &[usize]) -> Result<()> {
    if landmarks.is_empty() {
        return Err(Error::InvalidParameter("at least one landmark is required".into()));
    }
    let mut seen = vec![false; n];
    for &i in landmarks {
        if i >= n {
            return Err(Error::InvalidParameter(format!("landmark {i} out of range for {n} points")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter(format!("landmark {i} repeated")));
        }
    }
    Ok(())
}

/// Rank-`r` leverage scores `sum_k U_ik^2` over the top `r` eigenvectors of `K`.
pub fn leverage_scores(k: &GramMatrix, rank: usize) -> Vec<f64> {
    let eig = SymmetricEigen::new(k.matrix().clone());
    let mut order: Vec<usize> = (0..k.n()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let top: Vec<usize> = order
        .into_iter()
        .take(rank)
        .filter(|&c| eig.eigenvalues[c] > PINV_RELATIVE_CUTOFF * lmax)
        .collect();
    (0..k.n())
        .map(|i| top.iter().map(|&c| eig.eigenvectors[(i, c)].powi(2)).sum())
        .collect()
}

/// `m` distinct indices out of `0..n`, sorted ascending.
///
/// Leverage sampling draws without replacement with probability proportional to the
/// rank-`min(m, 32)` leverage scores of `k`.
pub fn sample_landmarks(
    n: usize,
    m: usize,
    strategy: LandmarkStrategy,
    seed: u64,
    k: Option<&GramMatrix>,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidParameter("landmark count must be at least 1".into()));
    }
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "cannot pick {m} landmarks from {n} points"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut picked = match strategy {
        LandmarkStrategy::Uniform => index::sample(&mut rng, n, m).into_vec(),
        LandmarkStrategy::Leverage => {
            let k = k.ok_or_else(|| {
                Error::InvalidParameter(
                    "leverage sampling needs a kernel matrix or a pilot approximation".into(),
                )
            })?;
            if k.n() != n {
                return Err(Error::DimensionMismatch {
                    context: "leverage kernel vs point count",
                    expected: n,
                    actual: k.n(),
                });
            }
            let scores = leverage_scores(k, m.min(LEVERAGE_MAX_RANK));
            index::sample_weighted(&mut rng, n, |i| scores[i].max(LEVERAGE_FLOOR), m)
                .map_err(|e| Error::Numerical(format!("leverage sampling failed: {e}")))?
                .into_vec()
        }
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Uniform Nyström approximation used to score leverage when the exact Gram is unavailable.
pub fn pilot_gram<K: Kernel + ?Sized>(
    xs: &[Vec<f64>],
    m: usize,
    kernel: &K,
    seed: u64,
) -> Result<GramMatrix> {
    let landmarks = sample_landmarks(xs.len(), m, LandmarkStrategy::Uniform, seed, None)?;
    approx_gram(&build_nystrom(xs, &landmarks, kernel)?)
}

/// Moore-Penrose pseudoinverse by SVD, zeroing singular values below `rel_cutoff * sigma_max`.
pub fn pseudo_inverse(w: &DMatrix<f64>, rel_cutoff: f64) -> Result<DMatrix<f64>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to pseudo-invert"));
    }
    let svd = w.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cut = rel_cutoff * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(w.ncols(), w.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += vt.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    Ok(out)
}

fn build_from_c(c: DMatrix<f64>, landmarks: &[usize]) -> Result<NystromModel> {
    let m = landmarks.len();
    let w = DMatrix::from_fn(m, m, |a, b| c[(landmarks[a], b)]);
    let p = pseudo_inverse(&w, PINV_RELATIVE_CUTOFF)?;
    let w_pinv = (&p + p.transpose()) * 0.5;
    Ok(NystromModel {
        landmark_indices: landmarks.to_vec(),
        c,
        w_pinv,
        pinv_cutoff: PINV_RELATIVE_CUTOFF,
    })
}

/// Fills `C = K(X, X[landmarks])` with `kernel` and pseudo-inverts the landmark block.
pub fn build_nystrom<K: Kernel + ?Sized>(
    xs: &[Vec<f64>],
    landmarks: &[usize],
    kernel: &K,
) -> Result<NystromModel> {
    check_landmarks(xs.len(), landmarks)?;
    let cols: Vec<Vec<f64>> = landmarks.iter().map(|&i| xs[i].clone()).collect();
    let c = kernel.cross(xs, &cols)?;
    build_from_c(c, landmarks)
}

/// Same as [`build_nystrom`] but reads `C` out of an already computed Gram matrix.
pub fn build_nystrom_from_gram(k: &GramMatrix, landmarks: &[usize]) -> Result<NystromModel> {
    check_landmarks(k.n(), landmarks)?;
    let c = DMatrix::from_fn(k.n(), landmarks.len(), |i, b| k.get(i, landmarks[b]));
    build_from_c(c, landmarks)
}

/// Eigenpairs of the landmark block kept under the pseudoinverse cutoff, as
/// `(V_k |L_k|^{-1/2}, sign(L_k))`. Reconstructing through this factor instead of
/// multiplying by `W^+` avoids squaring the block's condition number.
fn whitening(model: &NystromModel) -> (DMatrix<f64>, Vec<f64>) {
    let w = model.w();
    let eig = SymmetricEigen::new((&w + w.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| {
            let l = eig.eigenvalues[k].abs();
            l > model.pinv_cutoff * top && l > 0.0
        })
        .collect();
    let factor = DMatrix::from_fn(model.m(), keep.len(), |i, k| {
        eig.eigenvectors[(i, keep[k])] / eig.eigenvalues[keep[k]].abs().sqrt()
    });
    let signs = keep.iter().map(|&k| eig.eigenvalues[k].signum()).collect();
    (factor, signs)
}

fn signed_outer(a: &DMatrix<f64>, signs: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (k, s) in signs.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*s);
    }
    scaled * b.transpose()
}

/// `C W^+ C^T`, evaluated as `G S G^T` with `G = C V |L|^{-1/2}`.
pub fn approx_gram(model: &NystromModel) -> Result<GramMatrix> {
    let (factor, signs) = whitening(model);
    let g = &model.c * factor;
    let k = signed_outer(&g, &signs, &g);
    GramMatrix::new((&k + k.transpose()) * 0.5)
}

/// Approximate `K(test, train)` as `K(test, landmarks) W^+ C^T`.
pub fn approx_cross<K: Kernel + ?Sized>(
    model: &NystromModel,
    kernel: &K,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    if train.len() != model.n() {
        return Err(Error::DimensionMismatch {
            context: "Nyström training rows",
            expected: model.n(),
            actual: train.len(),
        });
    }
    let cols: Vec<Vec<f64>> = model.landmark_indices.iter().map(|&i| train[i].clone()).collect();
    let c_test = kernel.cross(test, &cols)?;
    let (factor, signs) = whitening(model);
    Ok(signed_outer(&(c_test * &factor), &signs, &(&model.c * &factor)))
}

pub fn frobenius_error(k: &GramMatrix, k_approx: &GramMatrix) -> Result<f64> {
    if k.n() != k_approx.n() {
        return Err(Error::DimensionMismatch {
            context: "Frobenius error operands",
            expected: k.n(),
            actual: k_approx.n(),
        });
    }
    Ok((k.matrix() - k_approx.matrix()).norm())
}

/// Least-squares slope `alpha` of `log lambda_k = c - alpha log k` over the eigenvalues
/// above `1e-12 lambda_max`. `None` with fewer than two usable eigenvalues.
pub fn eigen_decay_exponent(k: &GramMatrix) -> Option<f64> {
    let mut ev = k.eigenvalues();
    ev.sort_by(|a, b| b.total_cmp(a));
    let lmax = *ev.first()?;
    let pts: Vec<(f64, f64)> = ev
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-12 * lmax && v > 0.0)
        .map(|(i, &v)| (((i + 1) as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// A Pauli-Z string on the listed qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Observable {
    pub qubits: Vec<usize>,
}

impl Observable {
    pub fn z(qubits: &[usize]) -> Self {
        let mut q = qubits.to_vec();
        q.sort_unstable();
        Self { qubits: q }
    }

    fn order_key(&self) -> (usize, &[usize]) {
        (self.qubits.len(), &self.qubits)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in &self.qubits {
            write!(f, "Z{q}")?;
        }
        Ok(())
    }
}

/// All single-qubit and two-qubit Z strings.
pub fn default_candidates(n_qubits: usize) -> Vec<Observable> {
    let mut out: Vec<Observable> = (0..n_qubits).map(|q| Observable::z(&[q])).collect();
    for a in 0..n_qubits {
        for b in a + 1..n_qubits {
            out.push(Observable::z(&[a, b]));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableScore {
    pub observable: Observable,
    pub score: f64,
}

/// Scores each candidate by `sum_{i,j} (<O>_i - <O>_j)^2` over the data states and keeps
/// the `m_prime` highest, ties broken by (weight, qubits).
pub fn fisher_select_observables(
    candidates: &[Observable],
    xs: &[Vec<f64>],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    m_prime: usize,
) -> Result<Vec<ObservableScore>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("observable candidates"));
    }
    if xs.is_empty() {
        return Err(Error::EmptyInput("observable scoring data"));
    }
    if m_prime > candidates.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot keep {m_prime} of {} observables",
            candidates.len()
        )));
    }
    let states = xs
        .iter()
        .map(|x| prepare_state(x, params, config))
        .collect::<Result<Vec<_>>>()?;
    let n = xs.len() as f64;
    let mut scored = candidates
        .iter()
        .map(|o| {
            let e = states
                .iter()
                .map(|s| s.expectation_z_string(&o.qubits))
                .collect::<Result<Vec<f64>>>()?;
            let mean = e.iter().sum::<f64>() / n;
            // sum over ordered pairs of squared differences = 2N * sum of squared deviations
            let score = 2.0 * n * e.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            Ok(ObservableScore {
                observable: o.clone(),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.observable.order_key().cmp(&b.observable.order_key()))
    });
    scored.truncate(m_prime);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::QuantumKernel;
    use rand::Rng;
    use std::f64::consts::PI;

    fn rbf_gram(xs: &[f64], gamma: f64) -> GramMatrix {
        let n = xs.len();
        GramMatrix::new(DMatrix::from_fn(n, n, |i, j| (-gamma * (xs[i] - xs[j]).powi(2)).exp())).unwrap()
    }

    fn quantum_setup(n: usize, seed: u64) -> (QuantumKernel, Vec<Vec<f64>>) {
        let config = AnsatzConfig::new(3, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, seed);
        let mut rng = rng_from_seed(seed + 1);
        let xs = (0..n).map(|_| (0..3).map(|_| rng.random_range(0.0..PI)).collect()).collect();
        (QuantumKernel::new(config, params).unwrap(), xs)
    }

    #[test]
    fn landmark_sampling_rules() {
        assert_eq!(sample_landmarks(5, 5, LandmarkStrategy::Uniform, 1, None).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(
            sample_landmarks(50, 7, LandmarkStrategy::Uniform, 9, None).unwrap(),
            sample_landmarks(50, 7, LandmarkStrategy::Uniform, 9, None).unwrap()
        );
        assert!(sample_landmarks(3, 4, LandmarkStrategy::Uniform, 0, None).is_err());
        assert!(sample_landmarks(3, 0, LandmarkStrategy::Uniform, 0, None).is_err());
        assert!(sample_landmarks(3, 2, LandmarkStrategy::Leverage, 0, None).is_err());
        let k = rbf_gram(&[0.0, 0.5, 1.0, 3.0], 1.0);
        let l = sample_landmarks(4, 4, LandmarkStrategy::Leverage, 0, Some(&k)).unwrap();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn leverage_avoids_duplicate_cluster() {
        // 10 copies of one point plus 10 well separated points
        let mut xs = vec![0.0; 10];
        xs.extend((1..=10).map(|i| 5.0 * i as f64));
        let k = rbf_gram(&xs, 1.0);
        let (mut uniform_hits, mut leverage_hits) = (0, 0);
        for trial in 0..100 {
            let u = sample_landmarks(20, 5, LandmarkStrategy::Uniform, trial, None).unwrap();
            let l = sample_landmarks(20, 5, LandmarkStrategy::Leverage, trial, Some(&k)).unwrap();
            uniform_hits += u.iter().filter(|&&i| i < 10).count();
            leverage_hits += l.iter().filter(|&&i| i < 10).count();
        }
        assert!(leverage_hits < uniform_hits, "{leverage_hits} vs {uniform_hits}");
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let (kern, xs) = quantum_setup(10, 4);
        let k = kern.gram(&xs).unwrap();
        let model = build_nystrom(&xs, &(0..10).collect::<Vec<_>>(), &kern).unwrap();
        let approx = approx_gram(&model).unwrap();
        assert!(frobenius_error(&k, &approx).unwrap() < 1e-8);
        assert_eq!(model.evaluations(), 100);
    }

    #[test]
    fn rank_one_reconstruction() {
        let v = [0.5, 1.0, 2.0, 0.25, 3.0];
        let k = GramMatrix::new(DMatrix::from_fn(5, 5, |i, j| v[i] * v[j])).unwrap();
        for l in 0..5 {
            let model = build_nystrom_from_gram(&k, &[l]).unwrap();
            assert!(frobenius_error(&k, &approx_gram(&model).unwrap()).unwrap() < 1e-10);
        }
    }

    #[test]
    fn pseudo_inverse_axioms() {
        let (kern, xs) = quantum_setup(12, 2);
        let k = kern.gram(&xs).unwrap();
        for m in [2, 5, 9] {
            let l = sample_landmarks(12, m, LandmarkStrategy::Uniform, m as u64, None).unwrap();
            let model = build_nystrom_from_gram(&k, &l).unwrap();
            let w = model.w();
            let p = &model.w_pinv;
            assert!((p * &w * p - p).amax() < 1e-8);
            assert!((&w * p * &w - &w).amax() < 1e-8);
            assert!((p - p.transpose()).amax() < 1e-8);
        }
        // rank-deficient block: duplicated landmark point
        let w = DMatrix::from_element(2, 2, 1.0);
        let p = pseudo_inverse(&w, PINV_RELATIVE_CUTOFF).unwrap();
        assert!((p.clone() - DMatrix::from_element(2, 2, 0.25)).amax() < 1e-12);
    }

    #[test]
    fn interpolation_symmetry_and_psd() {
        let (kern, xs) = quantum_setup(16, 6);
        let k = kern.gram(&xs).unwrap();
        let l = sample_landmarks(16, 5, LandmarkStrategy::Uniform, 3, None).unwrap();
        let model = build_nystrom(&xs, &l, &kern).unwrap();
        let a = approx_gram(&model).unwrap();
        for &i in &l {
            for j in 0..16 {
                assert!((a.get(i, j) - k.get(i, j)).abs() < 1e-8);
            }
        }
        assert!(a.max_asymmetry() <= 1e-10);
        assert!(a.min_eigenvalue() >= -1e-8);
        let cross = approx_cross(&model, &kern, &xs, &xs[..3]).unwrap();
        for r in 0..3 {
            for c in 0..16 {
                assert!((cross[(r, c)] - a.get(r, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frobenius_basics() {
        let k = GramMatrix::new(DMatrix::identity(1, 1)).unwrap();
        let z = GramMatrix::new(DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(frobenius_error(&k, &k).unwrap(), 0.0);
        assert_eq!(frobenius_error(&k, &z).unwrap(), 1.0);
        assert!(frobenius_error(&k, &GramMatrix::new(DMatrix::identity(2, 2)).unwrap()).is_err());
    }

    #[test]
    fn error_shrinks_with_more_landmarks() {
        let mut rng = rng_from_seed(11);
        let xs: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..4.0)).collect();
        let k = rbf_gram(&xs, 0.5);
        let mut medians = Vec::new();
        for m in [2, 4, 8, 16] {
            let mut errs: Vec<f64> = (0..50)
                .map(|s| {
                    let l = sample_landmarks(32, m, LandmarkStrategy::Uniform, s, None).unwrap();
                    let a = approx_gram(&build_nystrom_from_gram(&k, &l).unwrap()).unwrap();
                    frobenius_error(&k, &a).unwrap()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            medians.push((errs[24] + errs[25]) / 2.0);
        }
        for w in medians.windows(2) {
            assert!(w[1] <= w[0], "{medians:?}");
        }
        assert!(eigen_decay_exponent(&k).unwrap() > 0.0);
    }

    #[test]
    fn fisher_scores() {
        let config = AnsatzConfig::new(2, 1).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 3);
        let cands = default_candidates(2);
        assert_eq!(cands.len(), 3);
        assert_eq!(cands.iter().map(|o| o.to_string()).collect::<Vec<_>>(), ["Z0", "Z1", "Z0Z1"]);

        let same = vec![vec![0.4, 1.0]; 5];
        for s in fisher_select_observables(&cands, &same, &params, &config, 3).unwrap() {
            assert!(s.score.abs() < 1e-20);
        }

        let one = fisher_select_observables(&cands[1..2], &same, &params, &config, 1).unwrap();
        assert_eq!(one[0].observable, cands[1]);

        // qubit 1 only sees a constant feature
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![0.5 * i as f64, 0.0]).collect();
        let all = fisher_select_observables(&cands, &xs, &params, &config, 3).unwrap();
        let z1 = all.iter().find(|s| s.observable == cands[1]).unwrap();
        assert!(z1.score < 1e-20);
        let z0 = all.iter().position(|s| s.observable == cands[0]).unwrap();
        let z1_pos = all.iter().position(|s| s.observable == cands[1]).unwrap();
        assert!(z0 < z1_pos);
        assert!(all.iter().all(|s| s.score >= 0.0));

        // closed form matches the pair sum
        let e: Vec<f64> = xs
            .iter()
            .map(|x| prepare_state(x, &params, &config).unwrap().expectation_pauli_z(0).unwrap())
            .collect();
        let direct: f64 = e.iter().flat_map(|a| e.iter().map(move |b| (a - b).powi(2))).sum();
        let got = all.iter().find(|s| s.observable == cands[0]).unwrap().score;
        assert!((got - direct).abs() < 1e-12);

        assert!(fisher_select_observables(&[], &xs, &params, &config, 0).is_err());
        assert!(fisher_select_observables(&cands, &xs, &params, &config, 4).is_err());
    }
}
