//! Kernel evaluation: the fidelity kernel `k(x, x') = |<phi(x)|phi(x')>|^2`, Gram
//! assembly, parameter-shift derivatives and state-distance diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{apply_inverse, prepare_state, AnsatzConfig, AnsatzParams, ParamIndex};
use crate::error::{Error, Result};
use crate::rng::task_seed;
use crate::sim::StateVector;

/// Tolerance for symmetry and unit-diagonal checks.
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-8;

/// Square symmetric kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramCheck {
    pub max_asymmetry: f64,
    pub max_diagonal_deviation: f64,
    pub min_eigenvalue: f64,
}

impl GramCheck {
    /// Symmetric, unit diagonal and PSD at the module tolerances.
    pub fn is_valid_fidelity_kernel(&self) -> bool {
        self.max_asymmetry <= STRUCTURAL_TOL
            && self.max_diagonal_deviation <= STRUCTURAL_TOL
            && self.min_eigenvalue >= -PSD_TOL
    }
}

impl GramMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "Gram matrix must be square",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::EmptyInput("Gram matrix"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix entries"));
        }
        let gram = Self(matrix);
        let asym = gram.max_asymmetry();
        if asym > STRUCTURAL_TOL {
            return Err(Error::Numerical(format!(
                "Gram matrix asymmetric by {asym:e}"
            )));
        }
        Ok(gram)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)]).abs());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn check(&self) -> GramCheck {
        let max_diagonal_deviation = (0..self.n())
            .map(|i| (self.0[(i, i)] - 1.0).abs())
            .fold(0.0, f64::max);
        GramCheck {
            max_asymmetry: self.max_asymmetry(),
            max_diagonal_deviation,
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// `K + jitter * I`.
    pub fn with_jitter(&self, jitter: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.n() {
            m[(i, i)] += jitter;
        }
        Self(m)
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn select(&self, idx: &[usize]) -> Self {
        Self(DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.0[(idx[a], idx[b])]))
    }
}

/// Anything that can fill Gram and cross-kernel matrices over real feature rows.
pub trait Kernel: Send + Sync {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64>;

    fn name(&self) -> String;

    fn gram(&self, xs: &[Vec<f64>]) -> Result<GramMatrix> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("Gram matrix input"));
        }
        let n = xs.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| self.eval(&xs[i], &xs[j])).collect())
            .collect::<Result<_>>()?;
        GramMatrix::new(mirror_upper(n, &rows))
    }

    fn cross(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::EmptyInput("cross-kernel input"));
        }
        let filled: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|r| cols.iter().map(|c| self.eval(r, c)).collect())
            .collect::<Result<_>>()?;
        if filled.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cross-kernel entries"));
        }
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| filled[i][j]))
    }
}

/// `rows[i]` holds entries `(i, i..n)`.
fn mirror_upper(n: usize, rows: &[Vec<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            m[(i, i + off)] = v;
            m[(i + off, i)] = v;
        }
    }
    m
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum KernelMode {
    /// Overlaps from exact state vectors.
    #[default]
    Exact,
    /// Overlap estimated as the all-zeros frequency after `U(x2)^dagger U(x1)|0>`.
    Shots { shots: u64, seed: u64 },
}

/// Squared overlap of two prepared states.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner_product(b)?.norm_sqr().min(1.0))
}

/// Shot estimate of `|<phi(x2; params2)|phi(x1; params1)>|^2` by sampling the
/// all-zeros outcome of `U(x2)^dagger U(x1)|0>`.
pub fn estimate_overlap_shots(
    x1: &[f64],
    params1: &AnsatzParams,
    x2: &[f64],
    params2: &AnsatzParams,
    config: &AnsatzConfig,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    let mut state = prepare_state(x1, params1, config)?;
    apply_inverse(&mut state, x2, params2, config)?;
    let counts = state.sample_index_counts(shots, seed)?;
    Ok(counts.get(&0).copied().unwrap_or(0) as f64 / shots as f64)
}

fn content_seed(base: u64, a: &[f64], b: &[f64]) -> u64 {
    let bits: Vec<u64> = a
        .iter()
        .chain(std::iter::once(&f64::NAN))
        .chain(b)
        .map(|v| v.to_bits())
        .collect();
    task_seed(base, &bits)
}

/// Data re-uploading fidelity kernel with fixed variational parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumKernel {
    pub config: AnsatzConfig,
    pub params: AnsatzParams,
    pub mode: KernelMode,
}

impl QuantumKernel {
    pub fn new(config: AnsatzConfig, params: AnsatzParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self {
            config,
            params,
            mode: KernelMode::Exact,
        })
    }

    pub fn with_mode(mut self, mode: KernelMode) -> Self {
        self.mode = mode;
        self
    }

    fn states(&self, xs: &[Vec<f64>]) -> Result<Vec<StateVector>> {
        xs.par_iter()
            .map(|x| prepare_state(x, &self.params, &self.config))
            .collect()
    }
}

impl Kernel for QuantumKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self.mode {
            KernelMode::Exact => fidelity(
                &prepare_state(a, &self.params, &self.config)?,
                &prepare_state(b, &self.params, &self.config)?,
            ),
            KernelMode::Shots { shots, seed } => estimate_overlap_shots(
                a,
                &self.params,
                b,
                &self.params,
                &self.config,
                shots,
                content_seed(seed, a, b),
            ),
        }
    }

    fn name(&self) -> String {
        format!(
            "quantum(n={}, L={}, {:?})",
            self.config.n_qubits, self.config.layers, self.mode
        )
    }

    fn gram(&self, xs: &[Vec<f64>]) -> Result<GramMatrix> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("Gram matrix input"));
        }
        if let KernelMode::Shots { .. } = self.mode {
            let n = xs.len();
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    (i..n)
                        .map(|j| if i == j { Ok(1.0) } else { self.eval(&xs[i], &xs[j]) })
                        .collect()
                })
                .collect::<Result<_>>()?;
            return Ok(GramMatrix(mirror_upper(n, &rows)));
        }
        let states = self.states(xs)?;
        let n = states.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| fidelity(&states[i], &states[j])).collect())
            .collect::<Result<_>>()?;
        Ok(GramMatrix(mirror_upper(n, &rows)))
    }

    fn cross(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::EmptyInput("cross-kernel input"));
        }
        if let KernelMode::Shots { .. } = self.mode {
            let filled: Vec<Vec<f64>> = rows
                .par_iter()
                .map(|r| cols.iter().map(|c| self.eval(r, c)).collect())
                .collect::<Result<_>>()?;
            return Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| filled[i][j]));
        }
        let col_states = self.states(cols)?;
        let filled: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|r| {
                let s = prepare_state(r, &self.params, &self.config)?;
                col_states.iter().map(|c| fidelity(&s, c)).collect()
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| filled[i][j]))
    }
}

pub fn kernel_value(
    x1: &[f64],
    x2: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<f64> {
    let a = prepare_state(x1, params, config)?;
    let b = prepare_state(x2, params, config)?;
    fidelity(&a, &b)
}

pub fn gram_matrix(
    xs: &[Vec<f64>],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<GramMatrix> {
    QuantumKernel::new(config.clone(), params.clone())?.gram(xs)
}

pub fn cross_gram(
    x_test: &[Vec<f64>],
    x_train: &[Vec<f64>],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<DMatrix<f64>> {
    QuantumKernel::new(config.clone(), params.clone())?.cross(x_test, x_train)
}

const SHIFT: f64 = std::f64::consts::FRAC_PI_2;

/// Exact derivative of `k_theta(x1, x2)` with respect to one variational angle.
///
/// The angle occurs once in each of the two circuits, so the two-point shift rule is
/// applied to each occurrence separately:
/// `dk = [k(+s, 0) - k(-s, 0)] / 2 + [k(0, +s) - k(0, -s)] / 2`, with `s = pi/2` and the
/// pair giving the shift applied to the `x1` and `x2` circuits.
pub fn kernel_gradient_param_shift(
    x1: &[f64],
    x2: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    index: ParamIndex,
) -> Result<f64> {
    let plus = params.shifted(config, index, SHIFT)?;
    let minus = params.shifted(config, index, -SHIFT)?;
    let a = prepare_state(x1, params, config)?;
    let b = prepare_state(x2, params, config)?;
    let a_plus = prepare_state(x1, &plus, config)?;
    let a_minus = prepare_state(x1, &minus, config)?;
    let b_plus = prepare_state(x2, &plus, config)?;
    let b_minus = prepare_state(x2, &minus, config)?;
    Ok(0.5 * (fidelity(&a_plus, &b)? - fidelity(&a_minus, &b)?)
        + 0.5 * (fidelity(&a, &b_plus)? - fidelity(&a, &b_minus)?))
}

/// `dK/dtheta_p` for every variational angle, as one `N x N` matrix per flat parameter index.
///
/// With [`KernelMode::Shots`] each shifted overlap is replaced by an independent unbiased
/// shot estimate seeded by `(seed, parameter, i, j, shift)`, so the result does not depend
/// on evaluation order. Diagonal entries are exactly zero (`k(x, x) = 1` for all angles).
pub fn gram_gradients(
    xs: &[Vec<f64>],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    mode: KernelMode,
) -> Result<Vec<DMatrix<f64>>> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("Gram gradient input"));
    }
    let n = xs.len();
    let base: Vec<StateVector> = xs
        .par_iter()
        .map(|x| prepare_state(x, params, config))
        .collect::<Result<_>>()?;
    ParamIndex::all(config)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|index| {
            let p = index.flat(config) as u64;
            let plus = params.shifted(config, index, SHIFT)?;
            let minus = params.shifted(config, index, -SHIFT)?;
            // diff[i][j] = k(phi_i^+, phi_j) - k(phi_i^-, phi_j)
            let mut diff = DMatrix::zeros(n, n);
            match mode {
                KernelMode::Exact => {
                    for (i, x) in xs.iter().enumerate() {
                        let sp = prepare_state(x, &plus, config)?;
                        let sm = prepare_state(x, &minus, config)?;
                        for (j, b) in base.iter().enumerate() {
                            if i != j {
                                diff[(i, j)] = fidelity(&sp, b)? - fidelity(&sm, b)?;
                            }
                        }
                    }
                }
                KernelMode::Shots { shots, seed } => {
                    for i in 0..n {
                        for j in 0..n {
                            if i == j {
                                continue;
                            }
                            let (i64_, j64) = (i as u64, j as u64);
                            let kp = estimate_overlap_shots(
                                &xs[i], &plus, &xs[j], params, config, shots,
                                task_seed(seed, &[p, i64_, j64, 0]),
                            )?;
                            let km = estimate_overlap_shots(
                                &xs[i], &minus, &xs[j], params, config, shots,
                                task_seed(seed, &[p, i64_, j64, 1]),
                            )?;
                            diff[(i, j)] = kp - km;
                        }
                    }
                }
            }
            Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (diff[(i, j)] + diff[(j, i)])))
        })
        .collect()
}

/// `d_q(x1, x2) = ||phi(x1) - phi(x2)||^2 = 2 (1 - Re<phi(x1)|phi(x2)>)`.
pub fn pairwise_quantum_distance(
    x1: &[f64],
    x2: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<f64> {
    let a = prepare_state(x1, params, config)?;
    let b = prepare_state(x2, params, config)?;
    state_distance(&a, &b)
}

fn state_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok((2.0 * (1.0 - a.inner_product(b)?.re)).clamp(0.0, 4.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginDiagnostics {
    /// Minimum state distance over opposite-label pairs.
    pub quantum_margin: f64,
    pub min_cross_distance: f64,
    pub mean_cross_distance: f64,
    /// Minimum Euclidean distance between opposite-label encoded feature vectors.
    pub classical_margin: Option<f64>,
    pub cross_pairs: usize,
}

pub fn margin_diagnostics(
    xs: &[Vec<f64>],
    labels: &[i8],
    params: &AnsatzParams,
    config: &AnsatzConfig,
) -> Result<MarginDiagnostics> {
    if xs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "points vs labels",
            expected: xs.len(),
            actual: labels.len(),
        });
    }
    crate::svm::class_counts(labels)?;
    let states: Vec<StateVector> = xs
        .par_iter()
        .map(|x| prepare_state(x, params, config))
        .collect::<Result<_>>()?;
    let mut min_d = f64::INFINITY;
    let mut sum_d = 0.0;
    let mut min_euclid = f64::INFINITY;
    let mut pairs = 0usize;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != -1 {
                continue;
            }
            let d = state_distance(&states[i], &states[j])?;
            min_d = min_d.min(d);
            sum_d += d;
            pairs += 1;
            let e: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b).powi(2)).sum();
            min_euclid = min_euclid.min(e.sqrt());
        }
    }
    Ok(MarginDiagnostics {
        quantum_margin: min_d,
        min_cross_distance: min_d,
        mean_cross_distance: sum_d / pairs as f64,
        classical_margin: Some(min_euclid),
        cross_pairs: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AngleKind;
    use std::f64::consts::PI;

    fn plain(n: usize, layers: usize) -> AnsatzConfig {
        AnsatzConfig::new(n, layers).unwrap().with_hadamard_init(false)
    }

    #[test]
    fn kernel_value_cases() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 4);
        let x = [0.3, 2.0];
        let y = [1.7, 0.1];
        assert!((kernel_value(&x, &x, &params, &config).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(
            kernel_value(&x, &y, &params, &config).unwrap(),
            kernel_value(&y, &x, &params, &config).unwrap()
        );

        let c1 = plain(1, 1);
        let p1 = AnsatzParams::zeros(&c1);
        assert!(kernel_value(&[PI], &[0.0], &p1, &c1).unwrap() < 1e-30);
        assert!(kernel_value(&[0.0], &[0.0, 0.0], &p1, &c1).is_err());
    }

    #[test]
    fn gram_cases() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 9);
        let g = gram_matrix(&[vec![0.5, 0.5]], &params, &config).unwrap();
        assert!((g.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(g.n(), 1);

        let xs = vec![vec![0.1, 0.2], vec![1.5, 2.5], vec![0.1, 0.2]];
        let g = gram_matrix(&xs, &params, &config).unwrap();
        for j in 0..3 {
            assert_eq!(g.get(0, j), g.get(2, j));
        }
        assert!(gram_matrix(&[], &params, &config).is_err());
    }

    #[test]
    fn cross_gram_matches_gram() {
        let config = AnsatzConfig::new(3, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 1);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..3).map(|q| ((i * 3 + q) as f64 * 0.37) % PI).collect())
            .collect();
        let g = gram_matrix(&xs, &params, &config).unwrap();
        let c = cross_gram(&xs, &xs, &params, &config).unwrap();
        assert!((g.matrix() - &c).amax() < 1e-15);
        let single = cross_gram(&xs[2..3], &xs, &params, &config).unwrap();
        for j in 0..5 {
            assert!((single[(0, j)] - g.get(2, j)).abs() < 1e-15);
            assert!((0.0..=1.0 + 1e-12).contains(&single[(0, j)]));
        }
        assert!(cross_gram(&[], &xs, &params, &config).is_err());
    }

    #[test]
    fn untouched_parameter_has_zero_gradient() {
        // Two qubits, no entangler edges matter because the data and params act
        // on a product state; the final layer cancels in the overlap.
        let config = plain(2, 1);
        let params = AnsatzParams::random_uniform(&config, PI, 2);
        for idx in ParamIndex::all(&config) {
            let g = kernel_gradient_param_shift(&[0.4, 1.2], &[2.0, 0.3], &params, &config, idx)
                .unwrap();
            assert!(g.abs() < 1e-10, "{idx:?}: {g}");
        }
        let bad = ParamIndex::new(1, 0, AngleKind::Ry);
        assert!(kernel_gradient_param_shift(&[0.0; 2], &[0.0; 2], &params, &config, bad).is_err());
    }

    #[test]
    fn parameter_shift_matches_finite_difference() {
        let config = AnsatzConfig::new(3, 3).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 17);
        let x1 = [0.2, 1.9, 2.7];
        let x2 = [1.1, 0.4, 3.0];
        let h = 1e-5;
        for idx in ParamIndex::all(&config) {
            let g = kernel_gradient_param_shift(&x1, &x2, &params, &config, idx).unwrap();
            let kp = kernel_value(&x1, &x2, &params.shifted(&config, idx, h).unwrap(), &config).unwrap();
            let km = kernel_value(&x1, &x2, &params.shifted(&config, idx, -h).unwrap(), &config).unwrap();
            let fd = (kp - km) / (2.0 * h);
            assert!((g - fd).abs() < 1e-6, "{idx:?}: shift {g} vs fd {fd}");
        }
    }

    #[test]
    fn gram_gradients_agree_with_pointwise_shift() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 5);
        let xs = vec![vec![0.3, 2.0], vec![1.0, 0.5], vec![2.5, 2.9]];
        let grads = gram_gradients(&xs, &params, &config, KernelMode::Exact).unwrap();
        for idx in ParamIndex::all(&config) {
            let d = &grads[idx.flat(&config)];
            for i in 0..3 {
                assert_eq!(d[(i, i)], 0.0);
                for j in 0..3 {
                    if i != j {
                        let g = kernel_gradient_param_shift(&xs[i], &xs[j], &params, &config, idx).unwrap();
                        assert!((d[(i, j)] - g).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn shot_kernel_is_close_and_deterministic() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 5);
        let exact = QuantumKernel::new(config.clone(), params.clone()).unwrap();
        let shots = exact.clone().with_mode(KernelMode::Shots { shots: 20_000, seed: 3 });
        let xs = vec![vec![0.3, 2.0], vec![1.0, 0.5], vec![2.5, 2.9], vec![0.0, 0.0]];
        let ge = exact.gram(&xs).unwrap();
        let gs = shots.gram(&xs).unwrap();
        assert_eq!(gs, shots.gram(&xs).unwrap());
        for i in 0..4 {
            assert_eq!(gs.get(i, i), 1.0);
            for j in 0..4 {
                let p = ge.get(i, j);
                let se = (p * (1.0 - p) / 20_000.0).sqrt();
                assert!(
                    (gs.get(i, j) - p).abs() <= 5.0 * se + 1e-12,
                    "({i},{j}) shots {} exact {p}",
                    gs.get(i, j)
                );
            }
        }
    }

    #[test]
    fn distance_cases() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 8);
        let x = [0.7, 1.4];
        assert!(pairwise_quantum_distance(&x, &x, &params, &config).unwrap().abs() < 1e-12);

        let c1 = plain(1, 1);
        let p1 = AnsatzParams::zeros(&c1);
        assert!((pairwise_quantum_distance(&[PI], &[0.0], &p1, &c1).unwrap() - 2.0).abs() < 1e-12);

        // lower bound d_q >= 2 (1 - |<a|b>|) against a direct overlap oracle
        for s in 0..50u64 {
            let p = AnsatzParams::random_uniform(&config, PI, s);
            let a = [(s as f64 * 0.31) % PI, (s as f64 * 0.77) % PI];
            let b = [(s as f64 * 1.13) % PI, (s as f64 * 0.19) % PI];
            let sa = prepare_state(&a, &p, &config).unwrap();
            let sb = prepare_state(&b, &p, &config).unwrap();
            let overlap: num_complex::Complex64 = sa
                .amplitudes()
                .iter()
                .zip(sb.amplitudes())
                .map(|(u, v)| u.conj() * v)
                .sum();
            let d = pairwise_quantum_distance(&a, &b, &p, &config).unwrap();
            assert!(d >= 2.0 * (1.0 - overlap.norm()) - 1e-12);
            assert!((0.0..=4.0).contains(&d));
        }
    }

    #[test]
    fn margin_cases() {
        let c1 = plain(1, 1);
        let p1 = AnsatzParams::zeros(&c1);
        let same = margin_diagnostics(&[vec![1.0], vec![1.0]], &[1, -1], &p1, &c1).unwrap();
        assert!(same.quantum_margin.abs() < 1e-12);
        let orth = margin_diagnostics(&[vec![0.0], vec![PI]], &[1, -1], &p1, &c1).unwrap();
        assert!((orth.quantum_margin - 2.0).abs() < 1e-12);
        assert!(margin_diagnostics(&[vec![0.0], vec![PI]], &[1, 1], &p1, &c1).is_err());
    }

    #[test]
    fn margin_matches_exhaustive_pairs() {
        let config = AnsatzConfig::new(2, 2).unwrap();
        let params = AnsatzParams::random_uniform(&config, PI, 21);
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64 * 0.91) % PI, (i as f64 * 1.73) % PI])
            .collect();
        let labels: Vec<i8> = (0..10).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let diag = margin_diagnostics(&xs, &labels, &params, &config).unwrap();
        let mut brute = f64::INFINITY;
        let mut count = 0;
        for i in 0..10 {
            for j in 0..10 {
                if labels[i] == 1 && labels[j] == -1 {
                    brute = brute.min(pairwise_quantum_distance(&xs[i], &xs[j], &params, &config).unwrap());
                    count += 1;
                }
            }
        }
        assert_eq!(count, 25);
        assert_eq!(diag.cross_pairs, 25);
        assert!((diag.quantum_margin - brute).abs() < 1e-14);
    }
}
