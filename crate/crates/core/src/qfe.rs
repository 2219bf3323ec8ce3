//! Explicit quantum features: Pauli-Z expectations after each re-uploading prefix,
//! expanded with pairwise products to a fixed width.
//!
//! Row layout (version 1): the raw block `[s1q0, s1q1, .., s1q{n-1}, s2q0, ..]`, then the
//! products `v_i v_j` for `i < j` in lexicographic order, truncated or zero-padded to
//! `target_dim`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{prepare_prefix, AnsatzConfig, AnsatzParams};
use crate::error::{Error, Result};
use crate::rng::task_seed;

pub const DEFAULT_TARGET_DIM: usize = 128;
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum QfeMode {
    #[default]
    Exact,
    /// Expectations estimated from `shots` computational-basis samples per slice.
    Shots { shots: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfeConfig {
    pub slices: usize,
    pub ansatz: AnsatzConfig,
    pub params: AnsatzParams,
    pub target_dim: usize,
    pub cross_term_degree: usize,
    pub mode: QfeMode,
}

impl QfeConfig {
    pub fn new(ansatz: AnsatzConfig, params: AnsatzParams, slices: usize) -> Result<Self> {
        let cfg = Self {
            slices,
            ansatz,
            params,
            target_dim: DEFAULT_TARGET_DIM,
            cross_term_degree: 2,
            mode: QfeMode::Exact,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_target_dim(mut self, target_dim: usize) -> Result<Self> {
        self.target_dim = target_dim;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: QfeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn raw_dim(&self) -> usize {
        self.slices * self.ansatz.n_qubits
    }

    pub fn validate(&self) -> Result<()> {
        self.ansatz.validate()?;
        self.params.check(&self.ansatz)?;
        if self.slices == 0 || self.slices > self.ansatz.layers {
            return Err(Error::InvalidParameter(format!(
                "slice count {} must be in 1..={}",
                self.slices, self.ansatz.layers
            )));
        }
        if self.target_dim < self.raw_dim() {
            return Err(Error::InvalidParameter(format!(
                "target dimension {} is smaller than the {} raw expectations",
                self.target_dim,
                self.raw_dim()
            )));
        }
        if self.cross_term_degree != 2 {
            return Err(Error::Unsupported(format!(
                "cross-term degree {} (only pairwise products are implemented)",
                self.cross_term_degree
            )));
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        let n = self.ansatz.n_qubits;
        let raw = self.raw_dim();
        let mut names: Vec<String> = (0..raw).map(|k| format!("raw:s{}q{}", k / n + 1, k % n)).collect();
        'outer: for i in 0..raw {
            for j in i + 1..raw {
                if names.len() == self.target_dim {
                    break 'outer;
                }
                names.push(format!("cross:{i}-{j}"));
            }
        }
        let mut pad = 0;
        while names.len() < self.target_dim {
            names.push(format!("pad:{pad}"));
            pad += 1;
        }
        names.truncate(self.target_dim);
        names
    }
}

/// `slices x n_qubits` expectations of `Z_q` after the first `s` layers, `s = 1..=slices`.
pub fn slice_expectations(
    angles: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    slices: usize,
) -> Result<Vec<Vec<f64>>> {
    slice_expectations_with(angles, params, config, slices, QfeMode::Exact)
}

fn slice_expectations_with(
    angles: &[f64],
    params: &AnsatzParams,
    config: &AnsatzConfig,
    slices: usize,
    mode: QfeMode,
) -> Result<Vec<Vec<f64>>> {
    if slices == 0 || slices > config.layers {
        return Err(Error::InvalidParameter(format!(
            "slice count {slices} must be in 1..={}",
            config.layers
        )));
    }
    (1..=slices)
        .map(|s| {
            let state = prepare_prefix(angles, params, config, s)?;
            match mode {
                QfeMode::Exact => (0..config.n_qubits)
                    .map(|q| state.expectation_pauli_z(q))
                    .collect(),
                QfeMode::Shots { shots, seed } => {
                    let mut bits: Vec<u64> = angles.iter().map(|a| a.to_bits()).collect();
                    bits.push(s as u64);
                    let counts = state.sample_index_counts(shots, task_seed(seed, &bits))?;
                    Ok((0..config.n_qubits)
                        .map(|q| {
                            let signed: i64 = counts
                                .iter()
                                .map(|(&z, &c)| if z >> q & 1 == 0 { c as i64 } else { -(c as i64) })
                                .sum();
                            signed as f64 / shots as f64
                        })
                        .collect())
                }
            }
        })
        .collect()
}

/// `[v, v_i v_j (i < j)]` cut or zero-padded to `target_dim`.
pub fn expand_cross_terms(v: &[f64], target_dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(target_dim);
    out.extend(v.iter().copied().take(target_dim));
    'outer: for i in 0..v.len() {
        for j in i + 1..v.len() {
            if out.len() >= target_dim {
                break 'outer;
            }
            out.push(v[i] * v[j]);
        }
    }
    out.resize(target_dim, 0.0);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn pad_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with("pad:"))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub fn qfe_transform(xs: &[Vec<f64>], config: &QfeConfig) -> Result<FeatureMatrix> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("QFE input"));
    }
    config.validate()?;
    let rows = xs
        .par_iter()
        .map(|x| {
            let e = slice_expectations_with(x, &config.params, &config.ansatz, config.slices, config.mode)?;
            let flat: Vec<f64> = e.into_iter().flatten().collect();
            Ok(expand_cross_terms(&flat, config.target_dim))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        columns: config.column_names(),
        rows,
    })
}

/// Per-column z-scoring fitted on training rows. Skipped columns pass through unchanged;
/// zero-variance columns are only centred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], skip: &[usize]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("standardizer rows"))?;
        let d = first.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Data("ragged feature rows".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for c in (0..d).filter(|c| !skip.contains(c)) {
            let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
            mean[c] = m;
            scale[c] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, scale })
    }

    pub fn fit_features(fm: &FeatureMatrix) -> Result<Self> {
        Self::fit(&fm.rows, &fm.pad_columns())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                if r.len() != self.mean.len() {
                    return Err(Error::DimensionMismatch {
                        context: "standardizer width",
                        expected: self.mean.len(),
                        actual: r.len(),
                    });
                }
                Ok(r.iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GramMatrix;
    use crate::rng::rng_from_seed;
    use crate::svm::{decision_values, train_smo};
    use nalgebra::DMatrix;
    use rand::Rng;
    use std::f64::consts::PI;

    fn plain(n: usize, l: usize) -> AnsatzConfig {
        AnsatzConfig::new(n, l).unwrap().with_hadamard_init(false)
    }

    #[test]
    fn single_qubit_cases() {
        let c = plain(1, 1);
        let p = AnsatzParams::zeros(&c);
        assert_eq!(slice_expectations(&[0.0], &p, &c, 1).unwrap(), vec![vec![1.0]]);
        assert!((slice_expectations(&[PI], &p, &c, 1).unwrap()[0][0] + 1.0).abs() < 1e-12);
        let h = AnsatzConfig::new(1, 1).unwrap();
        assert!(slice_expectations(&[0.0], &p, &h, 1).unwrap()[0][0].abs() < 1e-12);
        assert!(slice_expectations(&[0.0], &p, &c, 2).is_err());
    }

    #[test]
    fn cross_term_layout() {
        assert_eq!(expand_cross_terms(&[2.0, 3.0], 4), vec![2.0, 3.0, 6.0, 0.0]);
        assert_eq!(expand_cross_terms(&[0.0; 5], 20), vec![0.0; 20]);
        assert_eq!(expand_cross_terms(&[1.0, 2.0, 3.0], 4), vec![1.0, 2.0, 3.0, 2.0]);
        let v = [0.1, -0.4, 0.9];
        assert_eq!(expand_cross_terms(&v, 9), expand_cross_terms(&v, 9));
    }

    #[test]
    fn column_names_match_layout() {
        let a = AnsatzConfig::new(2, 2).unwrap();
        let cfg = QfeConfig::new(a.clone(), AnsatzParams::zeros(&a), 2).unwrap().with_target_dim(12).unwrap();
        let names = cfg.column_names();
        assert_eq!(names.len(), 12);
        assert_eq!(&names[..5], ["raw:s1q0", "raw:s1q1", "raw:s2q0", "raw:s2q1", "cross:0-1"]);
        assert_eq!(names[9], "cross:2-3");
        assert_eq!(&names[10..], ["pad:0", "pad:1"]);
        assert!(QfeConfig::new(a.clone(), AnsatzParams::zeros(&a), 3).is_err());
        assert!(cfg.with_target_dim(3).is_err());
    }

    #[test]
    fn transform_shapes_and_ranges() {
        let a = AnsatzConfig::new(3, 3).unwrap();
        let p = AnsatzParams::random_uniform(&a, PI, 1);
        let cfg = QfeConfig::new(a, p, 3).unwrap();
        let one = qfe_transform(&[vec![0.1, 0.2, 0.3]], &cfg).unwrap();
        assert_eq!((one.n_rows(), one.n_cols()), (1, 128));
        let xs = vec![vec![0.5, 1.0, 2.0], vec![0.5, 1.0, 2.0], vec![3.0, 0.0, 1.0]];
        let fm = qfe_transform(&xs, &cfg).unwrap();
        assert_eq!(fm.rows[0], fm.rows[1]);
        for r in &fm.rows {
            assert!(r[..9].iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        assert_eq!(fm.pad_columns().len(), 128 - 9 - 36);
        let csv = fm.to_csv();
        assert!(csv.starts_with("raw:s1q0,"));
        assert_eq!(csv.lines().count(), 4);
        assert!(qfe_transform(&[], &cfg).is_err());
    }

    #[test]
    fn slices_ignore_later_layers() {
        let a = AnsatzConfig::new(3, 3).unwrap();
        let p = AnsatzParams::random_uniform(&a, PI, 2);
        let x = [0.3, 1.7, 2.2];
        let base = slice_expectations(&x, &p, &a, 3).unwrap();
        let mut flat = p.to_flat();
        // perturb every layer-3 angle (both rotation kinds)
        for q in 0..3 {
            flat[2 * 3 + q] += 0.7;
            flat[9 + 2 * 3 + q] -= 0.4;
        }
        let p2 = AnsatzParams::from_flat(&a, &flat).unwrap();
        let moved = slice_expectations(&x, &p2, &a, 3).unwrap();
        assert_eq!(base[..2], moved[..2]);
        assert_ne!(base[2], moved[2]);
    }

    #[test]
    fn shot_mode_tracks_exact() {
        let a = AnsatzConfig::new(2, 2).unwrap();
        let p = AnsatzParams::random_uniform(&a, PI, 3);
        let exact = QfeConfig::new(a, p, 2).unwrap().with_target_dim(16).unwrap();
        let shots = exact.clone().with_mode(QfeMode::Shots { shots: 40_000, seed: 1 });
        let xs = vec![vec![0.2, 2.5], vec![1.1, 0.4]];
        let e = qfe_transform(&xs, &exact).unwrap();
        let s = qfe_transform(&xs, &shots).unwrap();
        assert_eq!(s, qfe_transform(&xs, &shots).unwrap());
        for (re, rs) in e.rows.iter().zip(&s.rows) {
            for k in 0..4 {
                // standard error of a +/-1 mean is at most 1/sqrt(shots) = 0.005
                assert!((re[k] - rs[k]).abs() < 0.025);
            }
        }
    }

    #[test]
    fn standardizer_skips_padding() {
        let rows = vec![vec![1.0, 5.0, 0.0], vec![3.0, 5.0, 0.0]];
        let s = Standardizer::fit(&rows, &[2]).unwrap();
        let t = s.transform(&rows).unwrap();
        assert_eq!(t[0], vec![-1.0, 0.0, 0.0]);
        assert_eq!(t[1], vec![1.0, 0.0, 0.0]);
        assert!(s.transform(&[vec![1.0]]).is_err());
    }

    fn linear_train_accuracy(rows: &[Vec<f64>], y: &[i8]) -> f64 {
        let n = rows.len();
        let k = DMatrix::from_fn(n, n, |i, j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum());
        let g = GramMatrix::new(k.clone()).unwrap();
        let m = train_smo(&g, y, 10.0, 1e-3, 100_000).unwrap();
        let f = decision_values(&m, &k).unwrap();
        f.iter().zip(y).filter(|(v, &l)| (**v >= 0.0) == (l == 1)).count() as f64 / n as f64
    }

    #[test]
    fn qfe_separates_xor_better_than_raw_angles() {
        let a = plain(2, 2);
        let p = AnsatzParams::default_init(&a, 4);
        let cfg = QfeConfig::new(a, p, 2).unwrap().with_target_dim(16).unwrap();
        let mut rng = rng_from_seed(8);
        let xs: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0.0..PI), rng.random_range(0.0..PI)]).collect();
        let y: Vec<i8> = xs
            .iter()
            .map(|x| if (x[0] - PI / 2.0) * (x[1] - PI / 2.0) >= 0.0 { 1 } else { -1 })
            .collect();
        let fm = qfe_transform(&xs, &cfg).unwrap();
        let std = Standardizer::fit_features(&fm).unwrap();
        let q = linear_train_accuracy(&std.transform(&fm.rows).unwrap(), &y);
        let raw_std = Standardizer::fit(&xs, &[]).unwrap();
        let r = linear_train_accuracy(&raw_std.transform(&xs).unwrap(), &y);
        assert!(q >= r, "qfe {q} vs raw {r}");
    }
}
