//! Stratified train/validation/test splitting.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

pub const MIN_CLASS_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitProportions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitProportions {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitProportions {
    pub fn validate(&self) -> Result<()> {
        let p = [self.train, self.validation, self.test];
        if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("split proportions {p:?} must all be positive")));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split proportions {p:?} must sum to 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

/// Per-class split counts: every cell is the floor or ceiling of its exact share, each class
/// total is kept, and each split size lands within one row of `total * p`. Among the
/// candidates the one closest to the exact split sizes (then cells) wins.
fn controlled_rounding(class_sizes: [usize; 2], p: &[f64; 3]) -> Result<[[usize; 3]; 2]> {
    let total: usize = class_sizes.iter().sum();
    let options = |n: usize| -> Vec<[usize; 3]> {
        let exact = p.map(|q| n as f64 * q);
        (0..8u8)
            .map(|mask| std::array::from_fn(|s| exact[s].floor() as usize + usize::from(mask >> s & 1 == 1 && exact[s].fract() > 0.0)))
            .filter(|c: &[usize; 3]| c.iter().sum::<usize>() == n)
            .collect()
    };
    let cell_dev = |n: usize, c: &[usize; 3]| -> f64 { (0..3).map(|s| (c[s] as f64 - n as f64 * p[s]).powi(2)).sum() };
    let mut best: Option<((f64, f64), [[usize; 3]; 2])> = None;
    for a in options(class_sizes[0]) {
        for b in options(class_sizes[1]) {
            let size_dev: Vec<f64> = (0..3).map(|s| (a[s] + b[s]) as f64 - total as f64 * p[s]).collect();
            if size_dev.iter().any(|d| d.abs() > 1.0 + 1e-9) {
                continue;
            }
            let key = (
                size_dev.iter().map(|d| d * d).sum::<f64>(),
                cell_dev(class_sizes[0], &a) + cell_dev(class_sizes[1], &b),
            );
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, [a, b]));
            }
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::Numerical(format!("no stratified rounding for classes {class_sizes:?}")))
}

/// Shuffles each class with the seed and deals it out so that both the split sizes and each
/// class's share of every split follow the proportions as closely as integer counts allow.
pub fn stratified_split(labels: &[i8], proportions: SplitProportions, seed: u64) -> Result<SplitIndices> {
    proportions.validate()?;
    let p = proportions.as_array();
    let classes: [Vec<usize>; 2] = [
        (0..labels.len()).filter(|&i| labels[i] == -1).collect(),
        (0..labels.len()).filter(|&i| labels[i] == 1).collect(),
    ];
    if classes[0].len() + classes[1].len() != labels.len() {
        return Err(Error::Data("labels must be +1 or -1".into()));
    }
    for (c, members) in classes.iter().enumerate() {
        if members.len() < MIN_CLASS_ROWS {
            return Err(Error::Data(format!(
                "class {} has {} rows; stratified splitting needs at least {MIN_CLASS_ROWS}",
                if c == 0 { -1 } else { 1 },
                members.len()
            )));
        }
    }

    let counts = controlled_rounding([classes[0].len(), classes[1].len()], &p)?;

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (c, members) in classes.iter().enumerate() {
        let mut shuffled = members.clone();
        let label = if c == 0 { "split:negative" } else { "split:positive" };
        shuffled.shuffle(&mut rng_from_seed(derive_seed(seed, label)));
        let mut start = 0;
        for s in 0..3 {
            parts[s].extend_from_slice(&shuffled[start..start + counts[c][s]]);
            start += counts[c][s];
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    let [train, validation, test] = parts;
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

/// Stratified assignment of `0..labels.len()` to `k` folds.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (c, label) in [(-1i8, "folds:negative"), (1, "folds:positive")] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < k {
            return Err(Error::Data(format!("class {c} has fewer rows than the {k} folds")));
        }
        members.shuffle(&mut rng_from_seed(derive_seed(seed, label)));
        for (pos, i) in members.into_iter().enumerate() {
            folds[(pos + offset) % k].push(i);
        }
        offset += 1;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
