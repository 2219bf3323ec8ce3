//! Synthetic binary datasets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::data::{Cell, ColumnKind, DatasetSpec, FeatureColumn, LabelSpec, RawDataset};
use crate::rng::{rng_from_seed, Rng as ChaRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthKind {
    /// Two isotropic unit-variance Gaussians whose means differ by `separation` per axis.
    TwoGaussians { dim: usize, separation: f64, positive_fraction: f64 },
    /// Uniform points in the unit square labelled by the parity of their `cells x cells`
    /// board square; `cells = 2` is XOR.
    Checkerboard { cells: usize },
    /// Two numeric and two categorical columns with class-dependent distributions.
    Mixed { positive_fraction: f64 },
}

fn spec(features: Vec<(&str, ColumnKind)>) -> DatasetSpec {
    DatasetSpec {
        label: LabelSpec {
            column: "label".into(),
            positive: "1".into(),
            negative: "0".into(),
        },
        features: features
            .into_iter()
            .map(|(name, kind)| FeatureColumn {
                name: name.into(),
                kind,
            })
            .collect(),
    }
}

fn class_labels(n: usize, positive_fraction: f64, rng: &mut ChaRng) -> Result<Vec<i8>> {
    if !(positive_fraction > 0.0 && positive_fraction < 1.0) {
        return Err(Error::Config(format!(
            "positive fraction {positive_fraction} must be strictly between 0 and 1"
        )));
    }
    let pos = (n as f64 * positive_fraction).round() as usize;
    let mut y: Vec<i8> = (0..n).map(|i| if i < pos { 1 } else { -1 }).collect();
    y.shuffle(rng);
    Ok(y)
}

fn normal(rng: &mut ChaRng) -> f64 {
    StandardNormal.sample(rng)
}

fn pick<'a>(rng: &mut ChaRng, options: &[&'a str], weights: &[f64]) -> &'a str {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (o, w) in options.iter().zip(weights) {
        if u < *w {
            return o;
        }
        u -= w;
    }
    options[options.len() - 1]
}

pub fn generate(kind: SynthKind, n: usize, seed: u64) -> Result<RawDataset> {
    if n == 0 {
        return Err(Error::Config("synthetic dataset needs at least one row".into()));
    }
    let mut rng = rng_from_seed(seed);
    match kind {
        SynthKind::TwoGaussians {
            dim,
            separation,
            positive_fraction,
        } => {
            if dim == 0 {
                return Err(Error::Config("two-gaussians needs dim >= 1".into()));
            }
            let names: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
            let labels = class_labels(n, positive_fraction, &mut rng)?;
            let rows = labels
                .iter()
                .map(|&y| {
                    let shift = f64::from(y) * separation / 2.0;
                    (0..dim).map(|_| Cell::Num(shift + normal(&mut rng))).collect()
                })
                .collect();
            Ok(RawDataset {
                spec: spec(names.iter().map(|s| (s.as_str(), ColumnKind::Numeric)).collect()),
                rows,
                labels,
            })
        }
        SynthKind::Checkerboard { cells } => {
            if cells < 2 {
                return Err(Error::Config("checkerboard needs at least 2 cells per axis".into()));
            }
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let (x, y): (f64, f64) = (rng.random(), rng.random());
                let cx = ((x * cells as f64) as usize).min(cells - 1);
                let cy = ((y * cells as f64) as usize).min(cells - 1);
                labels.push(if (cx + cy) % 2 == 0 { 1 } else { -1 });
                rows.push(vec![Cell::Num(x), Cell::Num(y)]);
            }
            Ok(RawDataset {
                spec: spec(vec![("x0", ColumnKind::Numeric), ("x1", ColumnKind::Numeric)]),
                rows,
                labels,
            })
        }
        SynthKind::Mixed { positive_fraction } => {
            let labels = class_labels(n, positive_fraction, &mut rng)?;
            let regions = ["east", "north", "south", "west"];
            let plans = ["basic", "plus", "pro"];
            let rows = labels
                .iter()
                .map(|&y| {
                    let pos = y == 1;
                    let tenure = if pos { 12.0 } else { 30.0 } + 8.0 * normal(&mut rng);
                    let spend = if pos { 80.0 } else { 55.0 } + 15.0 * normal(&mut rng);
                    let region = pick(
                        &mut rng,
                        &regions,
                        if pos { &[0.4, 0.2, 0.2, 0.2] } else { &[0.2, 0.3, 0.3, 0.2] },
                    );
                    let plan = pick(
                        &mut rng,
                        &plans,
                        if pos { &[0.6, 0.3, 0.1] } else { &[0.25, 0.35, 0.4] },
                    );
                    vec![
                        Cell::Num((tenure * 100.0).round() / 100.0),
                        Cell::Num((spend * 100.0).round() / 100.0),
                        Cell::Cat(region.into()),
                        Cell::Cat(plan.into()),
                    ]
                })
                .collect();
            Ok(RawDataset {
                spec: spec(vec![
                    ("tenure", ColumnKind::Numeric),
                    ("monthly_spend", ColumnKind::Numeric),
                    ("region", ColumnKind::Categorical),
                    ("plan", ColumnKind::Categorical),
                ]),
                rows,
                labels,
            })
        }
    }
}
