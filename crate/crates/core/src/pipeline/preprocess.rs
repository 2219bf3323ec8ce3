//! Train-fitted preprocessing: z-scored numerics, one-hot categoricals, then per-feature
//! min-max scaling to angles in `[0, pi]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ansatz::{encode_features, FeatureRanges};
use crate::error::{Error, Result};
use crate::pipeline::data::{Cell, ColumnKind, RawDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnTransform {
    /// `(x - mean) / std`, population std; a zero std only centres.
    Numeric { name: String, mean: f64, std: f64 },
    /// One slot per vocabulary entry, sorted.
    OneHot { name: String, vocabulary: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub columns: Vec<ColumnTransform>,
    pub ranges: FeatureRanges,
    pub warnings: Vec<String>,
}

fn cell_num(cell: &Cell) -> Result<f64> {
    match cell {
        Cell::Num(x) => Ok(*x),
        Cell::Cat(s) => Err(Error::Data(format!("expected a number, found {s:?}"))),
    }
}

fn cell_cat(cell: &Cell) -> Result<&str> {
    match cell {
        Cell::Cat(s) => Ok(s),
        Cell::Num(x) => Err(Error::Data(format!("expected a category, found {x}"))),
    }
}

impl Preprocessor {
    /// Fits every statistic on the rows in `train` only.
    pub fn fit(data: &RawDataset, train: &[usize]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("preprocessing fit rows"));
        }
        let mut warnings = Vec::new();
        let mut columns = Vec::new();
        for (c, f) in data.spec.features.iter().enumerate() {
            if let Some(&bad) = train.iter().find(|&&i| data.rows.get(i).is_none_or(|r| r.len() <= c)) {
                return Err(Error::Data(format!("row {bad} has no column {c}")));
            }
            columns.push(match f.kind {
                ColumnKind::Numeric => {
                    let xs = train
                        .iter()
                        .map(|&i| cell_num(&data.rows[i][c]))
                        .collect::<Result<Vec<f64>>>()?;
                    let n = xs.len() as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    if std == 0.0 {
                        let w = format!("numeric column {:?} is constant on the training split; it encodes to a constant angle", f.name);
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                    ColumnTransform::Numeric {
                        name: f.name.clone(),
                        mean,
                        std,
                    }
                }
                ColumnKind::Categorical => {
                    let vocab: BTreeSet<String> = train
                        .iter()
                        .map(|&i| cell_cat(&data.rows[i][c]).map(str::to_string))
                        .collect::<Result<_>>()?;
                    ColumnTransform::OneHot {
                        name: f.name.clone(),
                        vocabulary: vocab.into_iter().collect(),
                    }
                }
            });
        }
        let mut pre = Self {
            columns,
            ranges: FeatureRanges {
                min: Vec::new(),
                max: Vec::new(),
            },
            warnings,
        };
        let train_rows: Vec<Vec<f64>> = train
            .iter()
            .map(|&i| pre.features_row(&data.rows[i], None))
            .collect::<Result<_>>()?;
        pre.ranges = FeatureRanges::fit(&train_rows)?;
        Ok(pre)
    }

    pub fn dim(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnTransform::Numeric { .. } => 1,
                ColumnTransform::OneHot { vocabulary, .. } => vocabulary.len(),
            })
            .sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c {
                ColumnTransform::Numeric { name, .. } => out.push(name.clone()),
                ColumnTransform::OneHot { name, vocabulary } => {
                    out.extend(vocabulary.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        out
    }

    fn features_row(&self, row: &[Cell], unseen: Option<&mut usize>) -> Result<Vec<f64>> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                context: "raw row vs fitted columns",
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        let mut missed = 0;
        let mut out = Vec::with_capacity(self.columns.len());
        for (cell, t) in row.iter().zip(&self.columns) {
            match t {
                ColumnTransform::Numeric { mean, std, .. } => {
                    let x = cell_num(cell)? - mean;
                    out.push(if *std > 0.0 { x / std } else { x });
                }
                ColumnTransform::OneHot { vocabulary, .. } => {
                    let v = cell_cat(cell)?;
                    let hit = vocabulary.binary_search_by(|w| w.as_str().cmp(v)).ok();
                    if hit.is_none() {
                        missed += 1;
                    }
                    out.extend((0..vocabulary.len()).map(|k| if Some(k) == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        if let Some(u) = unseen {
            *u += missed;
        }
        Ok(out)
    }

    /// Standardized and one-hot encoded rows, before angle scaling.
    pub fn features(&self, data: &RawDataset) -> Result<Vec<Vec<f64>>> {
        let mut unseen = 0;
        let rows = data
            .rows
            .iter()
            .map(|r| self.features_row(r, Some(&mut unseen)))
            .collect::<Result<Vec<_>>>()?;
        if unseen > 0 {
            log::warn!("{unseen} categorical value(s) unseen during fit were encoded as all-zero blocks");
        }
        Ok(rows)
    }

    /// Angles in `[0, pi]` for every row of `data`.
    pub fn transform(&self, data: &RawDataset) -> Result<Vec<Vec<f64>>> {
        self.features(data)?
            .iter()
            .map(|f| Ok(encode_features(f, &self.ranges)?.angles.into_inner()))
            .collect()
    }
}

/// Encoded rows as written by [`write_encoded`]: original row index, angles, label (+1/-1).
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedTable {
    pub rows: Vec<usize>,
    pub angles: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

impl EncodedTable {
    /// Entries whose original row index appears in `idx`, in `idx` order.
    pub fn select(&self, idx: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<i8>)> {
        let pos: std::collections::HashMap<usize, usize> =
            self.rows.iter().enumerate().map(|(k, &r)| (r, k)).collect();
        let mut xs = Vec::with_capacity(idx.len());
        let mut ys = Vec::with_capacity(idx.len());
        for i in idx {
            let &k = pos
                .get(i)
                .ok_or_else(|| Error::Data(format!("row {i} is not in the encoded table")))?;
            xs.push(self.angles[k].clone());
            ys.push(self.labels[k]);
        }
        Ok((xs, ys))
    }
}

/// CSV with header `row,<feature names..>,label`.
pub fn write_encoded<W: std::io::Write>(
    writer: W,
    names: &[String],
    angles: &[Vec<f64>],
    labels: &[i8],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["row".to_string()];
    header.extend(names.iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    for (r, (a, y)) in angles.iter().zip(labels).enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(a.iter().map(|v| v.to_string()));
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_encoded<R: std::io::Read>(reader: R) -> Result<EncodedTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 3 {
        return Err(Error::Data("encoded CSV needs row, at least one feature and label columns".into()));
    }
    let mut t = EncodedTable {
        rows: Vec::new(),
        angles: Vec::new(),
        labels: Vec::new(),
    };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("encoded CSV row {r}, column {c}: not a finite number")))
        };
        t.rows.push(num(0)? as usize);
        t.angles.push((1..width - 1).map(num).collect::<Result<_>>()?);
        t.labels.push(match num(width - 1)? {
            v if v == 1.0 => 1,
            v if v == -1.0 => -1,
            v => return Err(Error::Data(format!("encoded CSV row {r}: label {v} is not +1/-1"))),
        });
    }
    if t.rows.is_empty() {
        return Err(Error::Data("encoded CSV has no rows".into()));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::data::{read_csv, DatasetSpec};
    use std::f64::consts::PI;

    fn data(text: &str) -> RawDataset {
        let spec = DatasetSpec::from_toml(
            "[label]\ncolumn='y'\npositive='1'\nnegative='0'\n[[features]]\nname='x'\nkind='numeric'\n[[features]]\nname='c'\nkind='categorical'\n",
        )
        .unwrap();
        read_csv(text.as_bytes(), &spec).unwrap()
    }

    #[test]
    fn standardizes_with_population_std() {
        let d = data("x,c,y\n1,a,1\n2,b,0\n3,a,1\n");
        let p = Preprocessor::fit(&d, &[0, 1, 2]).unwrap();
        let f = p.features(&d).unwrap();
        let z: Vec<f64> = f.iter().map(|r| r[0]).collect();
        for (got, want) in z.iter().zip([-1.2247, 0.0, 1.2247]) {
            assert!((got - want).abs() < 1e-4);
        }
        assert_eq!(&f[0][1..], &[1.0, 0.0]);
        assert_eq!(&f[1][1..], &[0.0, 1.0]);
        assert_eq!(p.feature_names(), ["x", "c=a", "c=b"]);
        for row in p.transform(&d).unwrap() {
            assert!(row.iter().all(|a| (0.0..=PI).contains(a)));
        }
        let angles = p.transform(&d).unwrap();
        assert_eq!(angles[0][0], 0.0);
        assert_eq!(angles[2][0], PI);
    }

    #[test]
    fn unseen_categories_and_constants() {
        let d = data("x,c,y\n5,a,1\n5,a,0\n7,z,1\n");
        let p = Preprocessor::fit(&d, &[0, 1]).unwrap();
        assert_eq!(p.warnings.len(), 1);
        let f = p.features(&d).unwrap();
        assert_eq!(&f[2][1..], &[0.0]);
        let a = p.transform(&d).unwrap();
        assert!(a[2].iter().all(|v| (0.0..=PI).contains(v)));
        assert!(Preprocessor::fit(&d, &[]).is_err());
    }

    #[test]
    fn encoded_round_trip() {
        let d = data("x,c,y\n1,a,1\n2,b,0\n3,a,1\n");
        let p = Preprocessor::fit(&d, &[0, 1, 2]).unwrap();
        let angles = p.transform(&d).unwrap();
        let mut buf = Vec::new();
        write_encoded(&mut buf, &p.feature_names(), &angles, &d.labels).unwrap();
        let t = read_encoded(buf.as_slice()).unwrap();
        assert_eq!(t.angles, angles);
        assert_eq!(t.labels, d.labels);
        let (xs, ys) = t.select(&[2, 0]).unwrap();
        assert_eq!((xs[0].clone(), ys), (angles[2].clone(), vec![1, 1]));
        assert!(t.select(&[9]).is_err());
    }

    #[test]
    fn fit_ignores_rows_outside_train() {
        let d = data("x,c,y\n1,a,1\n2,b,0\n3,a,1\n4,b,0\n");
        let p = Preprocessor::fit(&d, &[0, 1]).unwrap();
        let mut moved = d.clone();
        moved.rows[3][0] = Cell::Num(1e6);
        moved.rows[2][1] = Cell::Cat("new".into());
        assert_eq!(Preprocessor::fit(&moved, &[0, 1]).unwrap(), p);
    }
}
