//! Dataset specs and CSV ingestion.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    /// Raw value mapped to +1.
    pub positive: String,
    /// Raw value mapped to -1.
    pub negative: String,
}

/// Column declarations for one CSV file.
///
/// ```toml
/// [label]
/// column = "churn"
/// positive = "yes"
/// negative = "no"
///
/// [[features]]
/// name = "tenure"
/// kind = "numeric"
///
/// [[features]]
/// name = "plan"
/// kind = "categorical"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub label: LabelSpec,
    pub features: Vec<FeatureColumn>,
}

impl DatasetSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("dataset spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read dataset spec {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("dataset spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("dataset spec declares no feature columns".into()));
        }
        if self.label.positive == self.label.negative {
            return Err(Error::Config("positive and negative label values must differ".into()));
        }
        let mut seen = BTreeSet::new();
        for name in self.features.iter().map(|f| &f.name).chain([&self.label.column]) {
            if !seen.insert(name) {
                return Err(Error::Config(format!("column {name:?} declared twice")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub spec: DatasetSpec,
    /// One entry per declared feature, in spec order.
    pub rows: Vec<Vec<Cell>>,
    pub labels: Vec<i8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            spec: self.spec.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

pub fn load_csv(path: &Path, spec: &DatasetSpec) -> Result<RawDataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, spec)
}

/// Parses CSV text with a header row against `spec`. Extra columns are ignored.
pub fn read_csv<R: std::io::Read>(reader: R, spec: &DatasetSpec) -> Result<RawDataset> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column {name:?} missing from CSV header")))
    };
    let label_col = position(&spec.label.column)?;
    let feature_cols = spec
        .features
        .iter()
        .map(|f| position(&f.name))
        .collect::<Result<Vec<_>>>()?;

    let mut raw_labels = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("malformed CSV at data row {r}: {e}")))?;
        let field = |c: usize| -> Result<&str> {
            match rec.get(c) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::Data(format!(
                    "missing value at row {r}, column {c} ({})",
                    header.get(c).unwrap_or("?")
                ))),
            }
        };
        let mut row = Vec::with_capacity(feature_cols.len());
        for (f, &c) in spec.features.iter().zip(&feature_cols) {
            let v = field(c)?;
            row.push(match f.kind {
                ColumnKind::Numeric => {
                    let x: f64 = v.parse().map_err(|_| {
                        Error::Data(format!("row {r}, column {c} ({}): {v:?} is not numeric", f.name))
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Data(format!(
                            "row {r}, column {c} ({}): non-finite value",
                            f.name
                        )));
                    }
                    Cell::Num(x)
                }
                ColumnKind::Categorical => Cell::Cat(v.to_string()),
            });
        }
        rows.push(row);
        raw_labels.push(field(label_col)?.to_string());
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if distinct.len() > 2 {
        return Err(Error::Data(format!(
            "label column {:?} is not binary; values: {}",
            spec.label.column,
            distinct.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
        )));
    }
    let labels = raw_labels
        .iter()
        .enumerate()
        .map(|(r, v)| {
            if *v == spec.label.positive {
                Ok(1)
            } else if *v == spec.label.negative {
                Ok(-1)
            } else {
                Err(Error::Data(format!(
                    "row {r}: label {v:?} matches neither {:?} nor {:?}",
                    spec.label.positive, spec.label.negative
                )))
            }
        })
        .collect::<Result<Vec<i8>>>()?;
    Ok(RawDataset {
        spec: spec.clone(),
        rows,
        labels,
    })
}

/// Writes a dataset back out as CSV with the spec's column order and raw label values.
pub fn write_csv<W: std::io::Write>(writer: W, data: &RawDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.spec.features.iter().map(|f| f.name.as_str()).collect();
    header.push(&data.spec.label.column);
    w.write_record(&header)?;
    for (row, &y) in data.rows.iter().zip(&data.labels) {
        let mut rec: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => x.to_string(),
                Cell::Cat(s) => s.clone(),
            })
            .collect();
        rec.push(if y == 1 {
            data.spec.label.positive.clone()
        } else {
            data.spec.label.negative.clone()
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> DatasetSpec {
        DatasetSpec::from_toml(
            r#"
[label]
column = "y"
positive = "yes"
negative = "no"

[[features]]
name = "age"
kind = "numeric"

[[features]]
name = "plan"
kind = "categorical"
"#,
        )
        .unwrap()
    }

    #[test]
    fn loads_well_formed_rows() {
        let text = "age,plan,y,extra\n30,a,yes,1\n41,b,no,2\n22,a,no,3\n";
        let d = read_csv(text.as_bytes(), &spec()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.labels, vec![1, -1, -1]);
        assert_eq!(d.rows[1], vec![Cell::Num(41.0), Cell::Cat("b".into())]);

        let mut out = Vec::new();
        write_csv(&mut out, &d).unwrap();
        assert_eq!(read_csv(out.as_slice(), &spec()).unwrap(), d);
    }

    #[test]
    fn rejects_non_binary_labels() {
        let text = "age,plan,y\n30,a,yes\n41,b,no\n22,a,maybe\n";
        let err = read_csv(text.as_bytes(), &spec()).unwrap_err().to_string();
        assert!(err.contains("\"maybe\"") && err.contains("\"yes\"") && err.contains("\"no\""), "{err}");
    }

    #[test]
    fn missing_cell_names_row_and_column() {
        let text = "age,plan,y\n30,a,yes\n,b,no\n";
        let err = read_csv(text.as_bytes(), &spec()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("row 1, column 0 (age)"), "{err}");
    }

    #[test]
    fn header_and_type_errors() {
        assert!(read_csv("plan,y\na,yes\n".as_bytes(), &spec()).is_err());
        assert!(read_csv("age,plan,y\nold,a,yes\n".as_bytes(), &spec()).is_err());
        assert!(read_csv("age,plan,y\n".as_bytes(), &spec()).is_err());
        assert!(DatasetSpec::from_toml("features = []\n[label]\ncolumn='y'\npositive='1'\nnegative='0'").is_err());
    }
}
