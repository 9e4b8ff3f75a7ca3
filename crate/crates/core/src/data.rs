//! Labelled, weighted datasets and weight normalization.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A binary label or classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// Sign of a score, with ties resolved to `Plus`.
    pub fn of_score(score: f64) -> Sign {
        if score >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn from_char(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Neumaier-compensated sum.
pub(crate) fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

// A vector whose compensated sum is this close to one is already normalized.
const NORMALIZED_SLACK: f64 = 8.0 * f64::EPSILON;

/// Scales a nonnegative vector to sum to one.
///
/// Entries are divided by the maximum before summing, so vectors of tiny
/// (even subnormal) weights normalize without underflow. Already-normalized
/// input is returned unchanged, which makes the operation idempotent.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Weights("empty weight vector".into()));
    }
    if let Some(bad) = raw.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Weights(format!("weights must be finite and nonnegative, got {bad}")));
    }
    let max = raw.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return Err(Error::Weights("all weights are zero".into()));
    }
    if (stable_sum(raw.iter().copied()) - 1.0).abs() <= NORMALIZED_SLACK {
        return Ok(raw.to_vec());
    }
    let scaled: Vec<f64> = raw.iter().map(|w| w / max).collect();
    let total = stable_sum(scaled.iter().copied());
    Ok(scaled.into_iter().map(|w| w / total).collect())
}

/// Training examples `(X_n, y_n)` with a normalized weight vector `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<Sign>,
    weights: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset; uniform weights when `weights` is `None`.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Sign>, weights: Option<Vec<f64>>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features[0].len();
        if let Some(row) = features.iter().position(|x| x.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: features[row].len() });
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("features must be finite".into()));
        }
        let n = features.len();
        let weights = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) if w.len() != n => {
                return Err(Error::Dataset(format!("{} weights for {n} examples", w.len())));
            }
            Some(w) => normalize_weights(&w)?,
        };
        Ok(Dataset { features, labels, weights })
    }

    /// Reads `f0,…,f{d-1},label[,weight]` with a header row.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let headers = reader.headers()?.clone();
        let columns: Vec<&str> = headers.iter().map(str::trim).collect();
        let label_col = columns
            .iter()
            .position(|c| *c == "label")
            .ok_or_else(|| Error::Dataset("missing `label` column".into()))?;
        let has_weight = columns.len() == label_col + 2 && columns[label_col + 1] == "weight";
        if columns.len() != label_col + 1 && !has_weight {
            return Err(Error::Dataset("columns after `label` must be exactly `weight`".into()));
        }
        for (i, c) in columns[..label_col].iter().enumerate() {
            if *c != format!("f{i}") {
                return Err(Error::Dataset(format!("expected column f{i}, found `{c}`")));
            }
        }

        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for (i, record) in reader.records().enumerate() {
            // header is line 1
            let row = i + 2;
            let record = record.map_err(|e| Error::CsvRow { row, message: e.to_string() })?;
            if record.len() != columns.len() {
                return Err(Error::CsvRow {
                    row,
                    message: format!("expected {} fields, found {}", columns.len(), record.len()),
                });
            }
            let parse = |j: usize| -> Result<f64> {
                record[j].trim().parse::<f64>().map_err(|_| Error::CsvRow {
                    row,
                    message: format!("column `{}`: `{}` is not a number", columns[j], &record[j]),
                })
            };
            let x = (0..label_col).map(parse).collect::<Result<Vec<_>>>()?;
            let label = match parse(label_col)? {
                1.0 => Sign::Plus,
                -1.0 => Sign::Minus,
                v => {
                    return Err(Error::CsvRow { row, message: format!("label must be -1 or +1, got {v}") });
                }
            };
            if has_weight {
                weights.push(parse(label_col + 1)?);
            }
            features.push(x);
            labels.push(label);
        }
        if features.is_empty() {
            return Err(Error::Dataset("file contains no examples".into()));
        }
        Dataset::new(features, labels, has_weight.then_some(weights))
    }

    /// Writes the dataset in the format read by [`Dataset::load_csv`], weights included.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        header.push("weight".into());
        writer.write_record(&header)?;
        for n in 0..self.len() {
            let mut row: Vec<String> = self.features[n].iter().map(|v| v.to_string()).collect();
            row.push(format!("{}", self.labels[n].value()));
            row.push(self.weights[n].to_string());
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn x(&self, n: usize) -> &[f64] {
        &self.features[n]
    }

    pub fn label(&self, n: usize) -> Sign {
        self.labels[n]
    }

    pub fn labels(&self) -> &[Sign] {
        &self.labels
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same examples with a new (normalized) weight vector.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Dataset> {
        if weights.len() != self.len() {
            return Err(Error::Dataset(format!("{} weights for {} examples", weights.len(), self.len())));
        }
        Ok(Dataset {
            features: self.features.clone(),
            labels: self.labels.clone(),
            weights: normalize_weights(weights)?,
        })
    }

    /// Hex SHA-256 over features, labels and weights.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.dim() as u64).to_le_bytes());
        for n in 0..self.len() {
            for v in &self.features[n] {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update([self.labels[n].as_char() as u8]);
            hasher.update(self.weights[n].to_bits().to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_weights(&[1.0; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(normalize_weights(&[2.0, 0.0, 2.0]).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(normalize_weights(&[1e-300, 1e-300]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize_weights(&[5e-324, 5e-324]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn normalize_errors() {
        assert!(normalize_weights(&[]).is_err());
        assert!(normalize_weights(&[0.0, 0.0]).is_err());
        assert!(normalize_weights(&[1.0, -0.1]).is_err());
        assert!(normalize_weights(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn csv_uniform_weights() {
        let f = write_tmp("f0,f1,label\n0.5,1.0,1\n-2,3,-1\n");
        let d = Dataset::load_csv(f.path()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.weights(), &[0.5, 0.5]);
        assert_eq!(d.labels(), &[Sign::Plus, Sign::Minus]);
    }

    #[test]
    fn csv_weight_column() {
        let f = write_tmp("f0,label,weight\n1,1,3\n2,-1,1\n");
        let d = Dataset::load_csv(f.path()).unwrap();
        assert_eq!(d.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn csv_bad_label_names_row() {
        let f = write_tmp("f0,label\n1,1\n2,0\n");
        match Dataset::load_csv(f.path()) {
            Err(Error::CsvRow { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_malformed_and_empty() {
        let f = write_tmp("f0,label\n1,1\nabc,-1\n");
        assert!(matches!(Dataset::load_csv(f.path()), Err(Error::CsvRow { row: 3, .. })));
        let f = write_tmp("f0,f1,label\n1,1\n");
        assert!(matches!(Dataset::load_csv(f.path()), Err(Error::CsvRow { row: 2, .. })));
        let f = write_tmp("f0,label\n");
        assert!(Dataset::load_csv(f.path()).is_err());
        let f = write_tmp("x,label\n1,1\n");
        assert!(Dataset::load_csv(f.path()).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let d = Dataset::new(
            vec![vec![0.1, -3.5], vec![2.0, 1e-7], vec![0.0, 0.0]],
            vec![Sign::Plus, Sign::Minus, Sign::Plus],
            Some(vec![1.0, 2.0, 3.0]),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.write_csv(f.path()).unwrap();
        let back = Dataset::load_csv(f.path()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.fingerprint(), d.fingerprint());
    }

    #[test]
    fn inconsistent_dimension() {
        let r = Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![Sign::Plus, Sign::Minus], None);
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in prop::collection::vec(0.0f64..1e6, 1..200)) {
            prop_assume!(raw.iter().any(|w| *w > 0.0));
            let once = normalize_weights(&raw).unwrap();
            let twice = normalize_weights(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!((stable_sum(once.iter().copied()) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn normalization_is_proportional(raw in prop::collection::vec(1e-3f64..1e3, 2..50)) {
            let w = normalize_weights(&raw).unwrap();
            for i in 1..raw.len() {
                let lhs = w[i] / w[0];
                let rhs = raw[i] / raw[0];
                prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
            }
        }
    }
}
