//! Columnar tabular data with an explicit missing mask, CSV ingestion and
//! seeded train/test partitioning.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token written for missing cells when a dataset is dumped back to CSV.
pub const CANONICAL_MISSING: &str = "NA";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("label column `{0}` not found in header")]
    UnknownLabelColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{token}` as a number")]
    Parse { row: usize, column: String, token: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}: label cell is missing")]
    MissingLabel { row: usize },
    #[error("dataset has no rows")]
    Empty,
    #[error("column lengths disagree: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelRange { label: usize, n_classes: usize },
    #[error("split fraction {0} must lie in (0, 1)")]
    Fraction(f64),
    #[error("class `{class}` has {count} sample(s); stratified splitting needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("at least two classes must be present, found {0}")]
    TooFewClasses(usize),
    #[error("index {index} out of range for {n} samples")]
    Index { index: usize, n: usize },
}

/// One feature: dense values plus a missing mask. Masked cells hold `0.0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Column {
    pub fn from_options(cells: &[Option<f64>]) -> Self {
        Column {
            values: cells.iter().map(|c| c.unwrap_or(0.0)).collect(),
            missing: cells.iter().map(Option::is_none).collect(),
        }
    }

    pub fn dense(values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Column { values, missing }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize) -> Option<f64> {
        if self.missing[row] {
            None
        } else {
            Some(self.values[row])
        }
    }

    #[inline]
    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    #[inline]
    pub fn value(&self, row: usize) -> f64 {
        self.values[row]
    }

    /// Raw values; entries at missing positions are meaningless.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    fn select(&self, rows: &[usize]) -> Column {
        Column {
            values: rows.iter().map(|&r| self.values[r]).collect(),
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
        }
    }
}

/// Feature-major matrix with per-feature sort orders of the present values.
///
/// The sort orders are built once and reused by every tree.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    columns: Vec<Column>,
    n_rows: usize,
    sorted: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<Column>) -> Result<Self, DataError> {
        let n_rows = columns.first().map_or(0, Column::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(DataError::Shape {
                expected: n_rows,
                found: bad.len(),
            });
        }
        let sorted = columns.iter().map(sort_present).collect();
        Ok(FeatureMatrix {
            columns,
            n_rows,
            sorted,
        })
    }

    /// Builds a matrix from row-major data where `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self, DataError> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut columns = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let mut cells = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n_features {
                    return Err(DataError::RaggedRow {
                        row: i,
                        expected: n_features,
                        found: row.len(),
                    });
                }
                cells.push(row[f]);
            }
            columns.push(Column::from_options(&cells));
        }
        FeatureMatrix::new(columns)
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let opt: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().copied().map(Some).collect()).collect();
        FeatureMatrix::from_rows(&opt)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, feature: usize) -> &Column {
        &self.columns[feature]
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Row indices with a present value for `feature`, in ascending value order
    /// (ties by row index).
    pub fn sorted_rows(&self, feature: usize) -> &[u32] {
        &self.sorted[feature]
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> Option<f64> {
        self.columns[feature].get(row)
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        self.columns.iter().map(|c| c.get(row)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let columns = self.columns.iter().map(|c| c.select(rows)).collect();
        FeatureMatrix::new(columns).expect("selected columns share one length")
    }
}

fn sort_present(column: &Column) -> Vec<u32> {
    let mut rows: Vec<u32> = (0..column.len() as u32)
        .filter(|&r| !column.missing[r as usize])
        .collect();
    rows.sort_by(|&a, &b| {
        column.values[a as usize]
            .total_cmp(&column.values[b as usize])
            .then(a.cmp(&b))
    });
    rows
}

/// Features, integer labels and the label vocabulary.
#[derive(Clone, Debug)]
pub struct TabularDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl TabularDataset {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if labels.len() != features.n_rows() && features.n_features() > 0 {
            return Err(DataError::Shape {
                expected: features.n_rows(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(DataError::LabelRange {
                label: bad,
                n_classes: class_names.len(),
            });
        }
        Ok(TabularDataset {
            features,
            labels,
            class_names,
            feature_names,
        })
    }

    /// Convenience constructor with generated names (`f0`, `f1`, … and `0`, `1`, …).
    pub fn from_parts(features: FeatureMatrix, labels: Vec<usize>, n_classes: usize) -> Result<Self, DataError> {
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        let feature_names = (0..features.n_features()).map(|f| format!("f{f}")).collect();
        TabularDataset::new(features, labels, class_names, feature_names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.n_classes())
    }

    /// Majority count over minority count, among classes that occur.
    pub fn imbalance_ratio(&self) -> Result<f64, DataError> {
        imbalance_ratio(&self.labels, self.n_classes())
    }

    /// Copy of the given rows, keeping the label vocabulary.
    pub fn subset(&self, rows: &[usize]) -> Result<TabularDataset, DataError> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_samples()) {
            return Err(DataError::Index {
                index: bad,
                n: self.n_samples(),
            });
        }
        Ok(TabularDataset {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        })
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<TabularDataset, DataError> {
        TabularDataset::new(
            self.features.clone(),
            labels,
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    /// Writes the dataset as CSV with the label in the last column.
    pub fn write_csv<W: io::Write>(&self, writer: W, label_column: &str) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header)?;
        for row in 0..self.n_samples() {
            let mut record: Vec<String> = self
                .features
                .columns()
                .iter()
                .map(|c| match c.get(row) {
                    Some(v) => format_float(v),
                    None => CANONICAL_MISSING.to_string(),
                })
                .collect();
            record.push(self.class_names[self.labels[row]].clone());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, label_column: &str) -> Result<(), DataError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(io::BufWriter::new(file), label_column)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

pub fn imbalance_ratio(labels: &[usize], n_classes: usize) -> Result<f64, DataError> {
    let present: Vec<usize> = class_counts(labels, n_classes).into_iter().filter(|&c| c > 0).collect();
    if present.len() < 2 {
        return Err(DataError::TooFewClasses(present.len()));
    }
    let max = *present.iter().max().unwrap();
    let min = *present.iter().min().unwrap();
    Ok(max as f64 / min as f64)
}

/// How to read a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    pub missing_tokens: Vec<String>,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            label_column: "label".to_string(),
            missing_tokens: ["", "NA", "NaN", "?"].iter().map(|s| s.to_string()).collect(),
            delimiter: b',',
        }
    }
}

impl CsvSchema {
    pub fn with_label(label_column: &str) -> Self {
        CsvSchema {
            label_column: label_column.to_string(),
            ..CsvSchema::default()
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TabularDataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(io::BufReader::new(file), schema)
}

/// Reads a header-first CSV. Labels are encoded in order of first appearance.
pub fn read_csv<R: io::Read>(reader: R, schema: &CsvSchema) -> Result<TabularDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| DataError::UnknownLabelColumn(schema.label_column.clone()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); feature_names.len()];
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row numbering, header excluded
        let row_no = row + 1;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                row: row_no,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut f = 0;
        for (i, token) in record.iter().enumerate() {
            if i == label_idx {
                let name = token.trim();
                if name.is_empty() {
                    return Err(DataError::MissingLabel { row: row_no });
                }
                let next = class_names.len();
                let id = *class_index.entry(name.to_string()).or_insert_with(|| {
                    class_names.push(name.to_string());
                    next
                });
                labels.push(id);
                continue;
            }
            let t = token.trim();
            let cell = if schema.missing_tokens.iter().any(|m| m == t) {
                None
            } else {
                match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => {
                        return Err(DataError::Parse {
                            row: row_no,
                            column: header[i].clone(),
                            token: token.to_string(),
                        })
                    }
                }
            };
            cells[f].push(cell);
            f += 1;
        }
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    let columns = cells.iter().map(|c| Column::from_options(c)).collect();
    TabularDataset::new(FeatureMatrix::new(columns)?, labels, class_names, feature_names)
}

/// Disjoint train/test index sets, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub fraction_bits: u64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitPlan {
    pub fn fraction(&self) -> f64 {
        f64::from_bits(self.fraction_bits)
    }
}

/// Seeded train/test split. With `stratified`, per-class train counts are
/// apportioned by largest remainder so every class and the total are within
/// one sample of `fraction`.
pub fn train_test_split(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
    stratified: bool,
    class_names: &[String],
) -> Result<SplitPlan, DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Fraction(fraction));
    }
    let n = labels.len();
    if n == 0 {
        return Err(DataError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        for (c, members) in by_class.iter().enumerate() {
            if members.len() == 1 {
                let class = class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
                return Err(DataError::ClassTooSmall { class, count: 1 });
            }
        }
        let quotas = apportion(&by_class.iter().map(Vec::len).collect::<Vec<_>>(), fraction);
        for (members, quota) in by_class.iter_mut().zip(quotas) {
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..quota]);
            test.extend_from_slice(&members[quota..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let k = ((fraction * n as f64).round() as usize).min(n);
        train.extend_from_slice(&all[..k]);
        test.extend_from_slice(&all[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        fraction_bits: fraction.to_bits(),
        seed,
        stratified,
    })
}

/// Largest-remainder apportionment of `round(fraction · Σ sizes)` across groups.
fn apportion(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * fraction).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for g in order {
        if assigned >= target {
            break;
        }
        if exact[g] > exact[g].floor() && quotas[g] < sizes[g] {
            quotas[g] += 1;
            assigned += 1;
        }
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CsvSchema {
        CsvSchema::with_label("y")
    }

    #[test]
    fn missing_cell_is_masked() {
        let text = "a,b,y\n1.5,2,x\n?,3.25,x\n4,-1e-3,z\n";
        let ds = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.features.column(0).missing_count(), 1);
        assert_eq!(ds.features.get(1, 0), None);
        assert_eq!(ds.features.get(0, 0), Some(1.5));
        assert_eq!(ds.features.get(2, 1), Some(-1e-3));
        assert_eq!(ds.features.column(1).missing_count(), 0);
    }

    #[test]
    fn labels_follow_first_appearance() {
        let text = "f,y\n1,b\n2,a\n3,b\n";
        let ds = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.class_names, vec!["b", "a"]);
    }

    #[test]
    fn bad_token_names_the_cell() {
        let text = "f,g,y\n1,2,a\n3,oops,b\n";
        match read_csv(text.as_bytes(), &schema()) {
            Err(DataError::Parse { row, column, token }) => {
                assert_eq!((row, column.as_str(), token.as_str()), (2, "g", "oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_column() {
        let err = read_csv("a,b\n1,2\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, DataError::UnknownLabelColumn(_)));
    }

    #[test]
    fn semicolon_delimiter() {
        let s = CsvSchema {
            delimiter: b';',
            ..schema()
        };
        let ds = read_csv("a;y\n1;p\nNA;q\n".as_bytes(), &s).unwrap();
        assert_eq!(ds.features.get(1, 0), None);
    }

    #[test]
    fn imbalance_ratios() {
        let two = |a: usize, b: usize| {
            let mut l = vec![0; a];
            l.extend(vec![1; b]);
            imbalance_ratio(&l, 2).unwrap()
        };
        assert_eq!(two(50, 50), 1.0);
        assert_eq!(two(96, 4), 24.0);
        let mut l = vec![0; 10];
        l.extend(vec![1; 20]);
        l.extend(vec![2; 30]);
        assert_eq!(imbalance_ratio(&l, 3).unwrap(), 3.0);
        assert!(imbalance_ratio(&[0, 0], 2).is_err());
    }

    #[test]
    fn plain_split_is_reproducible() {
        let labels = vec![0usize; 100];
        let names = vec!["0".to_string()];
        let a = train_test_split(&labels, 1, 0.8, 7, false, &names).unwrap();
        let b = train_test_split(&labels, 1, 0.8, 7, false, &names).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train_indices.len(), 80);
        assert_eq!(a.test_indices.len(), 20);
        let c = train_test_split(&labels, 1, 0.8, 8, false, &names).unwrap();
        assert_ne!(a.train_indices, c.train_indices);
    }

    #[test]
    fn stratified_split_keeps_proportions() {
        let mut labels = vec![0usize; 90];
        labels.extend(vec![1; 10]);
        let names = vec!["a".to_string(), "b".to_string()];
        let plan = train_test_split(&labels, 2, 0.8, 3, true, &names).unwrap();
        let counts = class_counts(&plan.train_indices.iter().map(|&i| labels[i]).collect::<Vec<_>>(), 2);
        assert!(counts[0].abs_diff(72) <= 1 && counts[1].abs_diff(8) <= 1, "{counts:?}");
    }

    #[test]
    fn stratified_rejects_singleton_class() {
        let labels = vec![0, 0, 0, 1];
        let names = vec!["a".to_string(), "b".to_string()];
        let err = train_test_split(&labels, 2, 0.5, 0, true, &names).unwrap_err();
        assert!(matches!(err, DataError::ClassTooSmall { ref class, count: 1 } if class == "b"));
    }

    #[test]
    fn sorted_rows_skip_missing() {
        let col = Column::from_options(&[Some(3.0), None, Some(-1.0), Some(3.0)]);
        let m = FeatureMatrix::new(vec![col]).unwrap();
        assert_eq!(m.sorted_rows(0), &[2, 0, 3]);
    }
}
