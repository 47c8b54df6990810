//! Label corruption protocols.
//!
//! Binary tasks use symmetric pair flipping between the minority and majority
//! classes: `⌊γ · #minority⌋` minority labels become majority and the same
//! number of majority labels become minority, so class sizes are unchanged.
//! Multi-class tasks move each label `i` to `i + 1` with probability `γ`.

use std::io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

// γ·n products such as 0.29·100 land just below the integer they denote
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise rate {0} must lie in [0, 0.5)")]
    Rate(f64),
    #[error("binary protocol needs labels in {{0, 1}}, found {0}")]
    NotBinary(usize),
    #[error("multi-class protocol needs at least 3 classes, got {0}")]
    TooFewClasses(usize),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelRange { label: usize, n_classes: usize },
    #[error("cannot flip {requested} labels out of a class of {available}")]
    Budget { requested: usize, available: usize },
    #[error("flip record for index {index} does not match label {found}")]
    Replay { index: usize, found: usize },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipProtocol {
    BinaryPairflip,
    MulticlassPairflip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise rate `γ`.
    pub rate: f64,
    pub protocol: FlipProtocol,
    pub seed: u64,
    /// Whether the last class flips to class 0 under the multi-class protocol.
    pub wrap_last_class: bool,
}

impl NoiseSpec {
    pub fn binary(rate: f64, seed: u64) -> Self {
        NoiseSpec {
            rate,
            protocol: FlipProtocol::BinaryPairflip,
            seed,
            wrap_last_class: true,
        }
    }

    pub fn multiclass(rate: f64, seed: u64) -> Self {
        NoiseSpec {
            rate,
            protocol: FlipProtocol::MulticlassPairflip,
            seed,
            wrap_last_class: true,
        }
    }

    /// Protocol appropriate for the class count.
    pub fn for_classes(n_classes: usize, rate: f64, seed: u64, wrap_last_class: bool) -> Self {
        let protocol = if n_classes <= 2 {
            FlipProtocol::BinaryPairflip
        } else {
            FlipProtocol::MulticlassPairflip
        };
        NoiseSpec {
            rate,
            protocol,
            seed,
            wrap_last_class,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.rate >= 0.0 && self.rate < 0.5) {
            return Err(NoiseError::Rate(self.rate));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub sample_index: usize,
    pub old_label: usize,
    pub new_label: usize,
}

/// Every label change made by an injection, ordered by sample index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipLog {
    pub records: Vec<FlipRecord>,
}

impl FlipLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Swaps `old ↔ new` at every logged index. Applied to the original labels
    /// this reproduces the noisy labels; applied again it restores them.
    pub fn apply(&self, labels: &mut [usize]) -> Result<(), NoiseError> {
        for rec in &self.records {
            let cur = labels[rec.sample_index];
            labels[rec.sample_index] = if cur == rec.old_label {
                rec.new_label
            } else if cur == rec.new_label {
                rec.old_label
            } else {
                return Err(NoiseError::Replay {
                    index: rec.sample_index,
                    found: cur,
                });
            };
        }
        Ok(())
    }

    /// Rewrites sample indices through `map`, e.g. from a training subset back
    /// to the full dataset.
    pub fn remap(&self, map: &[usize]) -> FlipLog {
        let mut records: Vec<FlipRecord> = self
            .records
            .iter()
            .map(|r| FlipRecord {
                sample_index: map[r.sample_index],
                ..*r
            })
            .collect();
        records.sort_by_key(|r| r.sample_index);
        FlipLog { records }
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.sample_index)
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), NoiseError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sample_index", "old_label", "new_label"])?;
        for r in &self.records {
            w.serialize((r.sample_index, r.old_label, r.new_label))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<FlipLog, NoiseError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let (sample_index, old_label, new_label): (usize, usize, usize) = row?;
            records.push(FlipRecord {
                sample_index,
                old_label,
                new_label,
            });
        }
        Ok(FlipLog { records })
    }
}

/// Dispatches on the spec's protocol.
pub fn inject(labels: &[usize], n_classes: usize, spec: &NoiseSpec) -> Result<(Vec<usize>, FlipLog), NoiseError> {
    match spec.protocol {
        FlipProtocol::BinaryPairflip => inject_binary(labels, spec),
        FlipProtocol::MulticlassPairflip => inject_multiclass(labels, n_classes, spec),
    }
}

/// Number of flips per direction for a minority class of `minority` samples.
pub fn binary_flip_count(rate: f64, minority: usize) -> usize {
    (rate * minority as f64 + FLOOR_SLACK).floor() as usize
}

pub fn inject_binary(labels: &[usize], spec: &NoiseSpec) -> Result<(Vec<usize>, FlipLog), NoiseError> {
    spec.validate()?;
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(NoiseError::NotBinary(bad));
    }
    let ones: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let zeros: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    // ties make class 1 the minority
    let (mut minority, mut majority, min_label, maj_label) = if ones.len() <= zeros.len() {
        (ones, zeros, 1, 0)
    } else {
        (zeros, ones, 0, 1)
    };
    let k = binary_flip_count(spec.rate, minority.len());
    for class in [&minority, &majority] {
        if k > class.len() {
            return Err(NoiseError::Budget {
                requested: k,
                available: class.len(),
            });
        }
    }
    let mut out = labels.to_vec();
    let mut records = Vec::with_capacity(2 * k);
    if k > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        minority.shuffle(&mut rng);
        majority.shuffle(&mut rng);
        for &i in &minority[..k] {
            out[i] = maj_label;
            records.push(FlipRecord {
                sample_index: i,
                old_label: min_label,
                new_label: maj_label,
            });
        }
        for &i in &majority[..k] {
            out[i] = min_label;
            records.push(FlipRecord {
                sample_index: i,
                old_label: maj_label,
                new_label: min_label,
            });
        }
    }
    records.sort_by_key(|r| r.sample_index);
    Ok((out, FlipLog { records }))
}

pub fn inject_multiclass(
    labels: &[usize],
    n_classes: usize,
    spec: &NoiseSpec,
) -> Result<(Vec<usize>, FlipLog), NoiseError> {
    spec.validate()?;
    if n_classes < 3 {
        return Err(NoiseError::TooFewClasses(n_classes));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(NoiseError::LabelRange { label: bad, n_classes });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = labels.to_vec();
    let mut records = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        // one draw per sample keeps the stream aligned regardless of labels
        let u: f64 = rng.gen();
        if spec.rate == 0.0 || u >= spec.rate {
            continue;
        }
        let next = if label + 1 < n_classes {
            label + 1
        } else if spec.wrap_last_class {
            0
        } else {
            continue;
        };
        out[i] = next;
        records.push(FlipRecord {
            sample_index: i,
            old_label: label,
            new_label: next,
        });
    }
    Ok((out, FlipLog { records }))
}

/// The transition matrix `P` of the multi-class protocol with its row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct FlipMatrix {
    pub rows: Vec<Vec<f64>>,
    pub row_sums: Vec<f64>,
}

impl FlipMatrix {
    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        self.row_sums.iter().all(|s| (s - 1.0).abs() <= tol)
    }
}

/// `P[i][i] = 1 − γ`, `P[i][i + 1] = γ`. The last row sends `γ` to class 0
/// when `wrap` is set and has no off-diagonal entry otherwise.
pub fn expected_flip_matrix(n_classes: usize, rate: f64, wrap: bool) -> FlipMatrix {
    let mut rows = vec![vec![0.0; n_classes]; n_classes];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = 1.0 - rate;
        if i + 1 < n_classes {
            row[i + 1] += rate;
        } else if wrap {
            row[0] += rate;
        }
    }
    let row_sums = rows.iter().map(|r| r.iter().sum()).collect();
    FlipMatrix { rows, row_sums }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_labels(minority: usize, majority: usize) -> Vec<usize> {
        let mut l = vec![1; minority];
        l.extend(vec![0; majority]);
        l
    }

    #[test]
    fn binary_counts() {
        let labels = binary_labels(10, 90);
        let (noisy, log) = inject_binary(&labels, &NoiseSpec::binary(0.3, 11)).unwrap();
        let to_major = log.records.iter().filter(|r| r.old_label == 1).count();
        let to_minor = log.records.iter().filter(|r| r.old_label == 0).count();
        assert_eq!((to_major, to_minor), (3, 3));
        assert_eq!(noisy.iter().filter(|&&l| l == 1).count(), 10);
    }

    #[test]
    fn zero_rate_is_identity() {
        let labels = binary_labels(10, 90);
        let (noisy, log) = inject_binary(&labels, &NoiseSpec::binary(0.0, 1)).unwrap();
        assert_eq!(noisy, labels);
        assert!(log.is_empty());
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let (noisy, log) = inject_multiclass(&labels, 3, &NoiseSpec::multiclass(0.0, 1)).unwrap();
        assert_eq!(noisy, labels);
        assert!(log.is_empty());
    }

    #[test]
    fn floor_rounding() {
        assert_eq!(binary_flip_count(0.4, 5), 2);
        assert_eq!(binary_flip_count(0.29, 100), 29);
        assert_eq!(binary_flip_count(0.3, 7), 2);
        let labels = binary_labels(5, 20);
        let (_, log) = inject_binary(&labels, &NoiseSpec::binary(0.4, 3)).unwrap();
        assert_eq!(log.len(), 4);
    }

    #[test]
    fn replay_and_involution() {
        let labels = binary_labels(12, 40);
        let (noisy, log) = inject_binary(&labels, &NoiseSpec::binary(0.25, 5)).unwrap();
        let mut replay = labels.clone();
        log.apply(&mut replay).unwrap();
        assert_eq!(replay, noisy);
        log.apply(&mut replay).unwrap();
        assert_eq!(replay, labels);
    }

    #[test]
    fn last_class_without_wrap_never_flips() {
        let labels = vec![2usize; 500];
        let spec = NoiseSpec {
            wrap_last_class: false,
            ..NoiseSpec::multiclass(0.4, 9)
        };
        let (noisy, log) = inject_multiclass(&labels, 3, &spec).unwrap();
        assert_eq!(noisy, labels);
        assert!(log.is_empty());
        let (noisy, _) = inject_multiclass(&labels, 3, &NoiseSpec::multiclass(0.4, 9)).unwrap();
        assert!(noisy.iter().all(|&l| l == 2 || l == 0));
    }

    #[test]
    fn flip_matrices() {
        let m = expected_flip_matrix(3, 0.2, true);
        assert_eq!(
            m.rows,
            vec![vec![0.8, 0.2, 0.0], vec![0.0, 0.8, 0.2], vec![0.2, 0.0, 0.8]]
        );
        assert!(m.is_row_stochastic(1e-15));
        let id = expected_flip_matrix(4, 0.0, true);
        for (i, r) in id.rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let m = expected_flip_matrix(4, 0.1, false);
        assert!((m.row_sums[3] - 0.9).abs() < 1e-15);
        assert!(m.row_sums[..3].iter().all(|&s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(inject_binary(&[0, 1], &NoiseSpec::binary(0.5, 0)).is_err());
        assert!(inject_binary(&[0, 2], &NoiseSpec::binary(0.1, 0)).is_err());
        assert!(inject_multiclass(&[0, 1], 2, &NoiseSpec::multiclass(0.1, 0)).is_err());
    }

    #[test]
    fn flip_log_csv_round_trip() {
        let labels = binary_labels(10, 30);
        let (_, log) = inject_binary(&labels, &NoiseSpec::binary(0.3, 2)).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample_index,old_label,new_label\n"));
        assert_eq!(FlipLog::read_csv(buf.as_slice()).unwrap(), log);
    }
}
