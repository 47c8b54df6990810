//! The boosting loop, prediction and the model document.
//!
//! Raw scores start at zero and accumulate `α · f_t(x)` after every round.
//! Binary tasks keep one tree list scored against label 1. Tasks with three or
//! more classes train one list per class on `{y = k}` against the rest; all
//! trees of a round are fitted to the scores frozen at the start of that round.

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureMatrix, TabularDataset};
use crate::loss::{sigmoid, GradHessPair, LossError, LossSpec};
use crate::metrics::{accuracy, aucpr};
use crate::tree::{grow_tree, Tree, TreeConfig, TreeError};

/// Version tag written into every model document.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BoosterError {
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("invalid booster parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("training data is empty")]
    Empty,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelRange { label: usize, n_classes: usize },
    #[error("non-finite gradient or Hessian at round {round}, sample {sample}")]
    Numeric { round: usize, sample: usize },
    #[error("model expects {expected} features, input has {found}")]
    Schema { expected: usize, found: usize },
    #[error("unsupported model document version {found} (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("malformed model document: {0}")]
    Malformed(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoosterConfig {
    pub loss: LossSpec,
    pub tree: TreeConfig,
    /// `α` in `(0, 1]`.
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub n_classes: usize,
    pub seed: u64,
    /// Stop after this many rounds without validation improvement.
    pub early_stopping_rounds: Option<usize>,
    /// Fraction of rows sampled without replacement for each round.
    pub subsample: f64,
    /// Train one list per class even when there are only two classes.
    #[serde(default)]
    pub one_vs_all: bool,
}

impl Default for BoosterConfig {
    fn default() -> Self {
        BoosterConfig {
            loss: LossSpec::cce(),
            tree: TreeConfig::default(),
            learning_rate: 0.1,
            n_rounds: 100,
            n_classes: 2,
            seed: 0,
            early_stopping_rounds: None,
            subsample: 1.0,
            one_vs_all: false,
        }
    }
}

impl BoosterConfig {
    pub fn validate(&self) -> Result<(), BoosterError> {
        self.loss.validate()?;
        self.tree.validate()?;
        let bad = |name, reason: &str| {
            Err(BoosterError::Parameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", "must lie in (0, 1]");
        }
        if self.n_rounds == 0 {
            return bad("n_rounds", "must be at least 1");
        }
        if self.n_classes < 2 {
            return bad("n_classes", "must be at least 2");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample", "must lie in (0, 1]");
        }
        if self.early_stopping_rounds == Some(0) {
            return bad("early_stopping_rounds", "must be at least 1 when set");
        }
        Ok(())
    }

    /// Number of tree lists the model keeps.
    pub fn n_lists(&self) -> usize {
        if self.n_classes == 2 && !self.one_vs_all {
            1
        } else {
            self.n_classes
        }
    }
}

/// A trained ensemble. Immutable after training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoosterModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub learning_rate: f64,
    pub init_score: f64,
    pub loss: LossSpec,
    pub config: BoosterConfig,
    /// One ordered list per class, or a single list for binary tasks.
    pub trees: Vec<Vec<Tree>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    #[serde(flatten)]
    model: BoosterModel,
}

/// Per-round training record. `round` is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub train_loss: f64,
    pub train_metric: f64,
    pub valid_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Training {
    pub model: BoosterModel,
    pub log: Vec<RoundLog>,
    /// Round whose validation metric was best, when a validation set was given.
    pub best_round: Option<usize>,
}

/// Task metric: AUCPR for two classes, accuracy otherwise. `scores` holds
/// one raw-score row per sample.
pub fn task_metric(n_classes: usize, scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    if n_classes == 2 {
        let pos: Vec<f64> = scores.iter().map(|s| positive_score(s)).collect();
        binary_metric(&pos, labels)
    } else {
        let pred: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
        accuracy(&pred, labels).unwrap_or(f64::NAN)
    }
}

/// [`task_metric`] on scores stored one list per class (training layout).
fn list_metric(n_classes: usize, lists: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = labels.len();
    if n_classes == 2 {
        let pos: Vec<f64> = if lists.len() == 1 {
            lists[0].clone()
        } else {
            (0..n).map(|i| lists[1][i] - lists[0][i]).collect()
        };
        binary_metric(&pos, labels)
    } else {
        let pred: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = 0;
                for k in 1..lists.len() {
                    if lists[k][i] > lists[best][i] {
                        best = k;
                    }
                }
                best
            })
            .collect();
        accuracy(&pred, labels).unwrap_or(f64::NAN)
    }
}

fn binary_metric(pos: &[f64], labels: &[usize]) -> f64 {
    let truth: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    aucpr(pos, &truth).unwrap_or(f64::NAN)
}

/// Ranking score for class 1 from a raw-score row.
fn positive_score(raw: &[f64]) -> f64 {
    if raw.len() == 1 {
        raw[0]
    } else {
        raw[1] - raw[0]
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn fit(data: &TabularDataset, config: &BoosterConfig) -> Result<BoosterModel, BoosterError> {
    Ok(train(data, None, config)?.model)
}

/// Runs the boosting loop, logging training loss and metric every round and,
/// when `valid` is given, the validation metric.
///
/// With `early_stopping_rounds` and a validation set, training stops once the
/// metric has not improved for that many rounds, and the model is truncated to
/// the best round.
pub fn train(
    data: &TabularDataset,
    valid: Option<&TabularDataset>,
    config: &BoosterConfig,
) -> Result<Training, BoosterError> {
    if data.n_samples() > 0 && data.labels.iter().all(|&l| l == data.labels[0]) {
        return Err(BoosterError::SingleClass);
    }
    train_unchecked(data, valid, config)
}

/// [`train`] without the requirement that two classes be present. Useful for
/// inspecting single Newton steps on degenerate data.
pub fn train_unchecked(
    data: &TabularDataset,
    valid: Option<&TabularDataset>,
    config: &BoosterConfig,
) -> Result<Training, BoosterError> {
    train_recorded(data, valid, config, Record::FULL)
}

/// What the boosting loop logs besides the model itself.
#[derive(Clone, Copy, Debug)]
pub struct Record<'a> {
    /// Training loss and metric every round (`NaN` when off).
    pub train: bool,
    /// Rounds at which the validation metric is computed; `None` for all.
    pub valid_at: Option<&'a [usize]>,
}

impl Record<'_> {
    pub const FULL: Record<'static> = Record {
        train: true,
        valid_at: None,
    };
}

/// [`train_unchecked`] with a reduced log, for callers such as grid search
/// that only read the validation metric at a few rounds. Early stopping
/// only sees the rounds where the validation metric is computed.
pub fn train_recorded(
    data: &TabularDataset,
    valid: Option<&TabularDataset>,
    config: &BoosterConfig,
    record: Record<'_>,
) -> Result<Training, BoosterError> {
    config.validate()?;
    let n = data.n_samples();
    if n == 0 {
        return Err(BoosterError::Empty);
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= config.n_classes) {
        return Err(BoosterError::LabelRange {
            label: bad,
            n_classes: config.n_classes,
        });
    }
    if let Some(v) = valid {
        if v.n_features() != data.n_features() {
            return Err(BoosterError::Schema {
                expected: data.n_features(),
                found: v.n_features(),
            });
        }
    }

    let n_lists = config.n_lists();
    let binary = n_lists == 1;
    let alpha = config.learning_rate;
    let init_score = 0.0;
    // targets[k][i]: whether sample i belongs to list k's positive class
    let targets: Vec<Vec<bool>> = if binary {
        vec![data.labels.iter().map(|&l| l == 1).collect()]
    } else {
        (0..n_lists)
            .map(|k| data.labels.iter().map(|&l| l == k).collect())
            .collect()
    };
    let mut scores = vec![vec![init_score; n]; n_lists];
    let mut valid_scores = valid.map(|v| vec![vec![init_score; v.n_samples()]; n_lists]);
    let mut trees: Vec<Vec<Tree>> = vec![Vec::with_capacity(config.n_rounds); n_lists];
    let mut log: Vec<RoundLog> = Vec::with_capacity(config.n_rounds);
    let mut gh = vec![GradHessPair::default(); n];
    let all_rows: Vec<usize> = (0..n).collect();
    let mut best: Option<(usize, f64)> = None;

    for round in 1..=config.n_rounds {
        let rows = sample_rows(n, config.subsample, config.seed, round);
        let rows = rows.as_deref().unwrap_or(&all_rows);
        let mut round_trees = Vec::with_capacity(n_lists);
        // the loss at the current scores is the previous round's training loss
        let mut previous_loss = 0.0;
        for k in 0..n_lists {
            let mut sum = 0.0;
            for i in 0..n {
                let (value, pair) = config.loss.value_grad_hess_unchecked(targets[k][i], scores[k][i]);
                if !(pair.g.is_finite() && pair.h.is_finite()) {
                    return Err(BoosterError::Numeric { round, sample: i });
                }
                sum += value;
                gh[i] = pair;
            }
            previous_loss += sum / n as f64;
            round_trees.push(grow_tree(&data.features, rows, &gh, &config.tree));
        }
        if let Some(last) = log.last_mut().filter(|_| record.train) {
            last.train_loss = previous_loss;
        }
        for (k, tree) in round_trees.into_iter().enumerate() {
            for (i, z) in scores[k].iter_mut().enumerate() {
                *z += alpha * tree.predict_matrix_row(&data.features, i);
            }
            if let (Some(vs), Some(v)) = (valid_scores.as_mut(), valid) {
                for (i, z) in vs[k].iter_mut().enumerate() {
                    *z += alpha * tree.predict_matrix_row(&v.features, i);
                }
            }
            trees[k].push(tree);
        }

        let train_metric = if record.train {
            list_metric(config.n_classes, &scores, &data.labels)
        } else {
            f64::NAN
        };
        let valid_metric = match (valid_scores.as_ref(), valid) {
            (Some(vs), Some(v)) if record.valid_at.is_none_or(|at| at.contains(&round)) => {
                Some(list_metric(config.n_classes, vs, &v.labels))
            }
            _ => None,
        };
        log.push(RoundLog {
            round,
            train_loss: f64::NAN,
            train_metric,
            valid_metric,
        });
        if let Some(m) = valid_metric {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((round, m));
            }
            if let (Some(patience), Some((best_round, _))) = (config.early_stopping_rounds, best) {
                if round - best_round >= patience {
                    break;
                }
            }
        }
    }

    if let Some(last) = log.last_mut().filter(|_| record.train) {
        last.train_loss = mean_loss(&config.loss, &targets, &scores);
    }
    if config.early_stopping_rounds.is_some() {
        if let Some((best_round, _)) = best {
            for list in &mut trees {
                list.truncate(best_round);
            }
        }
    }
    Ok(Training {
        model: BoosterModel {
            n_classes: config.n_classes,
            n_features: data.n_features(),
            learning_rate: alpha,
            init_score,
            loss: config.loss,
            config: *config,
            trees,
        },
        log,
        best_round: best.map(|(r, _)| r),
    })
}

/// Rows used in `round`, or `None` for all rows.
fn sample_rows(n: usize, fraction: f64, seed: u64, round: usize) -> Option<Vec<usize>> {
    if fraction >= 1.0 {
        return None;
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64);
    let mut rows = index::sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    Some(rows)
}

fn mean_loss(loss: &LossSpec, targets: &[Vec<bool>], scores: &[Vec<f64>]) -> f64 {
    let n = scores[0].len() as f64;
    targets
        .iter()
        .zip(scores)
        .map(|(t, s)| {
            t.iter()
                .zip(s)
                .map(|(&y, &z)| loss.value_at_score_unchecked(y, z))
                .sum::<f64>()
                / n
        })
        .sum()
}

impl BoosterModel {
    pub fn n_lists(&self) -> usize {
        self.trees.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }

    fn check_schema(&self, features: &FeatureMatrix) -> Result<(), BoosterError> {
        if features.n_features() != self.n_features {
            return Err(BoosterError::Schema {
                expected: self.n_features,
                found: features.n_features(),
            });
        }
        Ok(())
    }

    /// Raw scores of one row, one entry per tree list.
    pub fn predict_raw_row(&self, row: &[Option<f64>]) -> Result<Vec<f64>, BoosterError> {
        if row.len() != self.n_features {
            return Err(BoosterError::Schema {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok(self
            .trees
            .iter()
            .map(|list| {
                let mut z = self.init_score;
                for t in list {
                    z += self.learning_rate * t.predict_row(row);
                }
                z
            })
            .collect())
    }

    /// Raw scores `z⁰ + α Σ f_j(x)` for every row.
    pub fn predict_raw(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>, BoosterError> {
        self.check_schema(features)?;
        let n = features.n_rows();
        let mut out = vec![vec![self.init_score; self.n_lists()]; n];
        for (k, list) in self.trees.iter().enumerate() {
            for t in list {
                for (i, row) in out.iter_mut().enumerate() {
                    row[k] += self.learning_rate * t.predict_matrix_row(features, i);
                }
            }
        }
        Ok(out)
    }

    /// Class probabilities. Binary: `[1 − σ(z), σ(z)]`. Otherwise each class's
    /// sigmoid divided by their sum.
    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>, BoosterError> {
        Ok(self.predict_raw(features)?.iter().map(|z| probabilities(z)).collect())
    }

    /// Predicted labels: argmax of the raw scores (binary: `σ(z) > 0.5`).
    pub fn predict_labels(&self, features: &FeatureMatrix) -> Result<Vec<usize>, BoosterError> {
        Ok(self.predict_raw(features)?.iter().map(|z| label_from_raw(z)).collect())
    }

    /// AUCPR or accuracy of the model on a dataset.
    pub fn evaluate(&self, data: &TabularDataset) -> Result<f64, BoosterError> {
        let raw = self.predict_raw(&data.features)?;
        Ok(task_metric(self.n_classes, &raw, &data.labels))
    }

    pub fn to_json(&self) -> Result<String, BoosterError> {
        let doc = ModelDocument {
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| BoosterError::Malformed(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<BoosterModel, BoosterError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BoosterError::Malformed(e.to_string()))?;
        let version = value
            .get("version")
            .ok_or_else(|| BoosterError::Malformed("missing `version`".to_string()))?;
        let found = version
            .as_u64()
            .ok_or_else(|| BoosterError::Malformed(format!("bad version tag {version}")))?;
        if found != u64::from(MODEL_VERSION) {
            return Err(BoosterError::Version {
                found,
                expected: MODEL_VERSION,
            });
        }
        let doc: ModelDocument = serde_json::from_value(value).map_err(|e| BoosterError::Malformed(e.to_string()))?;
        let model = doc.model;
        if model.trees.len() != model.config.n_lists() || model.n_classes != model.config.n_classes {
            return Err(BoosterError::Malformed(
                "tree lists disagree with n_classes".to_string(),
            ));
        }
        if model.trees.iter().any(|list| list.iter().any(|t| !t.is_well_formed())) {
            return Err(BoosterError::Malformed("ill-formed tree".to_string()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BoosterError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BoosterModel, BoosterError> {
        BoosterModel::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn probabilities(raw: &[f64]) -> Vec<f64> {
    if raw.len() == 1 {
        let p = sigmoid(raw[0]);
        vec![sigmoid(-raw[0]), p]
    } else {
        let s: Vec<f64> = raw.iter().map(|&z| sigmoid(z)).collect();
        let total: f64 = s.iter().sum();
        s.iter().map(|v| v / total).collect()
    }
}

pub fn label_from_raw(raw: &[f64]) -> usize {
    if raw.len() == 1 {
        usize::from(raw[0] > 0.0)
    } else {
        argmax(raw)
    }
}
