//! Evaluation metrics and rank aggregation across methods.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric undefined: labels contain only one class")]
    SingleClass,
    #[error("length mismatch: {0} scores vs {1} labels")]
    Length(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("dataset {dataset} has {found} scores, expected {expected}")]
    Ragged {
        dataset: usize,
        expected: usize,
        found: usize,
    },
}

/// Area under the precision-recall curve as step-wise average precision.
///
/// Rows are visited in descending score order; rows sharing a score form one
/// group whose positives are credited with the precision at the group's end.
pub fn aucpr(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length(scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut group_pos = 0usize;
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                group_pos += 1;
            }
            seen += 1;
            i += 1;
        }
        tp += group_pos;
        if group_pos > 0 {
            sum += group_pos as f64 * tp as f64 / seen as f64;
        }
    }
    Ok(sum / positives as f64)
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64, MetricError> {
    if predicted.len() != truth.len() {
        return Err(MetricError::Length(predicted.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Per-dataset ranks of several methods and their aggregates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    /// `ranks[d][m]`: rank of method `m` on dataset `d`, 1 = best, ties averaged.
    pub ranks: Vec<Vec<f64>>,
    pub average_rank: Vec<f64>,
    /// `top_n[m][n - 1]`: datasets on which method `m` ranks within the top `n`.
    pub top_n: Vec<Vec<usize>>,
}

/// Ranks methods on every dataset (row of `scores`) and aggregates.
pub fn rank_methods(methods: &[String], scores: &[Vec<f64>], higher_is_better: bool) -> Result<RankTable, MetricError> {
    let m = methods.len();
    if m == 0 || scores.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut ranks = Vec::with_capacity(scores.len());
    for (d, row) in scores.iter().enumerate() {
        if row.len() != m {
            return Err(MetricError::Ragged {
                dataset: d,
                expected: m,
                found: row.len(),
            });
        }
        if let Some(i) = row.iter().position(|s| s.is_nan()) {
            return Err(MetricError::NonFinite(i));
        }
        ranks.push(average_ranks(row, higher_is_better));
    }
    let n = ranks.len() as f64;
    let average_rank = (0..m).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let top_n = (0..m)
        .map(|j| {
            (1..=m)
                .map(|k| ranks.iter().filter(|r| r[j] <= k as f64).count())
                .collect()
        })
        .collect();
    Ok(RankTable {
        methods: methods.to_vec(),
        ranks,
        average_rank,
        top_n,
    })
}

fn average_ranks(row: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        let c = row[a].total_cmp(&row[b]);
        if higher_is_better {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}
