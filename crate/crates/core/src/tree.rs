//! Regression trees grown on per-sample gradient/Hessian pairs.
//!
//! Split search is exact and greedy: every midpoint between consecutive
//! distinct present values of every feature is scored, with missing values
//! tried on both sides. Leaves are expanded best-first. Three rules stop a
//! split: too few samples in a child, a child Hessian sum below `ε`, and a
//! gain below `δ`. Because only the Hessian *sum* is checked, individual
//! samples may carry non-positive Hessians.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::loss::GradHessPair;

/// Denominators `Σh + λ` smaller than this in magnitude are treated as degenerate.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("degenerate denominator: sum of Hessians plus lambda is {0}")]
    DegenerateDenominator(f64),
    #[error("invalid tree parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_samples_leaf: usize,
    /// `ε`: a child whose Hessian sum falls below this is not created.
    pub min_sum_hessian: f64,
    /// `δ`: minimum gain for a split to be accepted.
    pub min_gain: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            lambda: 1.0,
            min_samples_leaf: 1,
            min_sum_hessian: 1e-3,
            min_gain: 0.0,
            max_depth: 6,
            max_leaves: 31,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |name, reason| Err(TreeError::Parameter { name, reason });
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", "must be a finite value >= 0");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf", "must be at least 1");
        }
        if !(self.min_sum_hessian.is_finite() && self.min_sum_hessian >= 0.0) {
            return bad("min_sum_hessian", "must be a finite value >= 0");
        }
        if !(self.min_gain.is_finite() && self.min_gain >= 0.0) {
            return bad("min_gain", "must be a finite value >= 0");
        }
        if self.max_depth == 0 {
            return bad("max_depth", "must be at least 1");
        }
        if self.max_leaves == 0 {
            return bad("max_leaves", "must be at least 1");
        }
        Ok(())
    }
}

/// Gradient sum, Hessian sum and sample count of a set of rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub sum_grad: f64,
    pub sum_hess: f64,
    pub count: usize,
}

impl NodeStats {
    pub fn of(rows: impl IntoIterator<Item = usize>, gh: &[GradHessPair]) -> Self {
        let mut s = NodeStats::default();
        for r in rows {
            s.push(gh[r]);
        }
        s
    }

    #[inline]
    fn push(&mut self, p: GradHessPair) {
        self.sum_grad += p.g;
        self.sum_hess += p.h;
        self.count += 1;
    }

    #[inline]
    fn add(self, o: NodeStats) -> NodeStats {
        NodeStats {
            sum_grad: self.sum_grad + o.sum_grad,
            sum_hess: self.sum_hess + o.sum_hess,
            count: self.count + o.count,
        }
    }

    #[inline]
    fn sub(self, o: NodeStats) -> NodeStats {
        NodeStats {
            sum_grad: self.sum_grad - o.sum_grad,
            sum_hess: self.sum_hess - o.sum_hess,
            count: self.count - o.count,
        }
    }
}

/// Newton-optimal leaf output `−G / (H + λ)`.
pub fn leaf_weight(sum_g: f64, sum_h: f64, lambda: f64) -> Result<f64, TreeError> {
    let den = denominator(sum_h, lambda)?;
    Ok(-sum_g / den)
}

/// Optimal quadratic objective of a leaf, `−½ G² / (H + λ)`.
pub fn leaf_objective(sum_g: f64, sum_h: f64, lambda: f64) -> Result<f64, TreeError> {
    let den = denominator(sum_h, lambda)?;
    Ok(-0.5 * sum_g * sum_g / den)
}

#[inline]
fn denominator(sum_h: f64, lambda: f64) -> Result<f64, TreeError> {
    let den = sum_h + lambda;
    if den.abs() < DENOMINATOR_FLOOR || den.is_nan() {
        Err(TreeError::DegenerateDenominator(den))
    } else {
        Ok(den)
    }
}

/// Reduction of the quadratic objective when `parent` is split into `left`
/// and `right`. `None` when any denominator is degenerate.
pub fn split_gain(left: NodeStats, right: NodeStats, parent: NodeStats, lambda: f64) -> Option<f64> {
    let term = |s: NodeStats| -> Option<f64> {
        let den = denominator(s.sum_hess, lambda).ok()?;
        Some(s.sum_grad * s.sum_grad / den)
    };
    Some(0.5 * (term(left)? + term(right)? - term(parent)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    /// Where rows with a missing value go.
    pub default_left: bool,
    pub left: NodeStats,
    pub right: NodeStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    #[serde(flatten)]
    pub kind: NodeKind,
    pub depth: usize,
    pub stats: NodeStats,
}

/// Binary tree stored as a node array with the root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn single_leaf(weight: f64, stats: NodeStats) -> Tree {
        Tree {
            nodes: vec![Node {
                kind: NodeKind::Leaf { weight },
                depth: 0,
                stats,
            }],
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Index of the leaf reached by a row whose features are read through `value`.
    pub fn leaf_index(&self, value: impl Fn(usize) -> Option<f64>) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx].kind {
                NodeKind::Leaf { .. } => return idx,
                NodeKind::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match value(feature) {
                        Some(v) => v <= threshold,
                        None => default_left,
                    };
                    idx = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, value: impl Fn(usize) -> Option<f64>) -> f64 {
        match self.nodes[self.leaf_index(value)].kind {
            NodeKind::Leaf { weight } => weight,
            NodeKind::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn predict_row(&self, row: &[Option<f64>]) -> f64 {
        self.predict(|f| row[f])
    }

    pub fn predict_matrix_row(&self, matrix: &FeatureMatrix, row: usize) -> f64 {
        self.predict(|f| matrix.get(row, f))
    }

    /// Structural check: every child index is in range, referenced once, and
    /// deeper than its parent.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        if self.nodes.is_empty() {
            return false;
        }
        seen[0] = true;
        for node in &self.nodes {
            if let NodeKind::Split { left, right, .. } = node.kind {
                for child in [left, right] {
                    if child >= self.nodes.len() || seen[child] || self.nodes[child].depth != node.depth + 1 {
                        return false;
                    }
                    seen[child] = true;
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Rows of one node with each feature's present rows in ascending value order.
struct NodeRows {
    rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
}

impl NodeRows {
    fn root(matrix: &FeatureMatrix, rows: &[usize]) -> NodeRows {
        let n = matrix.n_rows();
        if rows.len() == n && rows.iter().enumerate().all(|(i, &r)| i == r) {
            return NodeRows {
                rows: (0..n as u32).collect(),
                sorted: (0..matrix.n_features())
                    .map(|f| matrix.sorted_rows(f).to_vec())
                    .collect(),
            };
        }
        let mut member = vec![false; matrix.n_rows()];
        for &r in rows {
            member[r] = true;
        }
        let sorted = (0..matrix.n_features())
            .map(|f| {
                matrix
                    .sorted_rows(f)
                    .iter()
                    .copied()
                    .filter(|&r| member[r as usize])
                    .collect()
            })
            .collect();
        NodeRows {
            rows: rows.iter().map(|&r| r as u32).collect(),
            sorted,
        }
    }

    /// Stable partition by `goes_left`.
    fn partition(self, goes_left: &[bool]) -> (NodeRows, NodeRows) {
        let split = |v: Vec<u32>| -> (Vec<u32>, Vec<u32>) { v.into_iter().partition(|&r| goes_left[r as usize]) };
        let (lr, rr) = split(self.rows);
        let mut ls = Vec::with_capacity(self.sorted.len());
        let mut rs = Vec::with_capacity(self.sorted.len());
        for s in self.sorted {
            let (a, b) = split(s);
            ls.push(a);
            rs.push(b);
        }
        (NodeRows { rows: lr, sorted: ls }, NodeRows { rows: rr, sorted: rs })
    }
}

/// Best split of one feature for a node, or `None` when no threshold passes
/// the sample-count, Hessian-sum and gain rules.
fn best_split_for_feature(
    feature: usize,
    matrix: &FeatureMatrix,
    order: &[u32],
    node: NodeStats,
    gh: &[GradHessPair],
    config: &TreeConfig,
) -> Option<SplitCandidate> {
    if order.len() < 2 {
        return None;
    }
    let column = matrix.column(feature);
    let present = NodeStats::of(order.iter().map(|&r| r as usize), gh);
    let missing = node.sub(present);
    let has_missing = missing.count > 0;
    let Ok(parent_den) = denominator(node.sum_hess, config.lambda) else {
        return None;
    };
    // same arithmetic as `split_gain`, with the parent term hoisted
    let parent_term = node.sum_grad * node.sum_grad / parent_den;
    let gain_of = |left: NodeStats, right: NodeStats| -> Option<f64> {
        if left.count < config.min_samples_leaf
            || right.count < config.min_samples_leaf
            || !(left.sum_hess >= config.min_sum_hessian)
            || !(right.sum_hess >= config.min_sum_hessian)
        {
            return None;
        }
        let dl = left.sum_hess + config.lambda;
        let dr = right.sum_hess + config.lambda;
        if !(dl.abs() >= DENOMINATOR_FLOOR) || !(dr.abs() >= DENOMINATOR_FLOOR) {
            return None;
        }
        let gain = 0.5 * (left.sum_grad * left.sum_grad / dl + right.sum_grad * right.sum_grad / dr - parent_term);
        (gain >= config.min_gain).then_some(gain)
    };

    let mut best: Option<SplitCandidate> = None;
    let mut best_gain = f64::NEG_INFINITY;
    let mut consider = |threshold: f64, default_left: bool, left: NodeStats, right: NodeStats| {
        if let Some(gain) = gain_of(left, right) {
            if best.is_none() || gain > best_gain {
                best_gain = gain;
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                    default_left,
                    left,
                    right,
                });
            }
        }
    };
    let values = column.values();
    let mut prefix = NodeStats::default();
    let mut lo = values[order[0] as usize];
    for i in 1..order.len() {
        prefix.push(gh[order[i - 1] as usize]);
        let hi = values[order[i] as usize];
        if !(lo < hi) {
            lo = hi;
            continue;
        }
        let mut threshold = lo + (hi - lo) / 2.0;
        if !(threshold < hi) {
            threshold = lo;
        }
        lo = hi;
        let rest = present.sub(prefix);
        if has_missing {
            consider(threshold, true, prefix.add(missing), rest);
            consider(threshold, false, prefix, rest.add(missing));
        } else {
            consider(threshold, true, prefix, rest);
        }
    }
    best
}

fn best_split_for_node(
    matrix: &FeatureMatrix,
    node_rows: &NodeRows,
    stats: NodeStats,
    gh: &[GradHessPair],
    config: &TreeConfig,
) -> Option<SplitCandidate> {
    if stats.count < 2 * config.min_samples_leaf {
        return None;
    }
    let mut best: Option<SplitCandidate> = None;
    for (feature, order) in node_rows.sorted.iter().enumerate() {
        if let Some(c) = best_split_for_feature(feature, matrix, order, stats, gh, config) {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    best
}

/// Highest-gain admissible split of `rows` over all features.
///
/// Ties are resolved toward the lower feature index, then the lower
/// threshold, then missing-goes-left. `gh` is indexed by matrix row.
pub fn best_split(
    matrix: &FeatureMatrix,
    rows: &[usize],
    gh: &[GradHessPair],
    config: &TreeConfig,
) -> Option<SplitCandidate> {
    let node_rows = NodeRows::root(matrix, rows);
    let stats = NodeStats::of(rows.iter().copied(), gh);
    best_split_for_node(matrix, &node_rows, stats, gh, config)
}

struct OpenLeaf {
    node: usize,
    rows: NodeRows,
    candidate: Option<SplitCandidate>,
}

/// Grows one tree best-first on the given rows. `gh` is indexed by matrix row.
///
/// The root becomes a single leaf when it holds fewer than
/// `2 · min_samples_leaf` rows or its Hessian sum is below `ε`.
pub fn grow_tree(matrix: &FeatureMatrix, rows: &[usize], gh: &[GradHessPair], config: &TreeConfig) -> Tree {
    let root_stats = NodeStats::of(rows.iter().copied(), gh);
    let mut nodes = vec![Node {
        kind: NodeKind::Leaf { weight: 0.0 },
        depth: 0,
        stats: root_stats,
    }];
    let root_rows = NodeRows::root(matrix, rows);
    let splittable =
        |stats: NodeStats, depth: usize| depth < config.max_depth && stats.sum_hess >= config.min_sum_hessian;
    let candidate = if splittable(root_stats, 0) && config.max_leaves > 1 {
        best_split_for_node(matrix, &root_rows, root_stats, gh, config)
    } else {
        None
    };
    let mut open = vec![OpenLeaf {
        node: 0,
        rows: root_rows,
        candidate,
    }];
    let mut n_leaves = 1;
    let mut goes_left = vec![false; matrix.n_rows()];

    while n_leaves < config.max_leaves {
        // highest gain, ties to the earliest node
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.candidate.map(|c| (i, l.node, c.gain)))
            .max_by(|a, b| a.2.total_cmp(&b.2).then(b.1.cmp(&a.1)))
            .map(|(i, ..)| i);
        let Some(pick) = pick else { break };
        let leaf = open.swap_remove(pick);
        let split = leaf.candidate.expect("picked leaf has a candidate");
        let column = matrix.column(split.feature);
        for &r in &leaf.rows.rows {
            let r = r as usize;
            goes_left[r] = match column.get(r) {
                Some(v) => v <= split.threshold,
                None => split.default_left,
            };
        }
        let (left_rows, right_rows) = leaf.rows.partition(&goes_left);
        let depth = nodes[leaf.node].depth + 1;
        let left_id = nodes.len();
        let right_id = left_id + 1;
        for (rows, id) in [(left_rows, left_id), (right_rows, right_id)] {
            let stats = NodeStats::of(rows.rows.iter().map(|&r| r as usize), gh);
            let candidate = if splittable(stats, depth) {
                best_split_for_node(matrix, &rows, stats, gh, config)
            } else {
                None
            };
            nodes.push(Node {
                kind: NodeKind::Leaf { weight: 0.0 },
                depth,
                stats,
            });
            open.push(OpenLeaf {
                node: id,
                rows,
                candidate,
            });
        }
        nodes[leaf.node].kind = NodeKind::Split {
            feature: split.feature,
            threshold: split.threshold,
            default_left: split.default_left,
            left: left_id,
            right: right_id,
            gain: split.gain,
        };
        n_leaves += 1;
    }

    for node in &mut nodes {
        if let NodeKind::Leaf { weight } = &mut node.kind {
            *weight = leaf_weight(node.stats.sum_grad, node.stats.sum_hess, config.lambda).unwrap_or(0.0);
        }
    }
    Tree { nodes }
}

/// Split scenario parameterised by fractions of the parent aggregates:
/// `G_L = μG`, `H_L = νH`, perturbed Hessian `Ĥ = θH` with `Ĥ_L = τĤ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainScenario {
    pub g: f64,
    pub h: f64,
    pub mu: f64,
    pub nu: f64,
    pub theta: f64,
    pub tau: f64,
    pub lambda: f64,
}

/// Gain (without the ½ factor) of the scenario's split under the perturbed
/// Hessian: `G²(μ²/(τθH+λ) + (1−μ)²/((1−τ)θH+λ) − 1/(θH+λ))`.
pub fn appendix_gain(s: &GainScenario) -> Result<f64, TreeError> {
    let hh = s.theta * s.h;
    let left = denominator(s.tau * hh, s.lambda)?;
    let right = denominator((1.0 - s.tau) * hh, s.lambda)?;
    let parent = denominator(hh, s.lambda)?;
    let mu2 = s.mu * s.mu;
    let rest2 = (1.0 - s.mu) * (1.0 - s.mu);
    Ok(s.g * s.g * (mu2 / left + rest2 / right - 1.0 / parent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(g: &[f64], h: &[f64]) -> Vec<GradHessPair> {
        g.iter().zip(h).map(|(&g, &h)| GradHessPair::new(g, h)).collect()
    }

    fn open_config() -> TreeConfig {
        TreeConfig {
            lambda: 0.0,
            min_samples_leaf: 1,
            min_sum_hessian: 0.0,
            min_gain: 0.0,
            max_depth: 6,
            max_leaves: 31,
        }
    }

    fn column(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_dense_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn leaf_weight_examples() {
        assert_eq!(leaf_weight(1.0, 1.0, 0.0).unwrap(), -1.0);
        assert_eq!(leaf_weight(0.0, 5.0, 1.0).unwrap(), 0.0);
        assert_eq!(leaf_weight(-2.0, 3.0, 1.0).unwrap(), 0.5);
        assert!(leaf_weight(1.0, 0.0, 0.0).is_err());
        assert!(leaf_weight(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn leaf_objective_examples() {
        assert_eq!(leaf_objective(2.0, 1.0, 1.0).unwrap(), -1.0);
        assert_eq!(leaf_objective(0.0, 3.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn four_sample_split() {
        let m = column(&[1.0, 2.0, 3.0, 4.0]);
        let gh = pairs(&[-1.0, -1.0, 1.0, 1.0], &[1.0; 4]);
        let c = best_split(&m, &[0, 1, 2, 3], &gh, &open_config()).unwrap();
        assert_eq!(c.feature, 0);
        assert_eq!(c.threshold, 2.5);
        assert_eq!(c.gain, 2.0);
        assert_eq!(c.left.count + c.right.count, 4);
    }

    #[test]
    fn four_sample_stump() {
        let m = column(&[1.0, 2.0, 3.0, 4.0]);
        let gh = pairs(&[-1.0, -1.0, 1.0, 1.0], &[1.0; 4]);
        let cfg = TreeConfig {
            max_leaves: 2,
            ..open_config()
        };
        let t = grow_tree(&m, &[0, 1, 2, 3], &gh, &cfg);
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.predict_row(&[Some(1.0)]), 1.0);
        assert_eq!(t.predict_row(&[Some(4.0)]), -1.0);
    }

    #[test]
    fn symmetric_aggregates_give_no_split_with_positive_delta() {
        let m = column(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let gh = pairs(&[0.5; 5], &[0.25; 5]);
        let c = best_split(&m, &[0, 1, 2, 3, 4], &gh, &open_config()).unwrap();
        assert_eq!(c.gain, 0.0);
        let cfg = TreeConfig {
            min_gain: 1e-9,
            ..open_config()
        };
        assert!(best_split(&m, &[0, 1, 2, 3, 4], &gh, &cfg).is_none());
    }

    #[test]
    fn negative_hessian_child_is_excluded() {
        // isolating rows 0..2 has the largest gain, but their Hessian sum is negative
        let m = column(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let gh = pairs(&[-3.0, -3.0, 1.0, 1.0, 1.0, 1.0], &[-0.5, 0.2, 1.0, 1.0, 1.0, 1.0]);
        let cfg = TreeConfig {
            min_sum_hessian: 0.1,
            lambda: 1.0,
            ..open_config()
        };
        let rows = [0, 1, 2, 3, 4, 5];
        let c = best_split(&m, &rows, &gh, &cfg).unwrap();
        assert_eq!(c.threshold, 3.5);
        let excluded = split_gain(
            NodeStats::of([0, 1], &gh),
            NodeStats::of([2, 3, 4, 5], &gh),
            NodeStats::of(rows, &gh),
            1.0,
        )
        .unwrap();
        assert!(excluded > c.gain);
    }

    #[test]
    fn single_sample_tree() {
        let m = column(&[7.0]);
        let gh = pairs(&[-0.5], &[0.25]);
        let t = grow_tree(
            &m,
            &[0],
            &gh,
            &TreeConfig {
                lambda: 0.5,
                ..open_config()
            },
        );
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[Some(7.0)]), 0.5 / 0.75);
    }

    #[test]
    fn all_missing_feature_is_never_used() {
        let rows: Vec<Vec<Option<f64>>> = (0..8).map(|i| vec![None, Some(i as f64)]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let gh = pairs(&[-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0], &[1.0; 8]);
        let t = grow_tree(&m, &(0..8).collect::<Vec<_>>(), &gh, &open_config());
        assert!(t.n_leaves() >= 2);
        for n in &t.nodes {
            if let NodeKind::Split { feature, .. } = n.kind {
                assert_eq!(feature, 1);
            }
        }
    }

    #[test]
    fn missing_values_take_the_better_side() {
        // rows 4, 5 are missing and pull like the low group
        let cells = [Some(1.0), Some(2.0), Some(3.0), Some(4.0), None, None];
        let m = FeatureMatrix::from_rows(&cells.iter().map(|&c| vec![c]).collect::<Vec<_>>()).unwrap();
        let gh = pairs(&[-1.0, -1.0, 1.0, 1.0, -1.0, -1.0], &[1.0; 6]);
        let c = best_split(&m, &[0, 1, 2, 3, 4, 5], &gh, &open_config()).unwrap();
        assert_eq!(c.threshold, 2.5);
        assert!(c.default_left);
        assert_eq!(c.left.count, 4);
        let t = grow_tree(
            &m,
            &[0, 1, 2, 3, 4, 5],
            &gh,
            &TreeConfig {
                max_leaves: 2,
                ..open_config()
            },
        );
        assert_eq!(t.predict_row(&[None]), t.predict_row(&[Some(1.0)]));
    }

    #[test]
    fn root_below_hessian_floor_is_a_leaf() {
        let m = column(&[1.0, 2.0, 3.0, 4.0]);
        let gh = pairs(&[-1.0, -1.0, 1.0, 1.0], &[0.1, -0.2, 0.05, 0.0]);
        let t = grow_tree(
            &m,
            &[0, 1, 2, 3],
            &gh,
            &TreeConfig {
                min_sum_hessian: 1e-3,
                lambda: 1.0,
                ..open_config()
            },
        );
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn depth_and_leaf_caps() {
        let vals: Vec<f64> = (0..64).map(f64::from).collect();
        let m = column(&vals);
        let gh: Vec<GradHessPair> = (0..64)
            .map(|i| GradHessPair::new(((i * 37) % 11) as f64 - 5.0, 1.0))
            .collect();
        let rows: Vec<usize> = (0..64).collect();
        let t = grow_tree(
            &m,
            &rows,
            &gh,
            &TreeConfig {
                max_depth: 2,
                ..open_config()
            },
        );
        assert!(t.depth() <= 2 && t.n_leaves() <= 4);
        let t = grow_tree(
            &m,
            &rows,
            &gh,
            &TreeConfig {
                max_leaves: 5,
                max_depth: 10,
                ..open_config()
            },
        );
        assert_eq!(t.n_leaves(), 5);
        assert!(t.is_well_formed());
    }

    #[test]
    fn perturbed_gain_examples() {
        let s = GainScenario {
            g: 2.0,
            h: 4.0,
            mu: 0.5,
            nu: 0.5,
            theta: 0.5,
            tau: 0.25,
            lambda: 0.0,
        };
        assert!((appendix_gain(&s).unwrap() - 4.0 / 6.0).abs() < 1e-12);
        let same = GainScenario { tau: 0.5, ..s };
        assert!(appendix_gain(&same).unwrap().abs() < 1e-12);
        // θ = 1, τ = ν restores the unperturbed split
        let s = GainScenario {
            g: 1.5,
            h: 3.0,
            mu: 0.3,
            nu: 0.6,
            theta: 1.0,
            tau: 0.6,
            lambda: 0.0,
        };
        let plain = 1.5f64.powi(2) * (0.09 / (0.6 * 3.0) + 0.49 / (0.4 * 3.0) - 1.0 / 3.0);
        assert!((appendix_gain(&s).unwrap() - plain).abs() < 1e-12);
        assert!(appendix_gain(&GainScenario { tau: 0.0, ..s }).is_err());
    }
}
