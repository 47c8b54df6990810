//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use robust_gbdt::dataset::FeatureMatrix;
use robust_gbdt::loss::{GradHessPair, LossFamily, LossSpec, PHat};
use robust_gbdt::tree::{grow_tree, NodeKind, TreeConfig};

pub const FD_REL: f64 = 1e-5;
pub const FD_ABS: f64 = 1e-8;

/// Central difference refined by one Richardson step, so truncation error is
/// fourth order in the step.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(step / 2.0) - d(step)) / 3.0
}

pub fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= FD_ABS.max(FD_REL * numeric.abs())
}

/// Kink locations in p̂ introduced by the safeguards; finite differences
/// must stay clear of them.
pub fn kinks(spec: &LossSpec) -> Vec<f64> {
    match spec.family {
        LossFamily::Mae | LossFamily::Nce if spec.safeguard => vec![0.5],
        LossFamily::Sce if spec.safeguard => vec![spec.eta],
        _ => Vec::new(),
    }
}

/// Draws a valid spec of `family` with random parameters and safeguard/imbalance flags.
pub fn random_spec<R: Rng>(family: LossFamily, rng: &mut R) -> LossSpec {
    let mut spec = LossSpec::new(family);
    spec.r = rng.gen_range(0.0..3.0);
    spec.q = rng.gen_range(0.05..=1.0);
    spec.eta = rng.gen_range(1e-3..0.1);
    spec.sce_alpha = rng.gen_range(0.1..2.0);
    spec.sce_beta = rng.gen_range(0.1..2.0);
    spec.safeguard = rng.gen_bool(0.5);
    spec.imbalance = rng.gen_bool(0.3);
    spec
}

/// Checks `d1`, `d2` in p̂ against finite differences of the value and of `d1`.
pub fn check_phat(spec: &LossSpec, p: f64) -> Result<(), String> {
    let step = 1e-4 * p.min(1.0 - p);
    let value = |x: f64| spec.value(PHat::new(x).unwrap()).unwrap();
    let d1 = |x: f64| spec.derivatives(PHat::new(x).unwrap()).unwrap().0;
    let (a1, a2) = spec.derivatives(PHat::new(p).unwrap()).unwrap();
    let (n1, n2) = (derivative(value, p, step), derivative(d1, p, step));
    if close(a1, n1) && close(a2, n2) {
        Ok(())
    } else {
        Err(format!("{spec:?} at p̂={p}: d1 {a1} vs {n1}, d2 {a2} vs {n2}"))
    }
}

/// Checks `(g, h)` in the raw score against finite differences of the value and of `g`.
///
/// Where the MAE/NCE safeguard shifts p̂ to p̂ + η, `(g, h)` are those of the
/// unshifted loss at the score whose p̂ is p̂ + η, so that is the reference.
pub fn check_score(spec: &LossSpec, label: bool, z: f64) -> Result<(), String> {
    let step = 1e-4;
    let p = PHat::from_raw_score(label, z).value();
    let (reference, at) = if kinks(spec).contains(&0.5) && p <= 0.5 {
        let shifted = p + spec.eta;
        let s = (shifted / (1.0 - shifted)).ln();
        (spec.with_safeguard(false), if label { s } else { -s })
    } else {
        (*spec, z)
    };
    let value = |x: f64| reference.value_at_score(label, x).unwrap();
    let grad = |x: f64| reference.grad_hess(label, x).unwrap().g;
    let GradHessPair { g, h } = spec.grad_hess(label, z).unwrap();
    let (ng, nh) = (derivative(value, at, step), derivative(grad, at, step));
    if close(g, ng) && close(h, nh) {
        Ok(())
    } else {
        Err(format!("{spec:?} at y={label}, z={z}: g {g} vs {ng}, h {h} vs {nh}"))
    }
}

/// p̂ in [0.02, 0.98] at least `gap` away from every kink.
pub fn smooth_phat<R: Rng>(spec: &LossSpec, rng: &mut R, gap: f64) -> f64 {
    loop {
        let p = rng.gen_range(0.02..0.98);
        if kinks(spec).iter().all(|k| (p - k).abs() > gap) {
            return p;
        }
    }
}

/// Raw score in [-8, 8] whose p̂ is at least `gap` (in score units) from every kink.
pub fn smooth_score<R: Rng>(spec: &LossSpec, label: bool, rng: &mut R, gap: f64) -> f64 {
    let logit = |p: f64| (p / (1.0 - p)).ln();
    loop {
        let z: f64 = rng.gen_range(-8.0..8.0);
        let s = if label { z } else { -z };
        if kinks(spec).iter().all(|&k| (s - logit(k)).abs() > gap) {
            return z;
        }
    }
}

/// Average precision by sweeping every distinct threshold, in exact rational
/// arithmetic: `Σ_t ΔTP(t)/P · TP(t)/PP(t)` where `PP(t) = #{s ≥ t}`.
pub fn aucpr_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let n = scores.len() as u64;
    let lcm = (1..=n).fold(1u64, |a, b| a / gcd(a, b) * b);
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut numerator = 0u64;
    let mut prev_tp = 0u64;
    for t in thresholds {
        let pp = scores.iter().filter(|&&s| s >= t).count() as u64;
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| l && s >= t).count() as u64;
        numerator += (tp - prev_tp) * tp * (lcm / pp);
        prev_tp = tp;
    }
    numerator as f64 / (lcm * positives) as f64
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Best root split by enumerating every feature, midpoint and missing
/// direction and summing each side from scratch. Ties keep the first in
/// (feature, threshold, missing-left-first) order.
pub fn best_split_oracle(
    matrix: &FeatureMatrix,
    gh: &[GradHessPair],
    config: &TreeConfig,
) -> Option<(usize, f64, bool, f64)> {
    let n = matrix.n_rows();
    let total = |rows: &[usize]| rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + gh[r].g, h + gh[r].h));
    let all: Vec<usize> = (0..n).collect();
    let (g, h) = total(&all);
    let score = |g: f64, h: f64| g * g / (h + config.lambda);
    let mut best: Option<(usize, f64, bool, f64)> = None;
    for f in 0..matrix.n_features() {
        let mut values: Vec<f64> = (0..n).filter_map(|r| matrix.get(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let any_missing = (0..n).any(|r| matrix.get(r, f).is_none());
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let directions: &[bool] = if any_missing { &[true, false] } else { &[true] };
            for &missing_left in directions {
                let goes_left = |r: usize| matrix.get(r, f).map_or(missing_left, |v| v <= t);
                let left: Vec<usize> = all.iter().copied().filter(|&r| goes_left(r)).collect();
                let right: Vec<usize> = all.iter().copied().filter(|&r| !goes_left(r)).collect();
                if left.len() < config.min_samples_leaf || right.len() < config.min_samples_leaf {
                    continue;
                }
                let ((gl, hl), (gr, hr)) = (total(&left), total(&right));
                if hl < config.min_sum_hessian || hr < config.min_sum_hessian {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(g, h));
                if gain >= config.min_gain && best.is_none_or(|b| gain > b.3) {
                    best = Some((f, t, missing_left, gain));
                }
            }
        }
    }
    best
}

/// Up to 30 rows and 3 features with at most 7 distinct values each, some
/// missing, and dyadic gradients so every aggregate is exact.
pub fn small_problem(rng: &mut ChaCha8Rng) -> (FeatureMatrix, Vec<GradHessPair>) {
    let n = rng.gen_range(2..=30);
    let d = rng.gen_range(1..=3);
    let missing = rng.gen_range(0.0..0.3);
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| (!rng.gen_bool(missing)).then(|| rng.gen_range(0..7) as f64))
                .collect()
        })
        .collect();
    let gh = (0..n)
        .map(|_| {
            GradHessPair::new(
                rng.gen_range(-16..=16) as f64 / 8.0,
                rng.gen_range(1..=16) as f64 / 16.0,
            )
        })
        .collect();
    (FeatureMatrix::from_rows(&rows).unwrap(), gh)
}

/// Asserts that grow_tree's root split equals the brute-force oracle's choice.
pub fn root_matches_oracle(matrix: &FeatureMatrix, gh: &[GradHessPair], config: &TreeConfig) -> Result<(), String> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    let tree = grow_tree(matrix, &rows, gh, config);
    let got = match tree.nodes[0].kind {
        NodeKind::Split {
            feature,
            threshold,
            default_left,
            gain,
            ..
        } => Some((feature, threshold, default_left, gain)),
        NodeKind::Leaf { .. } => None,
    };
    let want = best_split_oracle(matrix, gh, config);
    // without missing values the direction is not observable
    let key = |c: Option<(usize, f64, bool, f64)>| {
        c.map(|(f, t, d, g)| {
            let has_missing = (0..matrix.n_rows()).any(|r| matrix.get(r, f).is_none());
            (f, t.to_bits(), d || !has_missing, g.to_bits())
        })
    };
    if key(got) == key(want) {
        Ok(())
    } else {
        Err(format!("tree {got:?} vs oracle {want:?}"))
    }
}
