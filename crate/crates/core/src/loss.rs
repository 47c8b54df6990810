//! Loss families written as functions of p̂, the probability the model assigns
//! to the ground-truth class.
//!
//! Every family provides its value and first/second derivatives in p̂. The
//! boosting layer never sees p̂ directly: [`LossSpec::grad_hess`] maps a raw
//! score `z` and a binary label to the gradient and Hessian in `z` through the
//! sigmoid chain rule
//!
//! ```text
//! g = l'(p̂) · (2y − 1) · p̂(1 − p̂)
//! h = l''(p̂) · (p̂(1 − p̂))² + l'(p̂) · p̂(1 − p̂)(1 − 2p̂)
//! ```
//!
//! Two safeguards exist for families whose Hessian vanishes at p̂ = 0.5:
//!
//! * MAE and NCE: when p̂ ≤ 0.5, p̂ is replaced by p̂ + η everywhere, including
//!   the chain-rule factors above.
//! * SCE: the cross-entropy term sees `max(p̂, η)`, which flattens it for
//!   confidently wrong samples.
//!
//! Both are on by default and can be switched off with
//! [`LossSpec::with_safeguard`] to study the raw losses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw scores are clamped to this magnitude before the sigmoid in the loss layer.
pub const RAW_SCORE_CLAMP: f64 = 30.0;

/// Default perturbation / clipping floor.
pub const DEFAULT_ETA: f64 = 1e-2;

/// Upper end of the p̂ grid used by the Hessian positivity check.
const CHECK_GRID_UPPER: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("probability {0} is outside the open interval (0, 1)")]
    Domain(f64),
    #[error("invalid loss parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown loss family `{0}`")]
    UnknownFamily(String),
    #[error("unknown loss option `{0}`")]
    UnknownOption(String),
    #[error("malformed loss option `{0}`")]
    Malformed(String),
    #[error("grid size must be at least 2, got {0}")]
    GridSize(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossFamily {
    /// Cross entropy, `−log p̂`.
    #[serde(rename = "cce")]
    Cce,
    /// Mean absolute error, `1 − p̂`.
    #[serde(rename = "mae")]
    Mae,
    /// Focal loss, `−(1 − p̂)^r log p̂`.
    #[serde(rename = "fl")]
    Focal,
    /// Generalized cross entropy, `(1 − p̂^q) / q`.
    #[serde(rename = "gce")]
    Gce,
    /// Symmetric cross entropy, `−α log p̂ + β(1 − p̂)`.
    #[serde(rename = "sce")]
    Sce,
    /// Normalized cross entropy, `log p̂ / (log p̂ + log(1 − p̂))`.
    #[serde(rename = "nce")]
    Nce,
    /// Robust focal loss, `(1 − p̂)^r (1 − p̂^q) / q`.
    #[serde(rename = "rfl")]
    Rfl,
}

impl LossFamily {
    pub const ALL: [LossFamily; 7] = [
        LossFamily::Cce,
        LossFamily::Mae,
        LossFamily::Focal,
        LossFamily::Gce,
        LossFamily::Sce,
        LossFamily::Nce,
        LossFamily::Rfl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Cce => "cce",
            LossFamily::Mae => "mae",
            LossFamily::Focal => "fl",
            LossFamily::Gce => "gce",
            LossFamily::Sce => "sce",
            LossFamily::Nce => "nce",
            LossFamily::Rfl => "rfl",
        }
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cce" | "ce" | "logloss" => Ok(LossFamily::Cce),
            "mae" => Ok(LossFamily::Mae),
            "fl" | "focal" => Ok(LossFamily::Focal),
            "gce" => Ok(LossFamily::Gce),
            "sce" => Ok(LossFamily::Sce),
            "nce" => Ok(LossFamily::Nce),
            "rfl" => Ok(LossFamily::Rfl),
            other => Err(LossError::UnknownFamily(other.to_string())),
        }
    }
}

/// A loss family together with all of its parameters.
///
/// Parameters that the family does not use are carried along and still
/// range-checked by [`LossSpec::validate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub family: LossFamily,
    /// Focusing exponent of the `(1 − p̂)^r` factor.
    pub r: f64,
    /// GCE / RFL exponent, accepted in `(0, 1]`.
    pub q: f64,
    /// Perturbation for MAE/NCE and clipping floor for SCE.
    pub eta: f64,
    pub sce_alpha: f64,
    pub sce_beta: f64,
    /// Apply the η perturbation (MAE, NCE) or clipping (SCE).
    pub safeguard: bool,
    /// Multiply MAE, SCE or NCE by `(1 − p̂)^r`.
    pub imbalance: bool,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec::new(LossFamily::Cce)
    }
}

/// Probability assigned to the ground-truth class, kept together with its
/// complement so that `1 − p̂` stays accurate when p̂ is close to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PHat {
    value: f64,
    complement: f64,
}

impl PHat {
    pub fn new(value: f64) -> Result<Self, LossError> {
        if !(value > 0.0 && value < 1.0) {
            return Err(LossError::Domain(value));
        }
        Ok(PHat {
            value,
            complement: 1.0 - value,
        })
    }

    /// `p` is the predicted probability of label 1.
    pub fn from_probability(label: bool, p: f64) -> Result<Self, LossError> {
        let ph = PHat::new(p)?;
        Ok(if label { ph } else { ph.flipped() })
    }

    /// p̂ for a raw score, computed with a clamped two-branch sigmoid.
    pub fn from_raw_score(label: bool, z: f64) -> Self {
        let s = if label { z } else { -z };
        let s = s.clamp(-RAW_SCORE_CLAMP, RAW_SCORE_CLAMP);
        PHat {
            value: sigmoid(s),
            complement: sigmoid(-s),
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.value
    }

    #[inline]
    pub fn complement(self) -> f64 {
        self.complement
    }

    fn flipped(self) -> Self {
        PHat {
            value: self.complement,
            complement: self.value,
        }
    }
}

/// Gradient and Hessian of the per-sample loss with respect to the raw score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradHessPair {
    pub g: f64,
    pub h: f64,
}

impl GradHessPair {
    pub fn new(g: f64, h: f64) -> Self {
        GradHessPair { g, h }
    }
}

/// Outcome of [`LossSpec::check_necessary_condition`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityReport {
    pub holds: bool,
    /// `(p̂, H(p̂))` for every grid point with `H ≤ 0`.
    pub violations: Vec<(f64, f64)>,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug)]
struct Derivs {
    value: f64,
    d1: f64,
    d2: f64,
}

impl Derivs {
    fn scaled(self, k: f64) -> Self {
        Derivs {
            value: self.value * k,
            d1: self.d1 * k,
            d2: self.d2 * k,
        }
    }

    fn plus(self, other: Derivs) -> Self {
        Derivs {
            value: self.value + other.value,
            d1: self.d1 + other.d1,
            d2: self.d2 + other.d2,
        }
    }

    /// Product rule for `self · other`.
    fn times(self, other: Derivs) -> Self {
        Derivs {
            value: self.value * other.value,
            d1: self.d1 * other.value + self.value * other.d1,
            d2: self.d2 * other.value + 2.0 * self.d1 * other.d1 + self.value * other.d2,
        }
    }
}

/// `log p̂` without cancellation near one.
#[inline]
fn ln_phat(p: f64, u: f64) -> f64 {
    if p > 0.5 {
        (-u).ln_1p()
    } else {
        p.ln()
    }
}

fn cross_entropy(p: f64, u: f64) -> Derivs {
    Derivs {
        value: -ln_phat(p, u),
        d1: -1.0 / p,
        d2: 1.0 / (p * p),
    }
}

fn generalized_ce(p: f64, u: f64, q: f64) -> Derivs {
    let lp = ln_phat(p, u);
    Derivs {
        value: -(q * lp).exp_m1() / q,
        d1: -((q - 1.0) * lp).exp(),
        d2: (1.0 - q) * ((q - 2.0) * lp).exp(),
    }
}

fn mean_absolute(u: f64) -> Derivs {
    Derivs {
        value: u,
        d1: -1.0,
        d2: 0.0,
    }
}

fn normalized_ce(p: f64, u: f64) -> Derivs {
    let a = ln_phat(p, u);
    let b = if u > 0.5 { (-p).ln_1p() } else { u.ln() };
    let s = a + b;
    // numerator of d/dp (a / s): a'b − ab'
    let n = b / p + a / u;
    let dn = -b / (p * p) + a / (u * u);
    let ds = 1.0 / p - 1.0 / u;
    Derivs {
        value: a / s,
        d1: n / (s * s),
        d2: (dn * s - 2.0 * n * ds) / (s * s * s),
    }
}

/// The `(1 − p̂)^r` factor and its derivatives in p̂.
/// `(g, h)` in the raw score from derivatives in p̂ evaluated at `ph`.
fn chain_rule(ph: PHat, d: Derivs) -> GradHessPair {
    let (p, u) = (ph.value, ph.complement);
    let s = p * u;
    GradHessPair {
        g: d.d1 * s,
        h: d.d2 * s * s + d.d1 * s * (u - p),
    }
}

fn focusing(u: f64, r: f64) -> Derivs {
    if r == 0.0 {
        return Derivs {
            value: 1.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    Derivs {
        value: u.powf(r),
        d1: -r * u.powf(r - 1.0),
        d2: r * (r - 1.0) * u.powf(r - 2.0),
    }
}

impl LossSpec {
    pub fn new(family: LossFamily) -> Self {
        LossSpec {
            family,
            r: 1.0,
            q: 0.5,
            eta: DEFAULT_ETA,
            sce_alpha: 1.0,
            sce_beta: 1.0,
            safeguard: true,
            imbalance: false,
        }
    }

    pub fn cce() -> Self {
        LossSpec::new(LossFamily::Cce)
    }

    pub fn mae() -> Self {
        LossSpec::new(LossFamily::Mae)
    }

    pub fn focal(r: f64) -> Self {
        LossSpec {
            r,
            ..LossSpec::new(LossFamily::Focal)
        }
    }

    pub fn gce(q: f64) -> Self {
        LossSpec {
            q,
            ..LossSpec::new(LossFamily::Gce)
        }
    }

    pub fn sce(alpha: f64, beta: f64) -> Self {
        LossSpec {
            sce_alpha: alpha,
            sce_beta: beta,
            ..LossSpec::new(LossFamily::Sce)
        }
    }

    pub fn nce() -> Self {
        LossSpec::new(LossFamily::Nce)
    }

    pub fn rfl(r: f64, q: f64) -> Self {
        LossSpec {
            r,
            q,
            ..LossSpec::new(LossFamily::Rfl)
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_safeguard(mut self, on: bool) -> Self {
        self.safeguard = on;
        self
    }

    pub fn with_imbalance(mut self, on: bool) -> Self {
        self.imbalance = on;
        self
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |name, value, reason| Err(LossError::Parameter { name, value, reason });
        if !(self.r.is_finite() && self.r >= 0.0) {
            return bad("r", self.r, "must be a finite value >= 0");
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad("q", self.q, "must lie in (0, 1]");
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return bad("eta", self.eta, "must lie in (0, 0.5)");
        }
        if !(self.sce_alpha.is_finite() && self.sce_alpha >= 0.0) {
            return bad("sce_alpha", self.sce_alpha, "must be a finite value >= 0");
        }
        if !(self.sce_beta.is_finite() && self.sce_beta >= 0.0) {
            return bad("sce_beta", self.sce_beta, "must be a finite value >= 0");
        }
        if self.family == LossFamily::Sce && self.sce_alpha == 0.0 && self.sce_beta == 0.0 {
            return bad("sce_alpha", self.sce_alpha, "sce_alpha and sce_beta cannot both be 0");
        }
        Ok(())
    }

    /// Whether the focusing exponent `r` affects this loss.
    pub fn uses_r(&self) -> bool {
        match self.family {
            LossFamily::Focal | LossFamily::Rfl => true,
            LossFamily::Mae | LossFamily::Sce | LossFamily::Nce => self.imbalance,
            LossFamily::Cce | LossFamily::Gce => false,
        }
    }

    pub fn uses_q(&self) -> bool {
        matches!(self.family, LossFamily::Gce | LossFamily::Rfl)
    }

    /// Loss value `l(p̂)`.
    pub fn value(&self, phat: PHat) -> Result<f64, LossError> {
        self.validate()?;
        Ok(self.eval(phat).value)
    }

    /// First and second derivatives of `l` in p̂.
    pub fn derivatives(&self, phat: PHat) -> Result<(f64, f64), LossError> {
        self.validate()?;
        let d = self.eval(phat);
        Ok((d.d1, d.d2))
    }

    /// Gradient and Hessian in raw-score space for a binary label.
    pub fn grad_hess(&self, label: bool, z: f64) -> Result<GradHessPair, LossError> {
        self.validate()?;
        Ok(self.grad_hess_unchecked(label, z))
    }

    /// Loss as a function of label and raw score.
    pub fn value_at_score(&self, label: bool, z: f64) -> Result<f64, LossError> {
        self.validate()?;
        Ok(self.value_at_score_unchecked(label, z))
    }

    /// `H(p̂)`: the Hessian in raw-score space written as a function of p̂.
    pub fn hessian_at(&self, phat: PHat) -> Result<f64, LossError> {
        self.validate()?;
        Ok(self.chain(phat).h)
    }

    /// Evaluates `H(p̂)` on a uniform grid over `[0.5, 1 − 10⁻⁶]` and reports
    /// every point where it fails to be strictly positive.
    pub fn check_necessary_condition(&self, grid_size: usize) -> Result<ConvexityReport, LossError> {
        self.validate()?;
        if grid_size < 2 {
            return Err(LossError::GridSize(grid_size));
        }
        let step = (CHECK_GRID_UPPER - 0.5) / (grid_size - 1) as f64;
        let violations: Vec<(f64, f64)> = (0..grid_size)
            .filter_map(|i| {
                let p = if i + 1 == grid_size {
                    CHECK_GRID_UPPER
                } else {
                    0.5 + step * i as f64
                };
                let h = self.chain(PHat::new(p).expect("grid point inside (0, 1)")).h;
                (h.is_nan() || h <= 0.0).then_some((p, h))
            })
            .collect();
        Ok(ConvexityReport {
            holds: violations.is_empty(),
            violations,
        })
    }

    pub(crate) fn grad_hess_unchecked(&self, label: bool, z: f64) -> GradHessPair {
        let pair = self.chain(PHat::from_raw_score(label, z));
        if label {
            pair
        } else {
            GradHessPair::new(-pair.g, pair.h)
        }
    }

    /// Loss value together with `(g, h)`, from a single evaluation.
    pub(crate) fn value_grad_hess_unchecked(&self, label: bool, z: f64) -> (f64, GradHessPair) {
        let ph = self.effective(PHat::from_raw_score(label, z));
        let d = self.eval_at(ph);
        let pair = chain_rule(ph, d);
        if label {
            (d.value, pair)
        } else {
            (d.value, GradHessPair::new(-pair.g, pair.h))
        }
    }

    pub(crate) fn value_at_score_unchecked(&self, label: bool, z: f64) -> f64 {
        self.eval(PHat::from_raw_score(label, z)).value
    }

    /// Gradient and Hessian for label 1 at the given p̂.
    fn chain(&self, phat: PHat) -> GradHessPair {
        let ph = self.effective(phat);
        chain_rule(ph, self.eval_at(ph))
    }

    fn eval(&self, phat: PHat) -> Derivs {
        self.eval_at(self.effective(phat))
    }

    /// Applies the MAE/NCE perturbation.
    fn effective(&self, phat: PHat) -> PHat {
        let shifts = matches!(self.family, LossFamily::Mae | LossFamily::Nce);
        if shifts && self.safeguard && phat.value <= 0.5 {
            PHat {
                value: phat.value + self.eta,
                complement: phat.complement - self.eta,
            }
        } else {
            phat
        }
    }

    fn eval_at(&self, phat: PHat) -> Derivs {
        let (p, u) = (phat.value, phat.complement);
        let base = match self.family {
            LossFamily::Cce | LossFamily::Focal => cross_entropy(p, u),
            LossFamily::Gce | LossFamily::Rfl => generalized_ce(p, u, self.q),
            LossFamily::Mae => mean_absolute(u),
            LossFamily::Nce => normalized_ce(p, u),
            LossFamily::Sce => {
                let ce = if self.safeguard && p < self.eta {
                    Derivs {
                        value: -self.eta.ln(),
                        d1: 0.0,
                        d2: 0.0,
                    }
                } else {
                    cross_entropy(p, u)
                };
                ce.scaled(self.sce_alpha).plus(mean_absolute(u).scaled(self.sce_beta))
            }
        };
        if self.uses_r() {
            focusing(u, self.r).times(base)
        } else {
            base
        }
    }

    /// Applies one `key=value` option.
    pub fn set_option(&mut self, key: &str, value: &str) -> Result<(), LossError> {
        let num = || -> Result<f64, LossError> {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| LossError::Malformed(format!("{key}={value}")))
        };
        let flag = || -> Result<bool, LossError> {
            match value.trim().to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(LossError::Malformed(format!("{key}={value}"))),
            }
        };
        match key.trim() {
            "family" | "loss" => self.family = value.parse()?,
            "r" => self.r = num()?,
            "q" => self.q = num()?,
            "eta" => self.eta = num()?,
            "sce_alpha" | "alpha" => self.sce_alpha = num()?,
            "sce_beta" | "beta" => self.sce_beta = num()?,
            "safeguard" => self.safeguard = flag()?,
            "imbalance" => self.imbalance = flag()?,
            other => return Err(LossError::UnknownOption(other.to_string())),
        }
        Ok(())
    }

    /// Whether `key` names a loss option understood by [`LossSpec::set_option`].
    pub fn is_option(key: &str) -> bool {
        matches!(
            key.trim(),
            "family"
                | "loss"
                | "r"
                | "q"
                | "eta"
                | "sce_alpha"
                | "alpha"
                | "sce_beta"
                | "beta"
                | "safeguard"
                | "imbalance"
        )
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family={}", self.family)?;
        if self.uses_r() {
            write!(f, ", r={}", self.r)?;
        }
        if self.uses_q() {
            write!(f, ", q={}", self.q)?;
        }
        if self.family == LossFamily::Sce {
            write!(f, ", sce_alpha={}, sce_beta={}", self.sce_alpha, self.sce_beta)?;
        }
        if matches!(self.family, LossFamily::Mae | LossFamily::Nce | LossFamily::Sce) {
            write!(f, ", eta={}, safeguard={}", self.eta, self.safeguard)?;
        }
        if self.imbalance {
            write!(f, ", imbalance=true")?;
        }
        Ok(())
    }
}

/// Parses a fragment such as `family=rfl, r=1.0, q=0.5, eta=0.01`.
impl FromStr for LossSpec {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = LossSpec::default();
        for item in s.split([',', ';', '\n']).map(str::trim).filter(|t| !t.is_empty()) {
            for pair in item.split_whitespace() {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| LossError::Malformed(pair.to_string()))?;
                spec.set_option(k, v)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ph(v: f64) -> PHat {
        PHat::new(v).unwrap()
    }

    #[test]
    fn rfl_value_at_half() {
        let v = LossSpec::rfl(1.0, 0.5).value(ph(0.5)).unwrap();
        // 0.5 * (1 - sqrt(0.5)) / 0.5
        assert!((v - 0.292_893_218_813_452_5).abs() < 1e-15);
    }

    #[test]
    fn values_vanish_near_one() {
        let p = ph(1.0 - 1e-12);
        for family in LossFamily::ALL {
            let spec = LossSpec::new(family);
            let v = spec.value(p).unwrap();
            assert!(v.abs() < 1e-9, "{family}: {v}");
        }
    }

    #[test]
    fn rfl_without_focus_is_gce() {
        for &q in &[0.1, 0.5, 0.9, 1.0] {
            for &p in &[0.01, 0.3, 0.5, 0.77, 0.999] {
                let a = LossSpec::rfl(0.0, q).value(ph(p)).unwrap();
                let b = LossSpec::gce(q).value(ph(p)).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn mae_value_and_derivatives() {
        assert_eq!(LossSpec::mae().with_safeguard(false).value(ph(0.25)).unwrap(), 0.75);
        // the perturbation moves the value along with the derivatives
        assert!((LossSpec::mae().value(ph(0.25)).unwrap() - 0.74).abs() < 1e-15);
        assert_eq!(LossSpec::mae().derivatives(ph(0.8)).unwrap(), (-1.0, 0.0));
    }

    #[test]
    fn gce_first_derivative() {
        let (d1, _) = LossSpec::gce(0.5).derivatives(ph(0.81)).unwrap();
        assert!((d1 + 1.0 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_logistic_identity() {
        let gh = LossSpec::cce().grad_hess(true, 0.0).unwrap();
        assert!((gh.g + 0.5).abs() < 1e-15);
        assert!((gh.h - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradients_vanish_for_confident_correct_scores() {
        for family in LossFamily::ALL {
            let gh = LossSpec::new(family).grad_hess(true, 40.0).unwrap();
            assert!(gh.g.abs() < 1e-10 && gh.h.abs() < 1e-10, "{family}: {gh:?}");
        }
    }

    #[test]
    fn no_nan_over_the_score_range() {
        for family in LossFamily::ALL {
            for safeguard in [true, false] {
                let spec = LossSpec::new(family).with_safeguard(safeguard);
                for i in -700..=700 {
                    for label in [true, false] {
                        let gh = spec.grad_hess(label, i as f64).unwrap();
                        assert!(gh.g.is_finite() && gh.h.is_finite(), "{family} z={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn raw_mae_and_nce_fail_at_half() {
        for spec in [LossSpec::mae(), LossSpec::nce()] {
            let report = spec.with_safeguard(false).check_necessary_condition(1000).unwrap();
            assert!(!report.holds);
            assert_eq!(report.violations[0].0, 0.5);
            assert_eq!(report.violations[0].1, 0.0);
        }
    }

    #[test]
    fn safeguarded_losses_pass() {
        for spec in [LossSpec::mae(), LossSpec::nce(), LossSpec::sce(1.0, 1.0)] {
            assert!(spec.check_necessary_condition(1000).unwrap().holds, "{spec}");
        }
        assert!(LossSpec::gce(0.7).check_necessary_condition(1000).unwrap().holds);
        assert!(LossSpec::rfl(1.0, 0.5).check_necessary_condition(1000).unwrap().holds);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            LossSpec::rfl(1.0, 1.5).validate(),
            Err(LossError::Parameter { name: "q", .. })
        ));
        assert!(LossSpec::rfl(-0.1, 0.5).validate().is_err());
        assert!(LossSpec::cce().with_eta(0.5).validate().is_err());
        assert!(LossSpec::sce(0.0, 0.0).validate().is_err());
        // irrelevant parameters are still range-checked
        assert!(LossSpec {
            q: 0.0,
            ..LossSpec::cce()
        }
        .validate()
        .is_err());
        assert!(LossSpec::gce(1.0).validate().is_ok());
    }

    #[test]
    fn phat_domain() {
        assert!(PHat::new(0.0).is_err());
        assert!(PHat::new(1.0).is_err());
        assert!(PHat::new(f64::NAN).is_err());
        let p = PHat::from_probability(false, 0.2).unwrap();
        assert_eq!(p.value(), 0.8);
    }

    #[test]
    fn parse_fragment() {
        let spec: LossSpec = "family=rfl, r=1.0, q=0.5, eta=0.01".parse().unwrap();
        assert_eq!(spec, LossSpec::rfl(1.0, 0.5));
        assert!("family=rfl q=1.5".parse::<LossSpec>().is_err());
        assert!("family=xyz".parse::<LossSpec>().is_err());
        assert!("bogus=1".parse::<LossSpec>().is_err());
        let round: LossSpec = LossSpec::sce(0.5, 2.0).to_string().parse().unwrap();
        assert_eq!(round, LossSpec::sce(0.5, 2.0));
    }
}
