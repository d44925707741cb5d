//! Losses, `L^q` rescaling norms, subgradients and the superphrase
//! gradient bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::SparseVector;

/// Per-document loss ξ(m) of the margin `m = y (β0 + x'β)`. Both variants are
/// convex and non-increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// ξ(m) = ((1 - m) ∨ 0)²
    #[default]
    SquaredHinge,
    /// ξ(m) = log(1 + e^{-m})
    Logistic,
}

impl LossKind {
    pub fn value(self, m: f64) -> f64 {
        match self {
            LossKind::SquaredHinge => {
                let s = (1.0 - m).max(0.0);
                s * s
            }
            LossKind::Logistic => {
                if m > 0.0 {
                    (-m).exp().ln_1p()
                } else {
                    -m + m.exp().ln_1p()
                }
            }
        }
    }

    /// ξ'(m), never positive.
    pub fn derivative(self, m: f64) -> f64 {
        match self {
            LossKind::SquaredHinge => -2.0 * (1.0 - m).max(0.0),
            LossKind::Logistic => {
                if m > 0.0 {
                    let e = (-m).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + m.exp())
                }
            }
        }
    }
}

/// Order `q ≥ 1` of the rescaling norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidConfig(format!("q must be at least 1, got {q}")));
        }
        Ok(if q.is_infinite() {
            NormOrder::Infinity
        } else {
            NormOrder::Finite(q)
        })
    }

    /// Command-line convention: any `q ≥ 10` means infinity.
    pub fn from_cli(q: f64) -> Result<Self> {
        if q >= 10.0 {
            Ok(NormOrder::Infinity)
        } else {
            Self::new(q)
        }
    }

    /// Hölder conjugate `r` with `1/q + 1/r = 1`.
    pub fn conjugate(self) -> NormOrder {
        match self {
            NormOrder::Infinity => NormOrder::Finite(1.0),
            NormOrder::Finite(q) if q == 1.0 => NormOrder::Infinity,
            NormOrder::Finite(q) => NormOrder::Finite(q / (q - 1.0)),
        }
    }

    /// `1 - 1/q`, the exponent of `r` in the perfect-predictor cutoff.
    pub fn dual_exponent(self) -> f64 {
        match self {
            NormOrder::Infinity => 1.0,
            NormOrder::Finite(q) => 1.0 - 1.0 / q,
        }
    }

    /// `L^q` norm of non-negative values.
    pub fn norm_of(self, values: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            NormOrder::Infinity => values.into_iter().fold(0.0, f64::max),
            NormOrder::Finite(q) if q == 1.0 => values.into_iter().sum(),
            NormOrder::Finite(q) if q == 2.0 => values.into_iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormOrder::Finite(q) => values
                .into_iter()
                .map(|v| if v == 1.0 { 1.0 } else { v.powf(q) })
                .sum::<f64>()
                .powf(1.0 / q),
        }
    }
}

impl Default for NormOrder {
    fn default() -> Self {
        NormOrder::Finite(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleConfig {
    pub q: NormOrder,
    /// Use 0/1 presence instead of counts (rescaled regardless).
    pub binary_features: bool,
    /// Treat every norm as 1.
    pub no_rescaling: bool,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        RescaleConfig {
            q: NormOrder::default(),
            binary_features: false,
            no_rescaling: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub c: f64,
    /// Elastic-net mixing in (0, 1]; 1 is pure L1.
    pub elastic_a: f64,
    pub positive_only: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            c: 1.0,
            elastic_a: 1.0,
            positive_only: false,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidConfig(format!("C must be non-negative, got {}", self.c)));
        }
        if !(self.elastic_a > 0.0 && self.elastic_a <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "elastic mixing must lie in (0, 1], got {}",
                self.elastic_a
            )));
        }
        Ok(())
    }

    /// Weight of `|β_j|`.
    pub fn l1(&self) -> f64 {
        self.c * self.elastic_a
    }

    /// Weight of `β_j²`.
    pub fn l2(&self) -> f64 {
        self.c * (1.0 - self.elastic_a)
    }

    pub fn of(&self, beta: f64) -> f64 {
        self.l1() * beta.abs() + self.l2() * beta * beta
    }
}

/// Normalizing constant `z_j` of a count column.
pub fn norm(values: &[f64], cfg: &RescaleConfig) -> Result<f64> {
    if !values.iter().any(|&v| v > 0.0) {
        return Err(Error::VacuousFeature);
    }
    if cfg.no_rescaling {
        return Ok(1.0);
    }
    let binary = cfg.binary_features;
    Ok(cfg
        .q
        .norm_of(values.iter().map(|&v| if binary && v > 0.0 { 1.0 } else { v })))
}

/// Subgradient interval of the objective along one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subgradient {
    pub lo: f64,
    pub hi: f64,
}

impl Subgradient {
    pub fn point(g: f64) -> Self {
        Subgradient { lo: g, hi: g }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    /// Distance of the interval from zero.
    pub fn magnitude(&self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }
}

/// Smooth part `Σ_i ξ'(m_i) y_i x_i` over a sparse column of rescaled
/// values.
pub fn smooth_gradient(loss: LossKind, column: &SparseVector, y: &[f64], margins: &[f64]) -> f64 {
    column
        .iter()
        .map(|(r, x)| loss.derivative(margins[r as usize]) * y[r as usize] * x)
        .sum()
}

/// Intercept gradient `Σ_i ξ'(m_i) y_i`; the intercept is unpenalized.
pub fn intercept_gradient(loss: LossKind, y: &[f64], margins: &[f64]) -> f64 {
    y.iter()
        .zip(margins)
        .map(|(&yi, &m)| loss.derivative(m) * yi)
        .sum()
}

/// Subgradient interval for a phrase given its count column and norm.
pub fn feature_gradient(
    loss: LossKind,
    counts: &SparseVector,
    z: f64,
    beta: f64,
    y: &[f64],
    margins: &[f64],
    penalty: &PenaltyConfig,
) -> Subgradient {
    let g = smooth_gradient(loss, counts, y, margins) / z;
    subgradient_at(g, beta, penalty)
}

/// Adds the penalty subdifferential to a smooth coordinate gradient.
pub fn subgradient_at(g: f64, beta: f64, penalty: &PenaltyConfig) -> Subgradient {
    let l1 = penalty.l1();
    if beta == 0.0 {
        Subgradient {
            lo: g - l1,
            hi: g + l1,
        }
    } else {
        Subgradient::point(g + l1 * beta.signum() + 2.0 * penalty.l2() * beta)
    }
}

/// Magnitude of the available descent direction along a coordinate. In
/// positive-only mode a coefficient at zero may only move up.
pub fn descent_magnitude(sub: Subgradient, beta: f64, positive_only: bool) -> f64 {
    if positive_only && beta == 0.0 {
        (-sub.hi).max(0.0)
    } else {
        sub.magnitude()
    }
}

/// Objective value `Σ ξ(m_i) + Σ_j penalty(β_j)`.
pub fn loss_value(
    loss: LossKind,
    margins: &[f64],
    betas: impl IntoIterator<Item = f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    let data: f64 = margins.iter().map(|&m| loss.value(m)).sum();
    let pen: f64 = betas.into_iter().map(|b| penalty.of(b)).sum();
    data + pen
}

/// Upper bound on the at-zero descent magnitude of every phrase whose
/// count vector lies between zero and `counts`.
///
/// `weights` holds `|ξ'(m_i)|` per row. With rescaling the bound is
/// `max(‖w_neg‖_r, ‖w_pos‖_r) - C a` restricted to rows where the phrase
/// occurs, `r` the conjugate of `q`; without rescaling the per-class sums
/// are weighted by the counts themselves.
pub fn prune_bound(
    counts: &SparseVector,
    weights: &[f64],
    y: &[f64],
    rescale: &RescaleConfig,
    penalty: &PenaltyConfig,
) -> f64 {
    let (pos, neg) = class_weight_norms(counts, weights, y, rescale);
    let reach = if penalty.positive_only { pos } else { pos.max(neg) };
    (reach - penalty.l1()).max(0.0)
}

pub(crate) fn class_weight_norms(
    counts: &SparseVector,
    weights: &[f64],
    y: &[f64],
    rescale: &RescaleConfig,
) -> (f64, f64) {
    let mut pos = WeightNorm::new(rescale);
    let mut neg = WeightNorm::new(rescale);
    for (r, c) in counts.iter() {
        let w = weights[r as usize];
        let c = if rescale.binary_features { 1.0 } else { c };
        if y[r as usize] > 0.0 {
            pos.add(w, c);
        } else {
            neg.add(w, c);
        }
    }
    (pos.finish(), neg.finish())
}

/// Streaming `L^q` norm of non-negative values.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NormAccumulator {
    q: NormOrder,
    acc: f64,
}

impl NormAccumulator {
    pub(crate) fn new(q: NormOrder) -> Self {
        NormAccumulator { q, acc: 0.0 }
    }

    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        match self.q {
            NormOrder::Infinity => self.acc = self.acc.max(v),
            NormOrder::Finite(q) if q == 1.0 || v == 1.0 => self.acc += v,
            NormOrder::Finite(q) if q == 2.0 => self.acc += v * v,
            NormOrder::Finite(q) => self.acc += v.powf(q),
        }
    }

    pub(crate) fn finish(self) -> f64 {
        match self.q {
            NormOrder::Infinity => self.acc,
            NormOrder::Finite(q) if q == 1.0 => self.acc,
            NormOrder::Finite(q) if q == 2.0 => self.acc.sqrt(),
            NormOrder::Finite(q) => self.acc.powf(1.0 / q),
        }
    }
}

/// Streaming accumulator for the bound's per-class weight norms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WeightNorm {
    mode: BoundMode,
    acc: f64,
}

#[derive(Debug, Clone, Copy)]
enum BoundMode {
    CountWeighted,
    Max,
    Sum,
    Square,
    Power(f64),
}

impl WeightNorm {
    pub(crate) fn new(rescale: &RescaleConfig) -> Self {
        let mode = if rescale.no_rescaling {
            BoundMode::CountWeighted
        } else {
            match rescale.q.conjugate() {
                NormOrder::Infinity => BoundMode::Max,
                NormOrder::Finite(r) if r == 1.0 => BoundMode::Sum,
                NormOrder::Finite(r) if r == 2.0 => BoundMode::Square,
                NormOrder::Finite(r) => BoundMode::Power(r),
            }
        };
        WeightNorm { mode, acc: 0.0 }
    }

    #[inline]
    pub(crate) fn add(&mut self, w: f64, count: f64) {
        match self.mode {
            BoundMode::CountWeighted => self.acc += w * count,
            BoundMode::Max => self.acc = self.acc.max(w),
            BoundMode::Sum => self.acc += w,
            BoundMode::Square => self.acc += w * w,
            BoundMode::Power(r) => self.acc += w.powf(r),
        }
    }

    pub(crate) fn finish(self) -> f64 {
        match self.mode {
            BoundMode::Square => self.acc.sqrt(),
            BoundMode::Power(r) => self.acc.powf(1.0 / r),
            _ => self.acc,
        }
    }
}
