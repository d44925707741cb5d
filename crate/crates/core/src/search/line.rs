//! Exact one-dimensional minimization along a single coordinate.

use crate::objective::LossKind;

/// Width below which bisection stops, relative to `max(1, |t|)`.
const TOLERANCE: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 64;

/// A coordinate restriction of the objective: with the coordinate moved
/// from `current` to `t`, each affected margin becomes `m + a (t - current)`.
pub(crate) struct Coordinate<'a> {
    pub loss: LossKind,
    /// `(a_i, m_i)`: slope `y_i x_ij` and current margin for each row
    /// touched by the coordinate.
    pub terms: &'a [(f64, f64)],
    pub current: f64,
    pub l1: f64,
    pub l2: f64,
    pub positive_only: bool,
}

impl Coordinate<'_> {
    /// Derivative of the smooth part (loss plus ridge term) at `t`.
    fn smooth_derivative(&self, t: f64) -> f64 {
        let shift = t - self.current;
        let data: f64 = self
            .terms
            .iter()
            .map(|&(a, m)| a * self.loss.derivative(m + a * shift))
            .sum();
        data + 2.0 * self.l2 * t
    }

    /// Objective restricted to the coordinate, up to a constant.
    pub fn value(&self, t: f64) -> f64 {
        let shift = t - self.current;
        let data: f64 = self
            .terms
            .iter()
            .map(|&(a, m)| self.loss.value(m + a * shift))
            .sum();
        data + self.l1 * t.abs() + self.l2 * t * t
    }

    /// Minimizer of the restriction. Never returns a value that increases
    /// the objective over `current`.
    pub fn minimize(&self) -> f64 {
        let d0 = self.smooth_derivative(0.0);
        let t = if d0 + self.l1 < 0.0 {
            self.root(1.0, self.l1)
        } else if d0 - self.l1 > 0.0 {
            if self.positive_only {
                0.0
            } else {
                self.root(-1.0, -self.l1)
            }
        } else {
            0.0
        };
        if t != self.current && self.value(t) > self.value(self.current) {
            return self.current;
        }
        t
    }

    /// Root of `smooth_derivative(t) + offset` on the side of zero given by
    /// `dir`; the function is negative (in the `dir` orientation) at zero.
    fn root(&self, dir: f64, offset: f64) -> f64 {
        let f = |t: f64| dir * (self.smooth_derivative(t) + offset);
        let mut lo = 0.0;
        let mut hi = if self.current * dir > 0.0 {
            (self.current * dir).max(1e-3)
        } else {
            1.0
        };
        let mut doublings = 0;
        while f(dir * hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings >= MAX_DOUBLINGS {
                return dir * hi;
            }
        }
        while hi - lo > TOLERANCE * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if f(dir * mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        dir * 0.5 * (lo + hi)
    }
}
