//! Best-gradient search over the phrase tree.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;

use super::Fitter;
use crate::index::{key_cmp, OccurrenceList, PhraseKey, TokenId};
use crate::objective::{descent_magnitude, subgradient_at, NormAccumulator, WeightNorm};

/// Magnitudes at or below this offer no descent.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;
/// Relative slack under which a subtree bound counts as strictly below the
/// incumbent.
pub const PRUNE_SLACK: f64 = 1e-9;

/// Phrase offering the steepest descent, with its magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub key: PhraseKey,
    pub magnitude: f64,
}

impl Candidate {
    /// Larger magnitude first, then shorter, then lexicographic.
    fn beats(&self, other: &Candidate) -> bool {
        match self.magnitude.partial_cmp(&other.magnitude) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => key_cmp(&self.key, &other.key) == Ordering::Less,
        }
    }
}

fn better(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Gradient statistics of one phrase at the current margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Smooth gradient along the rescaled column.
    pub gradient: f64,
    pub z: f64,
    /// Descent magnitude if the coefficient were zero.
    pub magnitude_at_zero: f64,
    /// Bound on `magnitude_at_zero` of every superphrase.
    pub bound: f64,
}

/// Per-row quantities shared by every phrase evaluation.
struct RowWeights {
    /// `ξ'(m_i) y_i`
    slopes: Vec<f64>,
    /// `|ξ'(m_i)|`
    weights: Vec<f64>,
}

impl<'a> Fitter<'a> {
    fn row_weights(&self) -> RowWeights {
        let loss = self.config.loss;
        let y = &self.y;
        let (slopes, weights) = self
            .margins
            .iter()
            .zip(y)
            .map(|(&m, &yi)| {
                let d = loss.derivative(m);
                (d * yi, d.abs())
            })
            .unzip();
        RowWeights { slopes, weights }
    }

    fn evaluate_with(&self, occ: &OccurrenceList, rows: &RowWeights) -> Evaluation {
        let rescale = &self.config.rescale;
        let penalty = &self.config.penalty;
        let y = &self.y;
        let mut z = NormAccumulator::new(rescale.q);
        let mut pos = WeightNorm::new(rescale);
        let mut neg = WeightNorm::new(rescale);
        let mut raw = 0.0;
        for (row, ends) in occ.entries() {
            let r = row as usize;
            let c = if rescale.binary_features {
                1.0
            } else {
                ends.len() as f64
            };
            raw += rows.slopes[r] * c;
            z.add(c);
            if y[r] > 0.0 {
                pos.add(rows.weights[r], c);
            } else {
                neg.add(rows.weights[r], c);
            }
        }
        let z = if rescale.no_rescaling || occ.is_empty() {
            1.0
        } else {
            z.finish()
        };
        let gradient = raw / z;
        let magnitude_at_zero = descent_magnitude(
            subgradient_at(gradient, 0.0, penalty),
            0.0,
            penalty.positive_only,
        );
        let (pos, neg) = (pos.finish(), neg.finish());
        let reach = if penalty.positive_only {
            pos
        } else {
            pos.max(neg)
        };
        Evaluation {
            gradient,
            z,
            magnitude_at_zero,
            bound: (reach - penalty.l1()).max(0.0),
        }
    }

    /// Gradient statistics of a phrase at the current margins.
    pub fn evaluate_key(&self, key: &[TokenId]) -> Evaluation {
        let occ = self.index.occurrences_of_key(key);
        self.evaluate_with(&occ, &self.row_weights())
    }

    /// Descent magnitude of a phrase at its current coefficient.
    pub fn magnitude_of(&self, key: &[TokenId]) -> f64 {
        match self.lookup.get(key) {
            Some(&i) => self.in_model_magnitude(i, &self.row_weights()),
            None => self.evaluate_key(key).magnitude_at_zero,
        }
    }

    fn in_model_magnitude(&self, i: usize, rows: &RowWeights) -> f64 {
        let f = &self.features[i];
        let g: f64 = f
            .column
            .iter()
            .map(|(r, x)| rows.slopes[r as usize] * x)
            .sum();
        let penalty = &self.config.penalty;
        descent_magnitude(subgradient_at(g, f.beta, penalty), f.beta, penalty.positive_only)
    }

    /// Phrase with the steepest available descent, or `None` when no
    /// coordinate offers descent. With `prune` off every phrase within the
    /// configured limits is visited; the result is the same either way.
    pub fn find_highest_gradient(&self, prune: bool) -> Option<Candidate> {
        let rows = self.row_weights();
        let mut best = None;
        for i in 0..self.features.len() {
            let magnitude = self.in_model_magnitude(i, &rows);
            if magnitude > MAGNITUDE_FLOOR {
                let c = Candidate {
                    key: self.features[i].key.clone(),
                    magnitude,
                };
                best = better(best, Some(c));
            }
        }
        let incumbent = AtomicU64::new(best.as_ref().map_or(0.0f64, |c| c.magnitude).to_bits());
        let min_support = self.config.min_support;
        let roots: Vec<TokenId> = self
            .index
            .unigram_ids()
            .filter(|&id| self.index.support(id) >= min_support.max(1))
            .collect();
        let found = roots
            .par_iter()
            .map(|&id| self.scan_subtree(id, &rows, &incumbent, prune))
            .reduce(|| None, better);
        better(best, found)
    }

    fn scan_subtree(
        &self,
        root: TokenId,
        rows: &RowWeights,
        incumbent: &AtomicU64,
        prune: bool,
    ) -> Option<Candidate> {
        let cfg = &self.config;
        let occ = OccurrenceList::from_sorted(self.index.postings(root).iter().copied());
        let mut stack = vec![(vec![root], occ)];
        let mut best: Option<Candidate> = None;
        while let Some((key, occ)) = stack.pop() {
            let eval = self.evaluate_with(&occ, rows);
            let selectable = key.len() >= cfg.min_pattern && !self.lookup.contains_key(&key);
            if selectable && eval.magnitude_at_zero > MAGNITUDE_FLOOR {
                let c = Candidate {
                    key: key.clone(),
                    magnitude: eval.magnitude_at_zero,
                };
                if best.as_ref().map_or(true, |b| c.beats(b)) {
                    incumbent.fetch_max(c.magnitude.to_bits(), AtomicOrdering::Relaxed);
                    best = Some(c);
                }
            }
            if prune {
                let bar = f64::from_bits(incumbent.load(AtomicOrdering::Relaxed));
                if eval.bound <= MAGNITUDE_FLOOR || eval.bound < bar * (1.0 - PRUNE_SLACK) {
                    continue;
                }
            }
            let children =
                self.index
                    .children(&key, &occ, cfg.gap, cfg.min_support, cfg.max_pattern);
            stack.extend(children.into_iter().rev());
        }
        best
    }
}
