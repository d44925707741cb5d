//! Greedy coordinate descent over the implicit phrase space.
//!
//! Each iteration re-fits the intercept exactly, finds the coordinate with
//! the steepest available descent (in-model features, then every phrase via
//! a pruned tree scan) and minimizes the objective exactly along it.

mod line;
mod scan;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{BanList, Corpus, Labeling};
use crate::error::{Error, Result};
use crate::index::{count_vector, PhraseKey, PostingIndex, SparseVector};
use crate::objective::{LossKind, PenaltyConfig, RescaleConfig};
use crate::phrase::Phrase;

use line::Coordinate;
pub use scan::Candidate;

/// Coefficients closer to zero than this are evicted.
pub const EVICTION_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub loss: LossKind,
    pub rescale: RescaleConfig,
    pub penalty: PenaltyConfig,
    pub max_iter: usize,
    pub convergence_threshold: f64,
    /// Minimum total number of occurrences of a phrase.
    pub min_support: usize,
    /// Phrase lengths, gaps included.
    pub min_pattern: usize,
    pub max_pattern: usize,
    /// Maximum run of consecutive gap elements.
    pub gap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            loss: LossKind::default(),
            rescale: RescaleConfig::default(),
            penalty: PenaltyConfig::default(),
            max_iter: 40,
            convergence_threshold: 1e-4,
            min_support: 1,
            min_pattern: 1,
            max_pattern: 100,
            gap: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_c(c: f64) -> Self {
        let mut cfg = SearchConfig::default();
        cfg.penalty.c = c;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !(self.convergence_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "convergence threshold must be non-negative".into(),
            ));
        }
        if self.min_pattern == 0 || self.min_pattern > self.max_pattern {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= min_pattern <= max_pattern, got {} and {}",
                self.min_pattern, self.max_pattern
            )));
        }
        Ok(())
    }
}

/// A phrase in the fitted model with its coefficient and norm `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPhrase {
    pub phrase: Phrase,
    pub beta: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Coordinate updated in this iteration besides the intercept.
    pub phrase: Option<Phrase>,
    pub loss: f64,
}

/// A fitted model. Features are in canonical phrase order and never carry a
/// zero coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub beta0: f64,
    pub features: Vec<SelectedPhrase>,
    pub config: SearchConfig,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub stemmed: bool,
    pub corpus_fingerprint: u64,
    pub loss: f64,
    /// Margins `y_i (β0 + x_i'β)` of the training rows.
    #[serde(skip)]
    pub margins: Vec<f64>,
    /// Corpus document of each training row.
    #[serde(skip)]
    pub doc_ids: Vec<usize>,
}

impl ModelState {
    pub fn losses(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.loss).collect()
    }

    pub fn is_intercept_only(&self) -> bool {
        self.features.is_empty()
    }
}

/// Relative loss decrease of the last step is below `threshold`, or the
/// step did not decrease the loss at all.
pub fn converged(losses: &[f64], threshold: f64) -> bool {
    match losses {
        [.., prev, cur] => {
            let rel = (prev - cur) / prev.max(1e-12);
            rel < threshold || rel <= 0.0
        }
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Feature {
    key: PhraseKey,
    beta: f64,
    z: f64,
    /// Rescaled column `c_ij / z_j`.
    column: SparseVector,
}

/// Mutable optimizer state over an index.
pub struct Fitter<'a> {
    index: &'a PostingIndex,
    /// Label of each index row.
    y: Vec<f64>,
    config: SearchConfig,
    beta0: f64,
    features: Vec<Feature>,
    lookup: HashMap<PhraseKey, usize>,
    margins: Vec<f64>,
    trace: Vec<TraceEntry>,
}

impl<'a> Fitter<'a> {
    /// Empty model with zero intercept.
    pub fn new(index: &'a PostingIndex, config: SearchConfig) -> Result<Self> {
        Self::with_labels(index, config, index.labels().to_vec())
    }

    /// Empty model fitting `y` (one label per index row) instead of the
    /// index labels.
    pub fn with_labels(index: &'a PostingIndex, config: SearchConfig, y: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if y.len() != index.n_rows() {
            return Err(Error::LabelLengthMismatch {
                expected: index.n_rows(),
                found: y.len(),
            });
        }
        Ok(Fitter {
            index,
            y,
            config,
            beta0: 0.0,
            features: Vec::new(),
            lookup: HashMap::new(),
            margins: vec![0.0; index.n_rows()],
            trace: Vec::new(),
        })
    }

    /// Model with the given intercept and coefficients; zero coefficients
    /// and phrases absent from the index are skipped.
    pub fn with_state(
        index: &'a PostingIndex,
        config: SearchConfig,
        beta0: f64,
        coefs: &[(Phrase, f64)],
    ) -> Result<Self> {
        let mut f = Fitter::new(index, config)?;
        f.beta0 = beta0;
        for (phrase, beta) in coefs {
            if *beta == 0.0 || f.config.penalty.positive_only && *beta < 0.0 {
                continue;
            }
            let Some(key) = index.key_of(phrase) else {
                continue;
            };
            if f.lookup.contains_key(&key) {
                continue;
            }
            let Some(mut feature) = f.make_feature(key) else {
                continue;
            };
            feature.beta = *beta;
            f.lookup.insert(feature.key.clone(), f.features.len());
            f.features.push(feature);
        }
        f.recompute_margins();
        Ok(f)
    }

    pub fn index(&self) -> &PostingIndex {
        self.index
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    /// `(phrase, β)` of the in-model features.
    pub fn coefficients(&self) -> Vec<(Phrase, f64)> {
        self.features
            .iter()
            .map(|f| (self.index.phrase_of(&f.key), f.beta))
            .collect()
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    fn make_feature(&self, key: PhraseKey) -> Option<Feature> {
        let occ = self.index.occurrences_of_key(&key);
        if occ.is_empty() {
            return None;
        }
        let counts = count_vector(&occ, self.config.rescale.binary_features);
        let z = crate::objective::norm(&counts.values, &self.config.rescale).ok()?;
        let column = SparseVector {
            rows: counts.rows,
            values: counts.values.iter().map(|c| c / z).collect(),
        };
        Some(Feature {
            key,
            beta: 0.0,
            z,
            column,
        })
    }

    pub fn recompute_margins(&mut self) {
        let y = &self.y;
        let mut fx = vec![self.beta0; y.len()];
        for f in &self.features {
            for (r, x) in f.column.iter() {
                fx[r as usize] += f.beta * x;
            }
        }
        self.margins = fx.iter().zip(y).map(|(v, yi)| v * yi).collect();
    }

    /// Current objective value.
    pub fn objective(&self) -> f64 {
        crate::objective::loss_value(
            self.config.loss,
            &self.margins,
            self.features.iter().map(|f| f.beta),
            &self.config.penalty,
        )
    }

    /// Exact minimization over the unpenalized intercept.
    pub fn update_intercept(&mut self) {
        let terms: Vec<(f64, f64)> = self
            .labels()
            .iter()
            .zip(&self.margins)
            .map(|(&y, &m)| (y, m))
            .collect();
        let target = Coordinate {
            loss: self.config.loss,
            terms: &terms,
            current: self.beta0,
            l1: 0.0,
            l2: 0.0,
            positive_only: false,
        }
        .minimize();
        let delta = target - self.beta0;
        if delta != 0.0 {
            let y = &self.y;
            for (m, yi) in self.margins.iter_mut().zip(y) {
                *m += yi * delta;
            }
            self.beta0 = target;
        }
    }

    /// Exact minimization along one phrase coordinate, adding or evicting
    /// the feature as needed. Returns the new coefficient.
    pub fn update_feature(&mut self, key: &[u32]) -> f64 {
        let slot = match self.lookup.get(key) {
            Some(&i) => i,
            None => match self.make_feature(key.to_vec()) {
                Some(f) => {
                    self.features.push(f);
                    self.features.len() - 1
                }
                None => return 0.0,
            },
        };
        let y = &self.y;
        let feature = &self.features[slot];
        let terms: Vec<(f64, f64)> = feature
            .column
            .iter()
            .map(|(r, x)| (y[r as usize] * x, self.margins[r as usize]))
            .collect();
        let penalty = &self.config.penalty;
        let mut target = Coordinate {
            loss: self.config.loss,
            terms: &terms,
            current: feature.beta,
            l1: penalty.l1(),
            l2: penalty.l2(),
            positive_only: penalty.positive_only,
        }
        .minimize();
        if target.abs() < EVICTION_THRESHOLD {
            target = 0.0;
        }
        let delta = target - feature.beta;
        if delta != 0.0 {
            for (r, x) in feature.column.iter() {
                self.margins[r as usize] += y[r as usize] * x * delta;
            }
        }
        self.features[slot].beta = target;
        if target == 0.0 {
            self.features.remove(slot);
        }
        self.lookup = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.key.clone(), i))
            .collect();
        target
    }

    /// Runs the descent until convergence or `max_iter`; returns whether it
    /// converged.
    pub fn run(&mut self) -> bool {
        let mut losses = vec![self.objective()];
        self.trace.push(TraceEntry {
            iteration: 0,
            phrase: None,
            loss: losses[0],
        });
        for iteration in 1..=self.config.max_iter {
            self.update_intercept();
            let candidate = self.find_highest_gradient(true);
            let phrase = candidate.as_ref().map(|c| {
                self.update_feature(&c.key);
                self.index.phrase_of(&c.key)
            });
            let loss = self.objective();
            debug_assert!(
                loss <= losses[losses.len() - 1] + 1e-9 * losses[losses.len() - 1].max(1.0),
                "loss increased"
            );
            log::debug!(
                "iteration {iteration}: loss {loss:.6}, {} features, updated {}",
                self.features.len(),
                phrase.as_ref().map_or("nothing".to_owned(), |p| p.to_string())
            );
            losses.push(loss);
            self.trace.push(TraceEntry {
                iteration,
                phrase,
                loss,
            });
            if candidate.is_none() || converged(&losses, self.config.convergence_threshold) {
                return true;
            }
        }
        false
    }

    /// Largest smooth-gradient magnitude over all phrases at the current
    /// margins, ignoring the penalty and the in-model features.
    pub fn max_smooth_gradient(&self) -> f64 {
        let mut probe = self.config;
        probe.penalty.c = 0.0;
        let view = Fitter {
            index: self.index,
            y: self.y.clone(),
            config: probe,
            beta0: self.beta0,
            features: Vec::new(),
            lookup: HashMap::new(),
            margins: self.margins.clone(),
            trace: Vec::new(),
        };
        view.find_highest_gradient(true)
            .map_or(0.0, |c| c.magnitude)
    }

    pub fn into_model(self, corpus: &Corpus, converged: bool) -> ModelState {
        let loss = self.objective();
        let mut features: Vec<SelectedPhrase> = self
            .features
            .iter()
            .map(|f| SelectedPhrase {
                phrase: self.index.phrase_of(&f.key),
                beta: f.beta,
                z: f.z,
            })
            .collect();
        features.sort_by(|a, b| a.phrase.cmp(&b.phrase));
        ModelState {
            beta0: self.beta0,
            features,
            config: self.config,
            trace: self.trace,
            converged,
            stemmed: corpus.is_stemmed(),
            corpus_fingerprint: corpus.fingerprint(),
            loss,
            margins: self.margins,
            doc_ids: self.index.doc_ids().to_vec(),
        }
    }
}

/// Fits the phrase regression of `labeling` on `corpus`.
pub fn fit(
    corpus: &Corpus,
    labeling: &Labeling,
    ban: &BanList,
    config: &SearchConfig,
) -> Result<ModelState> {
    config.validate()?;
    if labeling.len() != corpus.len() {
        return Err(Error::LabelLengthMismatch {
            expected: corpus.len(),
            found: labeling.len(),
        });
    }
    let index = PostingIndex::build(corpus, labeling, ban);
    let mut fitter = Fitter::new(&index, *config)?;
    let converged = fitter.run();
    Ok(fitter.into_model(corpus, converged))
}
