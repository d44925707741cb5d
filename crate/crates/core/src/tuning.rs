//! Choosing the penalty `C`: permutation thresholds, the perfect-predictor
//! cutoff and cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BanList, Corpus, Labeling};
use crate::error::{Error, Result};
use crate::index::PostingIndex;
use crate::reporting::fitted_values;
use crate::objective::NormOrder;
use crate::search::{fit, Fitter, SearchConfig};

/// Observed null threshold against its permutation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub c_obs: f64,
    /// Permutation thresholds, ascending.
    pub c_perm: Vec<f64>,
    /// `(1 + #{c_perm >= c_obs}) / (R + 1)`
    pub p_value: f64,
    pub seed: u64,
    pub r: usize,
}

impl ThresholdReport {
    /// Empirical quantile of the permutation thresholds (nearest rank).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.c_perm.len();
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.c_perm[rank - 1]
    }
}

fn index_threshold(index: &PostingIndex, config: &SearchConfig, y: Vec<f64>) -> Result<f64> {
    let mut fitter = Fitter::with_labels(index, *config, y)?;
    fitter.update_intercept();
    Ok(fitter.max_smooth_gradient() / config.penalty.elastic_a)
}

/// Smallest `C` that zeros out every phrase: the largest smooth-gradient
/// magnitude at the intercept-only optimum. Any larger `C` yields an
/// intercept-only model.
pub fn null_threshold_c(
    corpus: &Corpus,
    labeling: &Labeling,
    ban: &BanList,
    config: &SearchConfig,
) -> Result<f64> {
    let index = PostingIndex::build(corpus, labeling, ban);
    let y = index.labels().to_vec();
    index_threshold(&index, config, y)
}

/// Null threshold of the true labeling and of `r` label permutations
/// (zeros held fixed), reproducible from `seed`.
pub fn find_threshold_c(
    corpus: &Corpus,
    labeling: &Labeling,
    ban: &BanList,
    config: &SearchConfig,
    r: usize,
    seed: u64,
) -> Result<ThresholdReport> {
    if r == 0 {
        return Err(Error::InvalidConfig("need at least one permutation".into()));
    }
    let index = PostingIndex::build(corpus, labeling, ban);
    let c_obs = index_threshold(&index, config, index.labels().to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..r)
        .map(|_| {
            let perm = labeling.permuted(&mut rng);
            index
                .doc_ids()
                .iter()
                .map(|&d| f64::from(perm.value(d)))
                .collect()
        })
        .collect();
    let mut c_perm = rows
        .into_par_iter()
        .map(|y| index_threshold(&index, config, y))
        .collect::<Result<Vec<f64>>>()?;
    let exceed = c_perm.iter().filter(|&&c| c >= c_obs).count();
    c_perm.sort_by(f64::total_cmp);
    Ok(ThresholdReport {
        c_obs,
        c_perm,
        p_value: (1 + exceed) as f64 / (r + 1) as f64,
        seed,
        r,
    })
}

/// `C` needed to prune any perfect predictor of `r` positive documents when
/// the remaining model predicts `mu` on them: `2 (1 - mu) r^(1 - 1/q)`.
pub fn perfect_predictor_threshold(r: usize, mu: f64, q: NormOrder) -> Result<f64> {
    if !(mu < 1.0) {
        return Err(Error::DegenerateMean { mu });
    }
    if r == 0 {
        return Err(Error::InvalidConfig("r must be positive".into()));
    }
    Ok(2.0 * (1.0 - mu) * (r as f64).powf(q.dual_exponent()))
}

/// Intercept of the intercept-only fit, the mean prediction with no phrase
/// in the model.
pub fn intercept_only_mean(
    corpus: &Corpus,
    labeling: &Labeling,
    config: &SearchConfig,
) -> Result<f64> {
    let index = PostingIndex::build(corpus, labeling, &BanList::empty());
    let mut fitter = Fitter::new(&index, *config)?;
    fitter.update_intercept();
    Ok(fitter.beta0())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub c_grid: Vec<f64>,
    /// Mean squared held-out error per grid value.
    pub mse: Vec<f64>,
    /// Grid value of least error; ties go to the larger `C`.
    pub best_c: f64,
    pub folds: usize,
    pub seed: u64,
}

/// Stratified assignment of included documents to folds.
fn assign_folds(labeling: &Labeling, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    for class in [1i8, -1] {
        let mut docs: Vec<usize> = labeling
            .included()
            .filter(|&d| labeling.value(d) == class)
            .collect();
        if docs.len() < folds {
            return Err(Error::FoldMissingClass { fold: docs.len() });
        }
        docs.shuffle(&mut rng);
        for (i, d) in docs.into_iter().enumerate() {
            out[i % folds].push(d);
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// `folds`-fold cross-validated squared prediction error over `c_grid`.
pub fn cross_validate_c(
    corpus: &Corpus,
    labeling: &Labeling,
    ban: &BanList,
    config: &SearchConfig,
    folds: usize,
    c_grid: &[f64],
    seed: u64,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least two folds".into()));
    }
    if c_grid.is_empty() {
        return Err(Error::InvalidConfig("empty C grid".into()));
    }
    let assignment = assign_folds(labeling, folds, seed)?;
    let whole = PostingIndex::build_unlabeled(corpus, ban);
    let jobs: Vec<(usize, usize)> = (0..folds)
        .flat_map(|f| (0..c_grid.len()).map(move |c| (f, c)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(f, ci)| {
            let test = &assignment[f];
            let train = labeling
                .excluding(test)
                .map_err(|_| Error::FoldMissingClass { fold: f })?;
            let mut cfg = *config;
            cfg.penalty.c = c_grid[ci];
            let model = fit(corpus, &train, ban, &cfg)?;
            let fitted = fitted_values(&model, &whole);
            Ok(test
                .iter()
                .map(|&d| {
                    let y = f64::from(labeling.value(d));
                    let p = fitted[d].clamp(-1.0, 1.0);
                    (y - p) * (y - p)
                })
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = labeling.included_count() as f64;
    let mut mse = vec![0.0; c_grid.len()];
    for (&(_, ci), e) in jobs.iter().zip(&errors) {
        mse[ci] += e / n;
    }
    let mut best = 0;
    for i in 1..c_grid.len() {
        if mse[i] < mse[best] || mse[i] == mse[best] && c_grid[i] > c_grid[best] {
            best = i;
        }
    }
    Ok(CvReport {
        c_grid: c_grid.to_vec(),
        mse,
        best_c: c_grid[best],
        folds,
        seed,
    })
}
