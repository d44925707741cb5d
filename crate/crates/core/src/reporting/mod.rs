//! Summary tables, context fragments, predictions, metrics and design
//! matrices of fitted models.

mod render;

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{stem_token, BanList, Corpus, Labeling, STEM_MARKER};
use crate::error::{Error, Result};
use crate::index::{count_vector, PostingIndex};
use crate::phrase::{Element, Phrase};
use crate::search::{ModelState, SelectedPhrase};

pub use render::{
    render_cv, render_design_matrix, render_fragments, render_list_table, render_metrics,
    render_predictions, render_summary, render_threshold, OutputFormat,
};

/// Phrase statistics. `beta` is absent for phrases profiled outside a
/// model. Percentages are exact; rounding happens at display time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub phrase: String,
    pub beta: Option<f64>,
    /// Total occurrences.
    pub num_phrase: usize,
    /// Documents containing the phrase.
    pub num_reports: usize,
    /// Positive documents containing the phrase.
    pub num_tag: usize,
    /// `100 num_tag / num_reports`
    pub pct_tag: f64,
    /// `100 num_tag / s`, `s` the number of positive documents.
    pub pct_phrase: f64,
}

/// Counts phrases over the documents a labeling includes, with no ban list.
struct Counter {
    index: PostingIndex,
    positives: usize,
}

impl Counter {
    fn new(corpus: &Corpus, labeling: &Labeling) -> Self {
        Counter {
            index: PostingIndex::build(corpus, labeling, &BanList::empty()),
            positives: labeling.positive_count(),
        }
    }

    fn row(&self, phrase: &Phrase, beta: Option<f64>) -> SummaryRow {
        let occ = self.index.occurrences(phrase);
        let labels = self.index.labels();
        let num_reports = occ.document_count();
        let num_tag = occ
            .entries()
            .filter(|&(r, _)| labels[r as usize] > 0.0)
            .count();
        let pct = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        SummaryRow {
            phrase: phrase.to_string(),
            beta,
            num_phrase: occ.total_count(),
            num_reports,
            num_tag,
            pct_tag: pct(num_tag, num_reports),
            pct_phrase: pct(num_tag, self.positives),
        }
    }
}

/// Model features by decreasing `|β|`, then canonical phrase order.
pub fn ordered_features(model: &ModelState) -> Vec<&SelectedPhrase> {
    let mut out: Vec<&SelectedPhrase> = model.features.iter().collect();
    out.sort_by(|a, b| {
        b.beta
            .abs()
            .partial_cmp(&a.beta.abs())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.phrase.cmp(&b.phrase))
    });
    out
}

/// One row per selected phrase, counted over the labeled documents.
pub fn summary_table(model: &ModelState, corpus: &Corpus, labeling: &Labeling) -> Vec<SummaryRow> {
    let counter = Counter::new(corpus, labeling);
    ordered_features(model)
        .into_iter()
        .map(|f| counter.row(&f.phrase, Some(f.beta)))
        .collect()
}

/// Count statistics for arbitrary phrases, banned or absent ones included.
pub fn phrase_count_table(phrases: &[Phrase], corpus: &Corpus, labeling: &Labeling) -> Vec<SummaryRow> {
    let counter = Counter::new(corpus, labeling);
    phrases.iter().map(|p| counter.row(p, None)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListRow {
    pub phrase: String,
    /// Coefficient per run; absent where the run did not select the phrase.
    pub betas: Vec<Option<f64>>,
    pub num_reports: usize,
    pub num_tag: usize,
    pub pct_tag: f64,
    pub pct_phrase: f64,
}

/// Phrases of several runs side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListTable {
    pub runs: Vec<String>,
    pub rows: Vec<ListRow>,
}

/// Union of the runs' phrases in canonical order, with statistics against
/// the reference `labeling`.
pub fn list_table(
    results: &[(String, ModelState)],
    corpus: &Corpus,
    labeling: &Labeling,
) -> Result<ListTable> {
    for (label, model) in results {
        if model.corpus_fingerprint != corpus.fingerprint() {
            return Err(Error::CorpusMismatch(label.clone()));
        }
    }
    let mut phrases: Vec<&Phrase> = results
        .iter()
        .flat_map(|(_, m)| m.features.iter().map(|f| &f.phrase))
        .collect();
    phrases.sort();
    phrases.dedup();
    let counter = Counter::new(corpus, labeling);
    let rows = phrases
        .into_iter()
        .map(|p| {
            let stats = counter.row(p, None);
            ListRow {
                phrase: stats.phrase,
                betas: results
                    .iter()
                    .map(|(_, m)| m.features.iter().find(|f| &f.phrase == p).map(|f| f.beta))
                    .collect(),
                num_reports: stats.num_reports,
                num_tag: stats.num_tag,
                pct_tag: stats.pct_tag,
                pct_phrase: stats.pct_phrase,
            }
        })
        .collect();
    Ok(ListTable {
        runs: results.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}

/// A phrase match in context. Text fields hold display (unstemmed) tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub doc: usize,
    pub label: i8,
    pub before: String,
    pub span: String,
    pub after: String,
}

impl std::fmt::Display for Fragment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::with_capacity(3);
        if !self.before.is_empty() {
            parts.push(self.before.clone());
        }
        parts.push(format!("**{}**", self.span));
        if !self.after.is_empty() {
            parts.push(self.after.clone());
        }
        f.write_str(&parts.join(" "))
    }
}

/// Whether a phrase word matches a corpus token. On an unstemmed corpus a
/// stemmed word matches every token with that stem.
fn word_matches(word: &str, token: &str, stemmed_corpus: bool) -> bool {
    if !stemmed_corpus && word.ends_with(STEM_MARKER) {
        stem_token(token) == word
    } else {
        word == token
    }
}

/// Start positions of the phrase in a token list.
fn match_starts(phrase: &Phrase, tokens: &[String], stemmed_corpus: bool) -> Vec<usize> {
    let els = phrase.elements();
    if tokens.len() < els.len() {
        return Vec::new();
    }
    (0..=tokens.len() - els.len())
        .filter(|&s| {
            els.iter().enumerate().all(|(k, e)| match e {
                Element::Gap => true,
                Element::Word(w) => word_matches(w, &tokens[s + k], stemmed_corpus),
            })
        })
        .collect()
}

/// Up to `n` matches of `phrase` sampled uniformly (reproducibly from
/// `seed`), each with `window` tokens of context on either side. Documents
/// are labeled from `labeling` when given.
pub fn sample_fragments(
    phrase: &Phrase,
    corpus: &Corpus,
    labeling: Option<&Labeling>,
    n: usize,
    window: usize,
    seed: u64,
) -> Vec<Fragment> {
    let mut matches: Vec<(usize, usize)> = corpus
        .documents()
        .iter()
        .flat_map(|d| {
            match_starts(phrase, &d.tokens, corpus.is_stemmed())
                .into_iter()
                .map(move |s| (d.id, s))
        })
        .collect();
    if matches.len() > n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        matches = matches.choose_multiple(&mut rng, n).copied().collect();
        matches.sort_unstable();
    }
    let len = phrase.len();
    matches
        .into_iter()
        .map(|(doc, start)| {
            let tokens = corpus.display_tokens(doc);
            let end = start + len;
            Fragment {
                doc,
                label: labeling.map_or(0, |l| l.value(doc)),
                before: tokens[start.saturating_sub(window)..start].join(" "),
                span: tokens[start..end].join(" "),
                after: tokens[end..(end + window).min(tokens.len())].join(" "),
            }
        })
        .collect()
}

/// Fitted values `β0 + x'β` on every row of `index`.
pub(crate) fn fitted_values(model: &ModelState, index: &PostingIndex) -> Vec<f64> {
    let mut out = vec![model.beta0; index.n_rows()];
    for (j, column) in model_columns(model, index).into_iter().enumerate() {
        let beta = model.features[j].beta;
        for (r, x) in column {
            out[r] += beta * x;
        }
    }
    out
}

/// Rescaled sparse columns `(row, c_ij / z_j)` of the model features, in
/// model order, with norms frozen from training.
fn model_columns(model: &ModelState, index: &PostingIndex) -> Vec<Vec<(usize, f64)>> {
    let binary = model.config.rescale.binary_features;
    model
        .features
        .iter()
        .map(|f| {
            count_vector(&index.occurrences(&f.phrase), binary)
                .iter()
                .map(|(r, c)| (r as usize, c / f.z))
                .collect()
        })
        .collect()
}

fn check_stemming(model: &ModelState, corpus: &Corpus) -> Result<()> {
    let name = |s: bool| if s { "stemmed" } else { "unstemmed" };
    if model.stemmed != corpus.is_stemmed() {
        return Err(Error::StemmingMismatch {
            model: name(model.stemmed),
            corpus: name(corpus.is_stemmed()),
        });
    }
    Ok(())
}

/// Scores of every corpus document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub scores: Vec<f64>,
}

impl PredictionVector {
    /// Sign classification; a zero score counts as negative.
    pub fn classes(&self) -> Vec<i8> {
        self.scores.iter().map(|&s| if s > 0.0 { 1 } else { -1 }).collect()
    }
}

/// Scores `β0 + Σ β_j c_ij / z_j` on any corpus prepared like the training
/// corpus.
pub fn predict(model: &ModelState, corpus: &Corpus) -> Result<PredictionVector> {
    check_stemming(model, corpus)?;
    let index = PostingIndex::build_unlabeled(corpus, &BanList::empty());
    Ok(PredictionVector {
        scores: fitted_values(model, &index),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Absent when no document is predicted positive.
    pub precision: Option<f64>,
    pub recall: f64,
    /// Absent when no document is predicted positive.
    pub f1: Option<f64>,
    pub auc: f64,
}

/// Classification metrics of scores against `truth`; documents with a zero
/// truth label are skipped.
pub fn evaluate(scores: &[f64], truth: &[i8]) -> Result<Metrics> {
    if scores.len() != truth.len() {
        return Err(Error::LabelLengthMismatch {
            expected: scores.len(),
            found: truth.len(),
        });
    }
    let pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(truth)
        .filter(|(_, &t)| t != 0)
        .map(|(&s, &t)| (s, t > 0))
        .collect();
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassTruth);
    }
    let tp = pairs.iter().filter(|&&(s, t)| t && s > 0.0).count() as f64;
    let predicted = pairs.iter().filter(|p| p.0 > 0.0).count() as f64;
    let recall = tp / pos as f64;
    let (precision, f1) = if predicted == 0.0 {
        (None, None)
    } else {
        (
            Some(tp / predicted),
            Some(2.0 * tp / (predicted + pos as f64)),
        )
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        auc: auc(&pairs, pos, neg),
    })
}

/// Rank-sum AUC with midranks for ties.
fn auc(pairs: &[(f64, bool)], pos: usize, neg: usize) -> f64 {
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * sorted[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// Dense design matrix: an all-ones intercept column followed by the
/// rescaled feature columns in summary-table order, one row per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub const INTERCEPT_COLUMN: &str = "(intercept)";

pub fn design_matrix(model: &ModelState, corpus: &Corpus) -> Result<DesignMatrix> {
    check_stemming(model, corpus)?;
    let index = PostingIndex::build_unlabeled(corpus, &BanList::empty());
    let ordered = ordered_features(model);
    let columns_by_model = model_columns(model, &index);
    let mut rows = vec![vec![0.0; ordered.len() + 1]; corpus.len()];
    for row in &mut rows {
        row[0] = 1.0;
    }
    for (k, f) in ordered.iter().enumerate() {
        let j = model
            .features
            .iter()
            .position(|g| std::ptr::eq(g, *f))
            .expect("ordered features come from the model");
        for &(r, x) in &columns_by_model[j] {
            rows[r][k + 1] = x;
        }
    }
    let mut columns = vec![INTERCEPT_COLUMN.to_owned()];
    columns.extend(ordered.iter().map(|f| f.phrase.to_string()));
    Ok(DesignMatrix { columns, rows })
}
