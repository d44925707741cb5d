use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use phrasereg::index::PostingIndex;
use phrasereg::objective::{intercept_gradient, LossKind};
use phrasereg::search::Fitter;
use phrasereg::tuning::{
    find_threshold_c, intercept_only_mean, null_threshold_c, perfect_predictor_threshold,
};
use phrasereg::{
    fit, BanList, Corpus, Labeling, NormOrder, PenaltyConfig, Phrase, RescaleConfig, SearchConfig,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::{
    ancestors, column, count_in, enumerate_phrases, hinge, hinge_slope, labeled, median,
    random_corpus,
};
use crate::oracle;
use crate::{Outcome, Traces};

// ---- 1 ----------------------------------------------------------------

/// Absolute tolerance for cells printed as exact expressions.
const EXACT_CELL_TOL: f64 = 1e-9;

enum Cell {
    Exact(f64),
    /// Printed as `≈value`; must agree to one unit of the last printed digit.
    Approx(f64, f64),
    /// Printed value contradicts the row's own formula column; checked
    /// against the formula and reported.
    Erratum { printed: &'static str, formula: f64 },
}

pub fn table(_: &mut Traces) -> Outcome {
    let s2 = 2f64.sqrt();
    let inf = NormOrder::Infinity;
    let f = NormOrder::Finite;
    // (q, mu, r, printed cell)
    let cells: Vec<(NormOrder, f64, usize, Cell)> = vec![
        (inf, -1.0, 1, Cell::Exact(4.0)),
        (inf, -1.0, 2, Cell::Exact(8.0)),
        (inf, -1.0, 4, Cell::Exact(16.0)),
        (inf, 0.0, 1, Cell::Exact(2.0)),
        (inf, 0.0, 2, Cell::Exact(4.0)),
        (inf, 0.0, 4, Cell::Exact(8.0)),
        (f(4.0), -1.0, 1, Cell::Exact(4.0)),
        (f(4.0), -1.0, 2, Cell::Approx(6.7, 0.1)),
        (f(4.0), -1.0, 4, Cell::Approx(11.3, 0.1)),
        (f(4.0), 0.0, 1, Cell::Exact(2.0)),
        (f(4.0), 0.0, 2, Cell::Approx(3.4, 0.1)),
        (f(4.0), 0.0, 4, Cell::Approx(5.6, 0.1)),
        (f(2.0), -1.0, 1, Cell::Exact(4.0)),
        (f(2.0), -1.0, 2, Cell::Exact(4.0 * s2)),
        (f(2.0), -1.0, 4, Cell::Exact(8.0)),
        (f(2.0), 0.0, 1, Cell::Exact(2.0)),
        (
            f(2.0),
            0.0,
            2,
            Cell::Erratum {
                printed: "sqrt(2)",
                formula: 2.0 * s2,
            },
        ),
        (f(2.0), 0.0, 4, Cell::Exact(4.0)),
        (f(4.0 / 3.0), -1.0, 1, Cell::Exact(4.0)),
        (f(4.0 / 3.0), -1.0, 2, Cell::Approx(4.75, 0.01)),
        (f(4.0 / 3.0), -1.0, 4, Cell::Approx(5.7, 0.1)),
        (f(4.0 / 3.0), 0.0, 1, Cell::Exact(2.0)),
        (f(4.0 / 3.0), 0.0, 2, Cell::Approx(2.4, 0.1)),
        (f(4.0 / 3.0), 0.0, 4, Cell::Approx(2.8, 0.1)),
        (f(1.0), -1.0, 1, Cell::Exact(4.0)),
        (f(1.0), -1.0, 2, Cell::Exact(4.0)),
        (f(1.0), -1.0, 4, Cell::Exact(4.0)),
        (f(1.0), 0.0, 1, Cell::Exact(2.0)),
        (f(1.0), 0.0, 2, Cell::Exact(2.0)),
        (f(1.0), 0.0, 4, Cell::Exact(2.0)),
    ];
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for (q, mu, r, cell) in &cells {
        let got = perfect_predictor_threshold(*r, *mu, *q).unwrap();
        let ok = match cell {
            Cell::Exact(v) => (got - v).abs() < EXACT_CELL_TOL,
            Cell::Approx(v, unit) => (got - v).abs() < *unit,
            Cell::Erratum { printed, formula } => {
                notes.push(format!(
                    "q={q:?} mu={mu} r={r} printed {printed}, row formula gives {formula:.4}"
                ));
                (got - formula).abs() < EXACT_CELL_TOL
            }
        };
        if !ok {
            bad.push(format!("q={q:?} mu={mu} r={r} got {got}"));
        }
    }
    let mut detail = format!("{}/{} cells match", cells.len() - bad.len(), cells.len());
    if !notes.is_empty() {
        detail += &format!("; erratum checked against its row formula: {}", notes.join("; "));
    }
    if !bad.is_empty() {
        detail += &format!("; mismatches: {}", bad.join("; "));
    }
    Outcome::new(bad.is_empty() && cells.len() == 30, detail)
}

// ---- 2 ----------------------------------------------------------------

const CLOSED_FORM_TOL: f64 = 1e-6;

fn precise(c: f64) -> SearchConfig {
    let mut cfg = SearchConfig::with_c(c);
    cfg.max_iter = 100_000;
    cfg.convergence_threshold = 0.0;
    cfg
}

pub fn closed_form(traces: &mut Traces) -> Outcome {
    let corpus = Corpus::from_texts(["cat", "dog"]).unwrap();
    let labels = Labeling::new(&corpus, &[1, -1]).unwrap();
    let ban = BanList::new(["dog"], false);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for c in [0.25, 0.5, 1.0, 1.5] {
        let model = fit(&corpus, &labels, &ban, &precise(c)).unwrap();
        traces.record(format!("closed form C={c}"), model.losses());
        let beta = model.features.first().map_or(0.0, |f| f.beta);
        let err = (model.beta0 - (c / 2.0 - 1.0)).abs().max((beta - (2.0 - c)).abs());
        worst = worst.max(err);
        ok &= model.features.len() == 1 && err < CLOSED_FORM_TOL;
    }
    for c in [2.0, 2.5, 4.0] {
        let model = fit(&corpus, &labels, &ban, &precise(c)).unwrap();
        traces.record(format!("closed form C={c}"), model.losses());
        ok &= model.features.is_empty();
    }
    Outcome::new(
        ok,
        format!("max |error| {worst:.2e} for C in {{0.25,0.5,1,1.5}}; intercept-only for C in {{2,2.5,4}}"),
    )
}

// ---- 3 ----------------------------------------------------------------

const ORACLE_CORPORA: usize = 100;
const ORACLE_LOSS_TOL: f64 = 1e-4;
/// Separation required to call an oracle optimum unique.
const SUPPORT_GAP: f64 = 1e-3;
const ORACLE_ITERS: usize = 200_000;

pub fn oracle_equivalence(traces: &mut Traces) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let qs = [NormOrder::Finite(1.5), NormOrder::Finite(2.0), NormOrder::Finite(4.0), NormOrder::Infinity];
    let mut worst: f64 = 0.0;
    let mut unique = 0;
    let mut failures = Vec::new();
    let mut max_p = 0;
    for k in 0..ORACLE_CORPORA {
        let (corpus, labels) = random_corpus(&mut rng, 12, 8, false);
        let labeling = Labeling::new(&corpus, &labels).unwrap();
        let mut cfg = precise(1.0);
        cfg.max_pattern = rng.gen_range(1..=3);
        cfg.rescale.q = *qs.choose(&mut rng).unwrap();
        let c_null = null_threshold_c(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
        cfg.penalty.c = c_null * rng.gen_range(0.1..0.9);
        let model = fit(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
        traces.record(format!("oracle corpus {k}"), model.losses());

        let (docs, y) = labeled(&corpus, &labels);
        let phrases = enumerate_phrases(&docs, cfg.max_pattern, 0, 1);
        max_p = max_p.max(phrases.len());
        let cols: Vec<Vec<f64>> = phrases.iter().map(|p| column(&docs, p, &cfg.rescale)).collect();
        let x: Vec<Vec<f64>> = (0..docs.len())
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        let c = cfg.penalty.c;
        let sol = oracle::solve(&x, &y, c, ORACLE_ITERS);
        let diff = (model.loss - sol.loss).abs();
        worst = worst.max(diff);
        if diff > ORACLE_LOSS_TOL {
            failures.push(format!("corpus {k}: loss {} vs oracle {}", model.loss, sol.loss));
            continue;
        }

        let support: Vec<usize> = (0..phrases.len()).filter(|&j| sol.beta[j] != 0.0).collect();
        let separated = support.iter().all(|&j| sol.beta[j].abs() > SUPPORT_GAP)
            && (0..phrases.len())
                .filter(|j| !support.contains(j))
                .all(|j| c - sol.gradient[j].abs() > SUPPORT_GAP)
            && sol.margins.iter().all(|m| (m - 1.0).abs() > 1e-6);
        if !separated {
            continue;
        }
        let active: Vec<Vec<f64>> = (0..docs.len())
            .filter(|&i| sol.margins[i] < 1.0)
            .map(|i| std::iter::once(1.0).chain(support.iter().map(|&j| x[i][j])).collect())
            .collect();
        if oracle::rank(active) != support.len() + 1 {
            continue;
        }
        unique += 1;
        let expected: BTreeSet<&Phrase> = support.iter().map(|&j| &phrases[j]).collect();
        let got: BTreeSet<&Phrase> = model.features.iter().map(|f| &f.phrase).collect();
        if expected != got {
            failures.push(format!("corpus {k}: support {got:?} vs oracle {expected:?}"));
        }
    }
    let mut detail = format!(
        "{ORACLE_CORPORA} corpora (up to {max_p} phrases), max |loss - oracle| {worst:.2e}, \
         support identical on all {unique} unique optima"
    );
    if !failures.is_empty() {
        detail = format!("{} failures: {}", failures.len(), failures.join("; "));
    }
    Outcome::new(failures.is_empty(), detail)
}

// ---- 4 ----------------------------------------------------------------

const SOUNDNESS_STATES: usize = 1000;
const BOUND_TOL: f64 = 1e-9;
/// Relative agreement between library and independent magnitudes.
const MAGNITUDE_TOL: f64 = 1e-9;

fn random_config<R: Rng>(rng: &mut R) -> SearchConfig {
    let qs = [
        NormOrder::Finite(1.0),
        NormOrder::Finite(4.0 / 3.0),
        NormOrder::Finite(2.0),
        NormOrder::Finite(3.0),
        NormOrder::Infinity,
    ];
    let max_pattern = rng.gen_range(1..=3);
    SearchConfig {
        rescale: RescaleConfig {
            q: *qs.choose(rng).unwrap(),
            binary_features: rng.gen_bool(0.2),
            no_rescaling: rng.gen_bool(0.2),
        },
        penalty: PenaltyConfig {
            c: rng.gen_range(0.0..2.5),
            elastic_a: if rng.gen_bool(0.3) { 0.5 } else { 1.0 },
            positive_only: rng.gen_bool(0.2),
        },
        max_pattern,
        min_pattern: rng.gen_range(1..=max_pattern.min(2)),
        min_support: rng.gen_range(1..=2),
        gap: rng.gen_range(0..=1),
        ..SearchConfig::default()
    }
}

/// Random in-model coefficients on selectable phrases.
fn random_state<R: Rng>(rng: &mut R, phrases: &[Phrase], cfg: &SearchConfig) -> (f64, Vec<(Phrase, f64)>) {
    let pool: Vec<&Phrase> = phrases.iter().filter(|p| p.len() >= cfg.min_pattern).collect();
    let k = rng.gen_range(0..=3.min(pool.len()));
    let coefs = pool
        .choose_multiple(rng, k)
        .map(|p| {
            let b: f64 = rng.gen_range(0.05..2.0);
            let b = if cfg.penalty.positive_only || rng.gen_bool(0.5) { b } else { -b };
            ((*p).clone(), b)
        })
        .collect();
    (rng.gen_range(-1.5..1.5), coefs)
}

/// Margins computed from independent columns.
fn own_margins(
    docs: &[&[String]],
    y: &[f64],
    beta0: f64,
    coefs: &[(Phrase, f64)],
    rescale: &RescaleConfig,
) -> Vec<f64> {
    let mut f = vec![beta0; docs.len()];
    for (p, b) in coefs {
        for (fi, x) in f.iter_mut().zip(column(docs, p, rescale)) {
            *fi += b * x;
        }
    }
    f.iter().zip(y).map(|(v, yi)| v * yi).collect()
}

fn own_gradient(col: &[f64], y: &[f64], margins: &[f64]) -> f64 {
    col.iter()
        .zip(y)
        .zip(margins)
        .map(|((x, yi), m)| hinge_slope(*m) * yi * x)
        .sum()
}

fn own_magnitude(g: f64, beta: f64, p: &PenaltyConfig) -> f64 {
    let l1 = p.c * p.elastic_a;
    let l2 = p.c * (1.0 - p.elastic_a);
    if beta != 0.0 {
        (g + l1 * beta.signum() + 2.0 * l2 * beta).abs()
    } else if p.positive_only {
        (-g - l1).max(0.0)
    } else {
        (g.abs() - l1).max(0.0)
    }
}

/// Every phrase reached by the library's child expansion.
fn library_phrases(index: &PostingIndex, cfg: &SearchConfig) -> BTreeSet<Phrase> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<Vec<u32>> = index
        .unigram_ids()
        .filter(|&id| index.support(id) >= cfg.min_support)
        .map(|id| vec![id])
        .collect();
    while let Some(key) = stack.pop() {
        let occ = index.occurrences_of_key(&key);
        for (child, _) in index.children(&key, &occ, cfg.gap, cfg.min_support, cfg.max_pattern) {
            stack.push(child);
        }
        out.insert(index.phrase_of(&key));
    }
    out
}

pub fn pruning_soundness(_: &mut Traces) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut pairs = 0usize;
    let mut selections = 0usize;
    for s in 0..SOUNDNESS_STATES {
        let (corpus, labels) = random_corpus(&mut rng, 12, 8, true);
        let labeling = Labeling::new(&corpus, &labels).unwrap();
        let cfg = random_config(&mut rng);
        let index = PostingIndex::build(&corpus, &labeling, &BanList::empty());
        let (docs, y) = labeled(&corpus, &labels);
        let phrases = enumerate_phrases(&docs, cfg.max_pattern, cfg.gap, cfg.min_support);
        if library_phrases(&index, &cfg) != phrases.iter().cloned().collect() {
            failures.push(format!("state {s}: phrase space differs from enumeration"));
            continue;
        }
        let (beta0, coefs) = random_state(&mut rng, &phrases, &cfg);
        let fitter = Fitter::with_state(&index, cfg, beta0, &coefs).unwrap();

        let pruned = fitter.find_highest_gradient(true);
        let full = fitter.find_highest_gradient(false);
        if pruned != full {
            failures.push(format!("state {s}: pruned {pruned:?} vs exhaustive {full:?}"));
            continue;
        }

        // independent argmax over the enumerated space
        let margins = own_margins(&docs, &y, beta0, &coefs, &cfg.rescale);
        let in_model: BTreeMap<&Phrase, f64> = coefs.iter().map(|(p, b)| (p, *b)).collect();
        let mut own: BTreeMap<Phrase, f64> = BTreeMap::new();
        for p in &phrases {
            let beta = in_model.get(p).copied().unwrap_or(0.0);
            if beta == 0.0 && p.len() < cfg.min_pattern {
                continue;
            }
            let g = own_gradient(&column(&docs, p, &cfg.rescale), &y, &margins);
            own.insert(p.clone(), own_magnitude(g, beta, &cfg.penalty));
        }
        let own_max = own.values().cloned().fold(0.0, f64::max);
        let slack = MAGNITUDE_TOL * own_max.max(1.0);
        match &pruned {
            None if own_max > 1e-12 + slack => {
                failures.push(format!("state {s}: none found, independent max {own_max}"))
            }
            Some(c) => {
                let phrase = index.phrase_of(&c.key);
                let mine = own.get(&phrase).copied().unwrap_or(-1.0);
                if mine < own_max - slack || (mine - c.magnitude).abs() > slack {
                    failures.push(format!(
                        "state {s}: picked {phrase} at {} (independent {mine}), max {own_max}",
                        c.magnitude
                    ));
                }
                selections += 1;
            }
            None => {}
        }

        // each phrase's at-zero magnitude is within every ancestor's bound
        for p in &phrases {
            let key = index.key_of(p).unwrap();
            let m = fitter.evaluate_key(&key).magnitude_at_zero;
            for a in ancestors(p) {
                let bound = fitter.evaluate_key(&index.key_of(&a).unwrap()).bound;
                pairs += 1;
                if m > bound + BOUND_TOL {
                    failures.push(format!("state {s}: {p} at {m} exceeds bound {bound} of {a}"));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "{SOUNDNESS_STATES} states agree ({selections} with a selection); \
             {pairs} ancestor/descendant pairs within bound"
        )
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    Outcome::new(failures.is_empty(), detail)
}

// ---- 5 ----------------------------------------------------------------

const GRADIENT_STATES: usize = 20;
const FEATURES_PER_STATE: usize = 50;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-6;
/// Margins closer than this to the hinge are treated as kinks.
const KINK_CLEARANCE: f64 = 1e-4;

fn data_loss(margins: &[f64]) -> f64 {
    margins.iter().map(|&m| hinge(m)).sum()
}

/// Central difference of the data loss along a direction `dm` of margins.
fn central(margins: &[f64], dm: &[f64]) -> f64 {
    let shifted = |t: f64| -> Vec<f64> { margins.iter().zip(dm).map(|(m, d)| m + t * d).collect() };
    (data_loss(&shifted(FD_STEP)) - data_loss(&shifted(-FD_STEP))) / (2.0 * FD_STEP)
}

fn near_kink(margins: &[f64], dm: &[f64]) -> bool {
    margins
        .iter()
        .zip(dm)
        .any(|(m, d)| *d != 0.0 && (m - 1.0).abs() < KINK_CLEARANCE)
}

pub fn gradients(_: &mut Traces) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(1.0);
    for s in 0..GRADIENT_STATES {
        let (corpus, labels) = random_corpus(&mut rng, 12, 8, true);
        let labeling = Labeling::new(&corpus, &labels).unwrap();
        let mut cfg = random_config(&mut rng);
        cfg.penalty.positive_only = false;
        let index = PostingIndex::build(&corpus, &labeling, &BanList::empty());
        let (docs, y) = labeled(&corpus, &labels);
        let phrases = enumerate_phrases(&docs, cfg.max_pattern, cfg.gap, cfg.min_support);
        let (beta0, coefs) = random_state(&mut rng, &phrases, &cfg);
        let fitter = Fitter::with_state(&index, cfg, beta0, &coefs).unwrap();
        let margins = own_margins(&docs, &y, beta0, &coefs, &cfg.rescale);
        if margins
            .iter()
            .zip(fitter.margins())
            .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            failures.push(format!("state {s}: margins disagree"));
            continue;
        }

        // intercept: direction y
        if near_kink(&margins, &y) {
            skipped += 1;
        } else {
            let a = intercept_gradient(LossKind::SquaredHinge, fitter.labels(), fitter.margins());
            let e = rel(a, central(&margins, &y));
            worst = worst.max(e);
            checked += 1;
            if e >= FD_REL_TOL {
                failures.push(format!("state {s}: intercept error {e:.2e}"));
            }
        }

        // smooth gradients of random phrases
        for _ in 0..FEATURES_PER_STATE {
            let p = phrases.choose(&mut rng).unwrap();
            let dm: Vec<f64> = column(&docs, p, &cfg.rescale)
                .iter()
                .zip(&y)
                .map(|(x, yi)| x * yi)
                .collect();
            if near_kink(&margins, &dm) {
                skipped += 1;
                continue;
            }
            let a = fitter.evaluate_key(&index.key_of(p).unwrap()).gradient;
            let e = rel(a, central(&margins, &dm));
            worst = worst.max(e);
            checked += 1;
            if e >= FD_REL_TOL {
                failures.push(format!("state {s}: {p} error {e:.2e}"));
            }
        }

        // full objective along in-model coordinates, penalty included
        let pen = cfg.penalty;
        for (p, b) in &coefs {
            let dm: Vec<f64> = column(&docs, p, &cfg.rescale)
                .iter()
                .zip(&y)
                .map(|(x, yi)| x * yi)
                .collect();
            if near_kink(&margins, &dm) || b.abs() < 10.0 * FD_STEP {
                skipped += 1;
                continue;
            }
            let g = fitter.evaluate_key(&index.key_of(p).unwrap()).gradient;
            let a = g + pen.l1() * b.signum() + 2.0 * pen.l2() * b;
            let penalty_fd = (pen.of(b + FD_STEP) - pen.of(b - FD_STEP)) / (2.0 * FD_STEP);
            let e = rel(a, central(&margins, &dm) + penalty_fd);
            worst = worst.max(e);
            checked += 1;
            if e >= FD_REL_TOL {
                failures.push(format!("state {s}: in-model {p} error {e:.2e}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{checked} derivatives, max relative error {worst:.2e}, {skipped} skipped near kinks")
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    Outcome::new(failures.is_empty(), detail)
}

// ---- 6 ----------------------------------------------------------------

const EXCLUDE_FACTOR: f64 = 1.001;
const INCLUDE_FACTOR: f64 = 0.9;

pub fn perfect_predictors(traces: &mut Traces) -> Outcome {
    let mut failures = Vec::new();
    let mut cases = 0;
    // (positives, negatives): mean prediction 0 and -0.8
    for (s, t) in [(4usize, 4usize), (4, 36)] {
        for r in [1usize, 2, 4] {
            for q in [4.0 / 3.0, 2.0, 4.0] {
                let mut texts = Vec::new();
                let mut labels = Vec::new();
                for i in 0..s {
                    texts.push(if i < r { "f p" } else { "f" });
                    labels.push(1);
                }
                for _ in 0..t {
                    texts.push("f");
                    labels.push(-1);
                }
                let corpus = Corpus::from_texts(texts).unwrap();
                let labeling = Labeling::new(&corpus, &labels).unwrap();
                let mut cfg = SearchConfig::default();
                cfg.rescale.q = NormOrder::Finite(q);
                cfg.max_pattern = 1;
                let mu = intercept_only_mean(&corpus, &labeling, &cfg).unwrap();
                let expected_mu = (s as f64 - t as f64) / (s + t) as f64;
                if (mu - expected_mu).abs() > 1e-9 {
                    failures.push(format!("s={s} t={t}: mean {mu} vs {expected_mu}"));
                }
                let cstar = perfect_predictor_threshold(r, mu, cfg.rescale.q).unwrap();
                for (factor, want) in [(EXCLUDE_FACTOR, false), (INCLUDE_FACTOR, true)] {
                    cfg.penalty.c = cstar * factor;
                    let model = fit(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
                    traces.record(format!("perfect r={r} q={q} x{factor}"), model.losses());
                    let has = model.features.iter().any(|f| f.phrase.to_string() == "p");
                    cases += 1;
                    if has != want {
                        failures.push(format!(
                            "r={r} q={q:.3} mu={mu:.2} C={:.4}: included={has}",
                            cfg.penalty.c
                        ));
                    }
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cases} fits: excluded at {EXCLUDE_FACTOR}x C*, included at {INCLUDE_FACTOR}x C*")
    } else {
        failures.join("; ")
    };
    Outcome::new(failures.is_empty(), detail)
}

// ---- 7 ----------------------------------------------------------------

const NULL_CORPORA: usize = 200;
const PLANTED_RUNS: usize = 100;
const PERMUTATIONS: usize = 99;
const LEVEL: f64 = 0.05;
const REJECTION_RANGE: (f64, f64) = (0.01, 0.12);
const PLANTED_MIN_HITS: usize = 95;

fn null_corpus<R: Rng>(rng: &mut R, planted: bool) -> (Corpus, Labeling) {
    let mut labels: Vec<i64> = (0..40).map(|i| if i < 20 { 1 } else { -1 }).collect();
    labels.shuffle(rng);
    let docs: Vec<Vec<String>> = labels
        .iter()
        .map(|&l| {
            let mut d: Vec<String> = (0..8).map(|_| format!("w{}", rng.gen_range(0..15))).collect();
            if planted && l == 1 {
                let at = rng.gen_range(0..=d.len());
                d.insert(at, "sig".into());
            }
            d
        })
        .collect();
    let corpus = Corpus::from_tokens(docs).unwrap();
    let labeling = Labeling::new(&corpus, &labels).unwrap();
    (corpus, labeling)
}

pub fn calibration(_: &mut Traces) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SearchConfig::default();
    let mut rejections = 0;
    for k in 0..NULL_CORPORA {
        let (corpus, labeling) = null_corpus(&mut rng, false);
        let report =
            find_threshold_c(&corpus, &labeling, &BanList::empty(), &cfg, PERMUTATIONS, k as u64)
                .unwrap();
        if report.p_value <= LEVEL {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / NULL_CORPORA as f64;
    let mut hits = 0;
    let floor = 1.0 / (PERMUTATIONS + 1) as f64;
    for k in 0..PLANTED_RUNS {
        let (corpus, labeling) = null_corpus(&mut rng, true);
        let report =
            find_threshold_c(&corpus, &labeling, &BanList::empty(), &cfg, PERMUTATIONS, k as u64)
                .unwrap();
        if report.p_value == floor {
            hits += 1;
        }
    }
    let ok = (REJECTION_RANGE.0..=REJECTION_RANGE.1).contains(&rate) && hits >= PLANTED_MIN_HITS;
    Outcome::new(
        ok,
        format!(
            "null rejection rate {rate:.3} at level {LEVEL} over {NULL_CORPORA} corpora \
             (R={PERMUTATIONS}); planted p = 1/{} in {hits}/{PLANTED_RUNS} runs",
            PERMUTATIONS + 1
        ),
    )
}

// ---- 8 ----------------------------------------------------------------

const MONOTONE_TOL: f64 = 1e-10;

pub fn monotone(traces: &mut Traces) -> Outcome {
    let mut steps = 0;
    let mut bad = Vec::new();
    for (name, losses) in &traces.runs {
        for (i, w) in losses.windows(2).enumerate() {
            steps += 1;
            if w[1] > w[0] + MONOTONE_TOL {
                bad.push(format!("{name} step {}: {} -> {}", i + 1, w[0], w[1]));
            }
        }
    }
    let fits = traces.runs.len();
    let ok = bad.is_empty() && fits > 0;
    let detail = if bad.is_empty() {
        format!("{fits} fits, {steps} iterations, no increase beyond {MONOTONE_TOL:e}")
    } else {
        format!("{} increases, first: {}", bad.len(), bad[0])
    };
    Outcome::new(ok, detail)
}

// ---- 9 ----------------------------------------------------------------

const DIRECTION_CORPORA: u64 = 5;
/// Penalty as a fraction of each run's null threshold.
const DIRECTION_C_FRACTION: f64 = 0.5;

/// 100 positive and 100 negative documents of noise words; "common" occurs
/// in 70% of positives and 30% of negatives, five rare tokens each occur in
/// 4 positives only.
fn signal_corpus(seed: u64) -> (Corpus, Labeling) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<Vec<String>> = (0..200)
        .map(|_| (0..10).map(|_| format!("n{}", rng.gen_range(0..30))).collect())
        .collect();
    let labels: Vec<i64> = (0..200).map(|i| if i < 100 { 1 } else { -1 }).collect();
    let insert = |d: &mut Vec<String>, w: &str, rng: &mut ChaCha8Rng| {
        let at = rng.gen_range(0..=d.len());
        d.insert(at, w.to_string());
    };
    for (i, d) in docs.iter_mut().enumerate() {
        let p = if i < 100 { 0.7 } else { 0.3 };
        if rng.gen_bool(p) {
            insert(d, "common", &mut rng);
        }
    }
    let positives: Vec<usize> = (0..100).collect();
    for k in 0..5 {
        for &d in positives.choose_multiple(&mut rng, 4) {
            insert(&mut docs[d], &format!("rare{k}"), &mut rng);
        }
    }
    let corpus = Corpus::from_tokens(docs).unwrap();
    let labeling = Labeling::new(&corpus, &labels).unwrap();
    (corpus, labeling)
}

pub fn q_direction(traces: &mut Traces) -> Outcome {
    let mut failures = Vec::new();
    let mut medians_seen = Vec::new();
    for seed in 0..DIRECTION_CORPORA {
        let (corpus, labeling) = signal_corpus(seed);
        let frequency = |p: &Phrase| {
            corpus
                .documents()
                .iter()
                .map(|d| count_in(&d.tokens, p))
                .sum::<usize>() as f64
        };
        let mut medians = Vec::new();
        for q in [1.2, 2.0, 4.0] {
            let mut cfg = SearchConfig::default();
            cfg.rescale.q = NormOrder::Finite(q);
            cfg.penalty.c =
                DIRECTION_C_FRACTION * null_threshold_c(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
            let model = fit(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
            traces.record(format!("direction seed {seed} q={q}"), model.losses());
            let mut freqs: Vec<f64> = model.features.iter().map(|f| frequency(&f.phrase)).collect();
            medians.push(if freqs.is_empty() { f64::NAN } else { median(&mut freqs) });
        }
        if !(medians[0] <= medians[1] && medians[1] <= medians[2]) {
            failures.push(format!("seed {seed}: medians {medians:?}"));
        }
        medians_seen.push(medians);

        let mut cfg = SearchConfig::default();
        cfg.rescale.no_rescaling = true;
        cfg.penalty.c =
            DIRECTION_C_FRACTION * null_threshold_c(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
        let model = fit(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
        traces.record(format!("direction seed {seed} no rescaling"), model.losses());
        let first = model.trace.iter().find_map(|t| t.phrase.clone());
        if first.as_ref().map(|p| p.to_string()).as_deref() != Some("common") {
            failures.push(format!("seed {seed}: no rescaling picked {first:?} first"));
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "median selected-phrase frequency non-decreasing over q in {{1.2,2,4}} on \
             {DIRECTION_CORPORA} corpora (e.g. {:?}); no rescaling picks \"common\" first",
            medians_seen[0]
        )
    } else {
        failures.join("; ")
    };
    Outcome::new(failures.is_empty(), detail)
}

// ---- 10 ---------------------------------------------------------------

const PERF_DOCS: usize = 10_000;
const PERF_VOCAB: usize = 5_000;
const PERF_FIT_SECONDS: f64 = 120.0;
/// `C` is the largest of this many permutation thresholds.
const PERF_PERMUTATIONS: usize = 10;

pub fn performance(traces: &mut Traces) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let zipf = WeightedIndex::new((1..=PERF_VOCAB).map(|k| 1.0 / k as f64)).unwrap();
    let mut tokens = 0;
    let mut labels = Vec::with_capacity(PERF_DOCS);
    let docs: Vec<Vec<String>> = (0..PERF_DOCS)
        .map(|_| {
            let positive = rng.gen_bool(0.25);
            labels.push(if positive { 1 } else { -1 });
            let len = rng.gen_range(70..=90);
            let mut d: Vec<String> = (0..len).map(|_| format!("w{}", zipf.sample(&mut rng))).collect();
            if rng.gen_bool(if positive { 0.6 } else { 0.05 }) {
                let at = rng.gen_range(0..=d.len());
                d.splice(at..at, ["planted".to_string(), "signal".to_string()]);
            }
            tokens += d.len();
            d
        })
        .collect();
    let corpus = Corpus::from_tokens(docs).unwrap();
    let labeling = Labeling::new(&corpus, &labels).unwrap();
    let mut cfg = SearchConfig::default();
    let start = Instant::now();
    let report =
        find_threshold_c(&corpus, &labeling, &BanList::empty(), &cfg, PERF_PERMUTATIONS, 10).unwrap();
    cfg.penalty.c = report.c_perm[PERF_PERMUTATIONS - 1];
    let model = fit(&corpus, &labeling, &BanList::empty(), &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    traces.record("performance", model.losses());
    let top = model
        .features
        .iter()
        .max_by(|a, b| a.beta.abs().total_cmp(&b.beta.abs()))
        .map(|f| f.phrase.to_string())
        .unwrap_or_default();
    Outcome::new(
        model.converged && secs < PERF_FIT_SECONDS,
        format!(
            "{PERF_DOCS} docs, {tokens} tokens, C={:.2} (max of {PERF_PERMUTATIONS} permutations, \
             observed {:.2}): {} iterations, {} phrases (top \"{top}\"), converged={}, \
             threshold search + fit {secs:.1} s on {} threads",
            cfg.penalty.c,
            report.c_obs,
            model.trace.len() - 1,
            model.features.len(),
            model.converged,
            rayon::current_num_threads()
        ),
    )
}

// ---- 11 ---------------------------------------------------------------

pub fn golden(_: &mut Traces) -> Outcome {
    let data = include_str!("../data/clean_golden.jsonl");
    let mut n = 0;
    let mut bad = Vec::new();
    for line in data.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let raw = v["raw"].as_str().unwrap();
        let expected = v["clean"].as_str().unwrap();
        let got = phrasereg::corpus::clean_text(raw);
        if got != expected {
            bad.push(format!("{raw:?} -> {got:?}, expected {expected:?}"));
        }
        n += 1;
    }
    Outcome::new(
        bad.is_empty() && n == 25,
        if bad.is_empty() {
            format!("{n}/25 strings byte-exact")
        } else {
            bad.join("; ")
        },
    )
}
