//! Subcommand bodies. Each returns the full stdout text so nothing is
//! printed when a later step fails.

use std::fs;
use std::path::Path;

use phrasereg::corpus::{
    clean_text, load_ban_list, load_corpus_path, load_labels, read_raw_corpus, stem_token,
    tokenize, STEM_MARKER,
};
use phrasereg::reporting::{self, OutputFormat};
use phrasereg::tuning;
use phrasereg::{BanList, Corpus, Element, Error, Labeling, ModelState, Phrase};
use regex::Regex;

use crate::{
    CvArgs, Failure, FragmentsArgs, InputArgs, PredictArgs, ProfileArgs, SummarizeArgs,
    ThresholdArgs,
};

struct Input {
    corpus: Corpus,
    labeling: Option<Labeling>,
    ban: BanList,
}

impl Input {
    fn load(args: &InputArgs) -> Result<Self, Failure> {
        let regex = args
            .positive_regex
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| Failure::Usage(format!("--positive-regex: {e}")))?;
        let corpus = load_corpus_path(&args.corpus, args.stem)?;
        let labeling = match (&args.labels, regex) {
            (Some(path), _) => Some(Labeling::new(&corpus, &load_labels(path)?)?),
            (None, Some(re)) => {
                let raw: Vec<i64> = read_raw_corpus(&args.corpus)?
                    .iter()
                    .map(|line| if re.is_match(line) { 1 } else { -1 })
                    .collect();
                Some(Labeling::new(&corpus, &raw)?)
            }
            (None, None) => None,
        };
        let ban = match &args.ban {
            Some(path) => load_ban_list(path, corpus.is_stemmed())?,
            None => BanList::empty(),
        };
        Ok(Input {
            corpus,
            labeling,
            ban,
        })
    }

    fn labeling(&self) -> Result<&Labeling, Failure> {
        self.labeling
            .as_ref()
            .ok_or_else(|| Failure::Usage("one of --labels or --positive-regex is required".into()))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Failure {
    Failure::Data(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Parses a phrase typed by a user: each word is cleaned and, on a stemmed
/// corpus, stemmed; `*` is a one-token gap and a word ending in the stem
/// marker is taken verbatim.
fn user_phrase(text: &str, stemmed: bool) -> phrasereg::Result<Phrase> {
    let mut elements = Vec::new();
    for word in text.split_whitespace() {
        if word == "*" {
            elements.push(Element::Gap);
        } else if word.ends_with(STEM_MARKER) {
            elements.push(Element::Word(word.to_owned()));
        } else {
            for tok in tokenize(&clean_text(word)) {
                let tok = if stemmed { stem_token(&tok) } else { tok };
                elements.push(Element::Word(tok));
            }
        }
    }
    Phrase::new(elements).map_err(|_| Error::InvalidPhrase(text.to_owned()))
}

/// Reads a phrase list: JSON objects with a `phrase` key (as written by
/// `summarize --format json-lines`) are taken verbatim, other non-blank
/// lines are parsed as user phrases.
fn read_phrases(path: &Path, stemmed: bool) -> Result<Vec<Phrase>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let parse_error = |line: usize, message: String| {
        Failure::Data(Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    };
    let mut phrases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let phrase = if line.starts_with('{') {
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| parse_error(i + 1, e.to_string()))?;
            let s = value["phrase"]
                .as_str()
                .ok_or_else(|| parse_error(i + 1, "missing string field \"phrase\"".into()))?;
            s.parse::<Phrase>()
        } else {
            user_phrase(line, stemmed)
        };
        phrases.push(phrase.map_err(|e| parse_error(i + 1, e.to_string()))?);
    }
    Ok(phrases)
}

pub fn summarize(args: &SummarizeArgs) -> Result<String, Failure> {
    let config = args.fit.config()?;
    let input = Input::load(&args.input)?;
    let labeling = input.labeling()?;
    let model = phrasereg::fit(&input.corpus, labeling, &input.ban, &config)?;
    if !model.converged {
        log::warn!("did not converge within {} iterations", config.max_iter);
    }
    if model.is_intercept_only() {
        log::info!("summary is empty at C={}", config.penalty.c);
    }
    let rows = reporting::summary_table(&model, &input.corpus, labeling);
    let out = reporting::render_summary(&rows, args.output.format);
    if let Some(path) = &args.design_matrix {
        let m = reporting::design_matrix(&model, &input.corpus)?;
        write_file(path, &reporting::render_design_matrix(&m, OutputFormat::Tsv))?;
    }
    if let Some(path) = &args.save_model {
        let json = serde_json::to_string_pretty(&model).expect("model serializes");
        write_file(path, &(json + "\n"))?;
    }
    Ok(out)
}

pub fn threshold(args: &ThresholdArgs) -> Result<String, Failure> {
    let config = args.fit.config()?;
    let input = Input::load(&args.input)?;
    let report = tuning::find_threshold_c(
        &input.corpus,
        input.labeling()?,
        &input.ban,
        &config,
        args.permutations,
        args.seed,
    )?;
    Ok(reporting::render_threshold(&report, args.output.format))
}

pub fn fragments(args: &FragmentsArgs) -> Result<String, Failure> {
    let input = Input::load(&args.input)?;
    let phrase = user_phrase(&args.phrase, input.corpus.is_stemmed())?;
    let found = reporting::sample_fragments(
        &phrase,
        &input.corpus,
        input.labeling.as_ref(),
        args.count,
        args.window,
        args.seed,
    );
    if found.is_empty() {
        log::info!("no match for '{phrase}'");
    }
    Ok(reporting::render_fragments(&found, args.output.format))
}

pub fn predict(args: &PredictArgs) -> Result<String, Failure> {
    let text = fs::read_to_string(&args.model).map_err(|e| io_error(&args.model, e))?;
    let model: ModelState = serde_json::from_str(&text).map_err(|e| {
        Failure::Data(Error::Parse {
            path: args.model.clone(),
            line: e.line(),
            message: e.to_string(),
        })
    })?;
    let input = Input::load(&args.input)?;
    let scores = reporting::predict(&model, &input.corpus)?;
    if model.corpus_fingerprint != input.corpus.fingerprint() {
        log::info!("scoring a corpus other than the training corpus");
    }
    let format = args.output.format;
    let mut out = reporting::render_predictions(&scores.scores, format);
    if let Some(labeling) = &input.labeling {
        let metrics = reporting::evaluate(&scores.scores, labeling.values())?;
        if format != OutputFormat::JsonLines {
            out.push('\n');
        }
        out.push_str(&reporting::render_metrics(&metrics, format));
    }
    Ok(out)
}

pub fn profile(args: &ProfileArgs) -> Result<String, Failure> {
    let input = Input::load(&args.input)?;
    let labeling = input.labeling()?;
    let phrases = read_phrases(&args.phrases, input.corpus.is_stemmed())?;
    let rows = reporting::phrase_count_table(&phrases, &input.corpus, labeling);
    Ok(reporting::render_summary(&rows, args.output.format))
}

pub fn cv(args: &CvArgs) -> Result<String, Failure> {
    let config = args.fit.config()?;
    let input = Input::load(&args.input)?;
    let report = tuning::cross_validate_c(
        &input.corpus,
        input.labeling()?,
        &input.ban,
        &config,
        args.folds,
        &args.c_grid,
        args.seed,
    )?;
    log::info!("best C={}", report.best_c);
    Ok(reporting::render_cv(&report, args.output.format))
}
