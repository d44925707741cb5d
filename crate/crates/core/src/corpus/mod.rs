//! Corpus ingestion: cleaning, tokenization, stemming, labelings and ban
//! lists.

mod clean;
mod porter;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean_text, tokenize, DIGIT_MARKER};
pub use porter::porter_stem;

/// Marker appended to every stemmed token.
pub const STEM_MARKER: char = '+';

/// Stems a cleaned token and appends the stem marker.
pub fn stem_token(token: &str) -> String {
    let mut s = porter_stem(token);
    s.push(STEM_MARKER);
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<String>,
}

/// An immutable tokenized corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: BTreeMap<String, usize>,
    stemmed: bool,
    // cleaned tokens before stemming, kept for fragment display
    unstemmed: Option<Vec<Document>>,
}

fn build_vocabulary(documents: &[Document]) -> BTreeMap<String, usize> {
    let mut vocab = BTreeMap::new();
    for doc in documents {
        for tok in &doc.tokens {
            *vocab.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    vocab
}

impl Corpus {
    /// Builds a corpus from raw document strings, cleaning and tokenizing
    /// each one.
    pub fn from_texts<I, S>(texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens = texts
            .into_iter()
            .map(|t| tokenize(&clean_text(t.as_ref())))
            .collect();
        Self::from_tokens(tokens)
    }

    /// Builds a corpus from already tokenized documents. Tokens are taken
    /// verbatim.
    pub fn from_tokens(tokens: Vec<Vec<String>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let documents: Vec<Document> = tokens
            .into_iter()
            .enumerate()
            .map(|(id, tokens)| Document {
                id,
                tokens: tokens.into_iter().filter(|t| !t.is_empty()).collect(),
            })
            .collect();
        let vocabulary = build_vocabulary(&documents);
        Ok(Corpus {
            documents,
            vocabulary,
            stemmed: false,
            unstemmed: None,
        })
    }

    /// Replaces every token by its Porter stem with `+` appended.
    pub fn stem(self) -> Result<Self> {
        if self.stemmed {
            return Err(Error::AlreadyStemmed);
        }
        let mut cache: BTreeMap<&str, String> = BTreeMap::new();
        for tok in self.vocabulary.keys() {
            cache.insert(tok, stem_token(tok));
        }
        let documents: Vec<Document> = self
            .documents
            .iter()
            .map(|d| Document {
                id: d.id,
                tokens: d.tokens.iter().map(|t| cache[t.as_str()].clone()).collect(),
            })
            .collect();
        let vocabulary = build_vocabulary(&documents);
        Ok(Corpus {
            documents,
            vocabulary,
            stemmed: true,
            unstemmed: Some(self.documents),
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: usize) -> &Document {
        &self.documents[id]
    }

    /// Distinct tokens with their total counts.
    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn is_stemmed(&self) -> bool {
        self.stemmed
    }

    /// Cleaned tokens of a document before stemming (the tokens themselves
    /// for an unstemmed corpus).
    pub fn display_tokens(&self, id: usize) -> &[String] {
        match &self.unstemmed {
            Some(docs) => &docs[id].tokens,
            None => &self.documents[id].tokens,
        }
    }

    /// Content hash identifying the corpus a model was fit on.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.stemmed.hash(&mut h);
        self.documents.len().hash(&mut h);
        for d in &self.documents {
            d.tokens.hash(&mut h);
        }
        h.finish()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    if bytes.is_empty() {
        return Ok(lines);
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    for (i, raw) in body.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| Error::InvalidUtf8 {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        lines.push(line.to_owned());
    }
    Ok(lines)
}

/// Raw lines of a line-based corpus file, one document per line.
pub fn read_raw_documents(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_lines(path.as_ref())
}

/// Loads a corpus with one document per line.
pub fn load_corpus(path: impl AsRef<Path>, stem: bool) -> Result<Corpus> {
    let lines = read_lines(path.as_ref())?;
    let corpus = Corpus::from_texts(&lines)?;
    if stem {
        corpus.stem()
    } else {
        Ok(corpus)
    }
}

/// Raw texts of a directory holding one file per document, in file-name
/// order; a file's lines are joined by spaces.
pub fn read_raw_dir(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut files: Vec<_> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files.iter().map(|f| Ok(read_lines(f)?.join(" "))).collect()
}

/// Loads a corpus from a directory holding one file per document, taken in
/// file-name order.
pub fn load_corpus_dir(path: impl AsRef<Path>, stem: bool) -> Result<Corpus> {
    let corpus = Corpus::from_texts(read_raw_dir(path)?)?;
    if stem {
        corpus.stem()
    } else {
        Ok(corpus)
    }
}

/// Raw document texts of a corpus file (one per line) or directory (one
/// per file).
pub fn read_raw_corpus(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    if path.is_dir() {
        read_raw_dir(path)
    } else {
        read_raw_documents(path)
    }
}

/// Loads a corpus file or directory.
pub fn load_corpus_path(path: impl AsRef<Path>, stem: bool) -> Result<Corpus> {
    let path = path.as_ref();
    if path.is_dir() {
        load_corpus_dir(path, stem)
    } else {
        load_corpus(path, stem)
    }
}

/// Per-document labels in {+1, 0, -1}; 0 drops the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    values: Vec<i8>,
    positives: usize,
    negatives: usize,
}

impl Labeling {
    /// Validates raw labels against a corpus.
    pub fn new(corpus: &Corpus, raw: &[i64]) -> Result<Self> {
        Self::with_len(corpus.len(), raw)
    }

    pub fn with_len(n: usize, raw: &[i64]) -> Result<Self> {
        if raw.len() != n {
            return Err(Error::LabelLengthMismatch {
                expected: n,
                found: raw.len(),
            });
        }
        let mut values = Vec::with_capacity(n);
        for (index, &value) in raw.iter().enumerate() {
            match value {
                -1 | 0 | 1 => values.push(value as i8),
                _ => return Err(Error::InvalidLabel { index, value }),
            }
        }
        Self::from_values(values)
    }

    fn from_values(values: Vec<i8>) -> Result<Self> {
        let positives = values.iter().filter(|&&v| v == 1).count();
        let negatives = values.iter().filter(|&&v| v == -1).count();
        if positives == 0 || negatives == 0 {
            return Err(Error::DegenerateLabeling {
                positives,
                negatives,
            });
        }
        Ok(Labeling {
            values,
            positives,
            negatives,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, doc: usize) -> i8 {
        self.values[doc]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn is_included(&self, doc: usize) -> bool {
        self.values[doc] != 0
    }

    /// Ids of documents with a non-zero label, in order.
    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
    }

    pub fn positive_count(&self) -> usize {
        self.positives
    }

    pub fn negative_count(&self) -> usize {
        self.negatives
    }

    pub fn included_count(&self) -> usize {
        self.positives + self.negatives
    }

    /// Uniformly permutes the non-zero labels, holding zeros in place.
    pub fn permuted<R: Rng + ?Sized>(&self, rng: &mut R) -> Labeling {
        let slots: Vec<usize> = self.included().collect();
        let mut labels: Vec<i8> = slots.iter().map(|&i| self.values[i]).collect();
        labels.shuffle(rng);
        let mut values = self.values.clone();
        for (slot, label) in slots.into_iter().zip(labels) {
            values[slot] = label;
        }
        Labeling {
            values,
            positives: self.positives,
            negatives: self.negatives,
        }
    }

    /// Copy of this labeling with the given documents dropped (set to 0).
    pub fn excluding(&self, docs: &[usize]) -> Result<Labeling> {
        let mut values = self.values.clone();
        for &d in docs {
            values[d] = 0;
        }
        Self::from_values(values)
    }
}

/// Parses a labeling file: one integer per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| {
            line.trim().parse::<i64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected an integer label, found '{}'", line.trim()),
            })
        })
        .collect()
}

/// Unigrams that may not appear in any fitted phrase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BanList {
    words: BTreeSet<String>,
}

impl BanList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Cleans each entry (an entry may yield several tokens) and, for a
    /// stemmed corpus, stems it. Entries may be given before or after
    /// stemming.
    pub fn new<I, S>(words: I, stemmed: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for w in words {
            for tok in tokenize(&clean_text(w.as_ref())) {
                if stemmed {
                    set.insert(stem_token(&tok));
                } else {
                    set.insert(tok);
                }
            }
        }
        BanList { words: set }
    }

    pub fn for_corpus<I, S>(words: I, corpus: &Corpus) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(words, corpus.is_stemmed())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn words(&self) -> &BTreeSet<String> {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Reads a ban list file, one entry per line.
pub fn load_ban_list(path: impl AsRef<Path>, stemmed: bool) -> Result<BanList> {
    let lines = read_lines(path.as_ref())?;
    Ok(BanList::new(lines.iter().filter(|l| !l.trim().is_empty()), stemmed))
}
