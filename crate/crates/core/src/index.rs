//! Positional index over the label-included documents and on-demand phrase
//! expansion.

use std::collections::HashMap;

use crate::corpus::{BanList, Corpus, Labeling};
use crate::phrase::{Element, Phrase};

pub type TokenId = u32;

/// Token id reserved for the gap element. Real tokens are numbered from 1
/// in lexicographic order, so comparing keys matches canonical phrase order.
pub const GAP_ID: TokenId = 0;

/// Phrase in index-local token ids.
pub type PhraseKey = Vec<TokenId>;

/// Canonical order on keys: length, then element-wise.
pub fn key_cmp(a: &[TokenId], b: &[TokenId]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Sparse occurrences of one phrase: match end positions grouped by
/// document row, sorted by (row, end).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OccurrenceList {
    rows: Vec<u32>,
    ends: Vec<u32>,
}

impl OccurrenceList {
    /// Builds a list from sorted `(row, end)` pairs.
    pub fn from_sorted(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let (rows, ends): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        debug_assert!(rows
            .iter()
            .zip(&ends)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[0] < w[1]));
        OccurrenceList { rows, ends }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total number of matches.
    pub fn total_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of documents with at least one match.
    pub fn document_count(&self) -> usize {
        self.entries().count()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.rows.iter().copied().zip(self.ends.iter().copied())
    }

    /// `(row, end positions)` per matching document.
    pub fn entries(&self) -> Entries<'_> {
        Entries { list: self, at: 0 }
    }

    /// `(row, count)` per matching document.
    pub fn doc_counts(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries().map(|(r, e)| (r, e.len() as u32))
    }
}

pub struct Entries<'a> {
    list: &'a OccurrenceList,
    at: usize,
}

impl<'a> Iterator for Entries<'a> {
    type Item = (u32, &'a [u32]);

    fn next(&mut self) -> Option<Self::Item> {
        let rows = &self.list.rows;
        if self.at >= rows.len() {
            return None;
        }
        let start = self.at;
        let row = rows[start];
        let mut end = start + 1;
        while end < rows.len() && rows[end] == row {
            end += 1;
        }
        self.at = end;
        Some((row, &self.list.ends[start..end]))
    }
}

/// Sparse numeric column over document rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub rows: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.rows.iter().copied().zip(self.values.iter().copied())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (r, x) in self.iter() {
            v[r as usize] = x;
        }
        v
    }
}

/// Per-document counts of an occurrence list; binary mode maps every
/// positive count to 1.
pub fn count_vector(occ: &OccurrenceList, binary: bool) -> SparseVector {
    let mut out = SparseVector::default();
    for (row, count) in occ.doc_counts() {
        out.rows.push(row);
        out.values.push(if binary { 1.0 } else { count as f64 });
    }
    out
}

/// Positional index over the label-included documents.
///
/// Banned unigrams get no postings, so they never start or extend a phrase,
/// but a gap may still match them.
#[derive(Debug, Clone)]
pub struct PostingIndex {
    tokens: Vec<String>,
    lookup: HashMap<String, TokenId>,
    banned: Vec<bool>,
    streams: Vec<Vec<TokenId>>,
    doc_ids: Vec<usize>,
    labels: Vec<f64>,
    postings: Vec<Vec<(u32, u32)>>,
}

impl PostingIndex {
    /// Indexes the documents with a non-zero label.
    pub fn build(corpus: &Corpus, labels: &Labeling, ban: &BanList) -> Self {
        let docs: Vec<(usize, f64)> = labels
            .included()
            .map(|d| (d, f64::from(labels.value(d))))
            .collect();
        Self::from_rows(corpus, docs, ban)
    }

    /// Indexes every document with label 0, for matching phrases on corpora
    /// without a labeling.
    pub fn build_unlabeled(corpus: &Corpus, ban: &BanList) -> Self {
        Self::from_rows(corpus, (0..corpus.len()).map(|d| (d, 0.0)).collect(), ban)
    }

    fn from_rows(corpus: &Corpus, docs: Vec<(usize, f64)>, ban: &BanList) -> Self {
        // vocabulary of the included documents, sorted
        let mut vocab: Vec<&str> = Vec::new();
        {
            let mut seen = std::collections::HashSet::new();
            for &(d, _) in &docs {
                for t in &corpus.document(d).tokens {
                    if seen.insert(t.as_str()) {
                        vocab.push(t);
                    }
                }
            }
        }
        vocab.sort_unstable();
        let mut tokens = Vec::with_capacity(vocab.len() + 1);
        tokens.push(crate::phrase::GAP_SYMBOL.to_owned());
        tokens.extend(vocab.iter().map(|s| s.to_string()));
        let lookup: HashMap<String, TokenId> = tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        let banned: Vec<bool> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| i == 0 || ban.contains(t))
            .collect();
        let mut postings = vec![Vec::new(); tokens.len()];
        let mut streams = Vec::with_capacity(docs.len());
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut labels = Vec::with_capacity(docs.len());
        for (row, (d, y)) in docs.into_iter().enumerate() {
            let stream: Vec<TokenId> = corpus
                .document(d)
                .tokens
                .iter()
                .map(|t| lookup[t.as_str()])
                .collect();
            for (pos, &id) in stream.iter().enumerate() {
                if !banned[id as usize] {
                    postings[id as usize].push((row as u32, pos as u32));
                }
            }
            streams.push(stream);
            doc_ids.push(d);
            labels.push(y);
        }
        PostingIndex {
            tokens,
            lookup,
            banned,
            streams,
            doc_ids,
            labels,
            postings,
        }
    }

    /// Number of indexed documents (rows).
    pub fn n_rows(&self) -> usize {
        self.streams.len()
    }

    /// Corpus document id of a row.
    pub fn doc_id(&self, row: u32) -> usize {
        self.doc_ids[row as usize]
    }

    pub fn doc_ids(&self) -> &[usize] {
        &self.doc_ids
    }

    /// Label (+1 or -1, 0 for an unlabeled index) per row.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn stream(&self, row: u32) -> &[TokenId] {
        &self.streams[row as usize]
    }

    /// Number of token ids, including the gap id.
    pub fn id_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.lookup.get(token).copied()
    }

    pub fn is_banned(&self, id: TokenId) -> bool {
        self.banned[id as usize]
    }

    /// `(row, position)` postings of a token; empty for banned tokens.
    pub fn postings(&self, id: TokenId) -> &[(u32, u32)] {
        &self.postings[id as usize]
    }

    /// Total occurrences of a unigram among indexed documents.
    pub fn support(&self, id: TokenId) -> usize {
        self.postings[id as usize].len()
    }

    /// Ids of tokens that have postings (not banned), in canonical order.
    pub fn unigram_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (1..self.tokens.len() as TokenId).filter(move |&id| !self.banned[id as usize])
    }

    /// Index key of a phrase; `None` when a word is not in the index.
    pub fn key_of(&self, phrase: &Phrase) -> Option<PhraseKey> {
        phrase
            .elements()
            .iter()
            .map(|e| match e {
                Element::Gap => Some(GAP_ID),
                Element::Word(w) => self.token_id(w),
            })
            .collect()
    }

    pub fn phrase_of(&self, key: &[TokenId]) -> Phrase {
        let elements = key
            .iter()
            .map(|&id| {
                if id == GAP_ID {
                    Element::Gap
                } else {
                    Element::Word(self.tokens[id as usize].clone())
                }
            })
            .collect();
        Phrase::new(elements).expect("index keys start and end with a token")
    }

    /// Occurrences of a key computed directly from the token streams.
    pub fn occurrences_of_key(&self, key: &[TokenId]) -> OccurrenceList {
        let Some((&first, rest)) = key.split_first() else {
            return OccurrenceList::default();
        };
        if first == GAP_ID || key.iter().any(|&id| id != GAP_ID && self.is_banned(id)) {
            return OccurrenceList::default();
        }
        let span = key.len() as u32;
        let pairs = self.postings(first).iter().filter_map(|&(row, pos)| {
            let stream = self.stream(row);
            if (pos + span) as usize > stream.len() {
                return None;
            }
            let matched = rest
                .iter()
                .enumerate()
                .all(|(k, &id)| id == GAP_ID || stream[pos as usize + 1 + k] == id);
            matched.then_some((row, pos + span - 1))
        });
        OccurrenceList::from_sorted(pairs.collect::<Vec<_>>())
    }

    /// Occurrences of a phrase among indexed documents; empty when the
    /// phrase is absent or uses a banned word.
    pub fn occurrences(&self, phrase: &Phrase) -> OccurrenceList {
        match self.key_of(phrase) {
            Some(key) => self.occurrences_of_key(&key),
            None => OccurrenceList::default(),
        }
    }

    /// Children of a phrase: the phrase extended by a run of `0..=gap` gap
    /// elements and then one concrete, non-banned next token. Children
    /// longer than `max_pattern` or with fewer than `min_support` total
    /// occurrences are dropped. Returned in canonical order with their
    /// occurrences, derived from the parent's end positions.
    pub fn children(
        &self,
        key: &[TokenId],
        occ: &OccurrenceList,
        gap: usize,
        min_support: usize,
        max_pattern: usize,
    ) -> Vec<(PhraseKey, OccurrenceList)> {
        if key.len() >= max_pattern {
            return Vec::new();
        }
        let max_gap = gap.min(max_pattern - key.len() - 1);
        let mut hits: Vec<(u32, TokenId, u32, u32)> = Vec::new();
        for (row, end) in occ.pairs() {
            let stream = self.stream(row);
            for g in 0..=max_gap as u32 {
                let p = end + 1 + g;
                if p as usize >= stream.len() {
                    break;
                }
                let tok = stream[p as usize];
                if !self.banned[tok as usize] {
                    hits.push((g, tok, row, p));
                }
            }
        }
        hits.sort_unstable();
        let mut out = Vec::new();
        let mut i = 0;
        while i < hits.len() {
            let (g, tok, _, _) = hits[i];
            let mut j = i + 1;
            while j < hits.len() && hits[j].0 == g && hits[j].1 == tok {
                j += 1;
            }
            if j - i >= min_support {
                let mut child = Vec::with_capacity(key.len() + g as usize + 1);
                child.extend_from_slice(key);
                child.extend(std::iter::repeat(GAP_ID).take(g as usize));
                child.push(tok);
                let list = OccurrenceList::from_sorted(hits[i..j].iter().map(|h| (h.2, h.3)));
                out.push((child, list));
            }
            i = j;
        }
        out.sort_by(|a, b| key_cmp(&a.0, &b.0));
        out
    }

    /// Phrase-level wrapper around [`PostingIndex::children`].
    pub fn children_of(
        &self,
        phrase: &Phrase,
        gap: usize,
        min_support: usize,
        max_pattern: usize,
    ) -> Vec<Phrase> {
        let Some(key) = self.key_of(phrase) else {
            return Vec::new();
        };
        let occ = self.occurrences_of_key(&key);
        self.children(&key, &occ, gap, min_support, max_pattern)
            .into_iter()
            .map(|(k, _)| self.phrase_of(&k))
            .collect()
    }
}
