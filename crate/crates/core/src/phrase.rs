//! Phrases: token sequences with optional single-token wildcards.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Display form of a gap.
pub const GAP_SYMBOL: &str = "*";

/// One position of a phrase. `Gap` matches exactly one arbitrary token and
/// sorts before every word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Gap,
    Word(String),
}

impl Element {
    pub fn is_gap(&self) -> bool {
        matches!(self, Element::Gap)
    }

    pub fn word(&self) -> Option<&str> {
        match self {
            Element::Gap => None,
            Element::Word(w) => Some(w),
        }
    }
}

/// A phrase. Never starts or ends with a gap.
///
/// Phrases are ordered canonically: shorter first, then element-wise with
/// gaps before words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Phrase {
    elements: Vec<Element>,
}

impl Phrase {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        let valid = matches!(elements.first(), Some(Element::Word(_)))
            && matches!(elements.last(), Some(Element::Word(_)));
        if !valid {
            let shown: Vec<&str> = elements
                .iter()
                .map(|e| e.word().unwrap_or(GAP_SYMBOL))
                .collect();
            return Err(Error::InvalidPhrase(shown.join(" ")));
        }
        Ok(Phrase { elements })
    }

    /// A gap-free phrase from words.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(words.into_iter().map(|w| Element::Word(w.into())).collect())
    }

    pub fn unigram(word: impl Into<String>) -> Self {
        Phrase {
            elements: vec![Element::Word(word.into())],
        }
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Element count, gaps included.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn has_gap(&self) -> bool {
        self.elements.iter().any(Element::is_gap)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(Element::word)
    }
}

impl Ord for Phrase {
    fn cmp(&self, other: &Self) -> Ordering {
        self.elements
            .len()
            .cmp(&other.elements.len())
            .then_with(|| self.elements.cmp(&other.elements))
    }
}

impl PartialOrd for Phrase {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(e.word().unwrap_or(GAP_SYMBOL))?;
        }
        Ok(())
    }
}

impl FromStr for Phrase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let elements = s
            .split_whitespace()
            .map(|t| {
                if t == GAP_SYMBOL {
                    Element::Gap
                } else {
                    Element::Word(t.to_owned())
                }
            })
            .collect();
        Phrase::new(elements).map_err(|_| Error::InvalidPhrase(s.to_owned()))
    }
}

impl Serialize for Phrase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phrase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
