//! Sparse phrase regression for comparative text summarization.
//!
//! A labeled subset of documents (`+1`) is contrasted against a baseline
//! (`-1`) by fitting an L1-penalized squared-hinge regression over the space
//! of all phrases in the corpus. Phrases of any length, optionally containing
//! wildcard gaps, are generated on demand during greedy coordinate descent;
//! a gradient bound prunes whole families of superphrases that cannot improve
//! on the best candidate found so far. The selected phrases are the summary.
//!
//! The crate is organised along the pipeline:
//!
//! * [`corpus`]: cleaning, tokenization, stemming, labelings and ban lists.
//! * [`phrase`] and [`index`]: phrases with gaps, the positional index and
//!   on-demand child enumeration.
//! * [`objective`]: losses, `L^q` norms and (sub)gradients.
//! * [`search`]: the fitting engine.
//! * [`tuning`]: choosing the penalty `C`.
//! * [`reporting`]: summary tables, fragments, predictions and metrics.

pub mod corpus;
pub mod error;
pub mod index;
pub mod objective;
pub mod phrase;
pub mod reporting;
pub mod search;
pub mod tuning;

pub use corpus::{BanList, Corpus, Document, Labeling};
pub use error::{Error, Result};
pub use index::{OccurrenceList, PostingIndex};
pub use objective::{LossKind, NormOrder, PenaltyConfig, RescaleConfig};
pub use phrase::{Element, Phrase};
pub use search::{fit, ModelState, SearchConfig};
