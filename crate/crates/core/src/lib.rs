//! Layout-aware metadata extraction for scholarly first pages.
//!
//! Character streams are grouped into lines and boxes, boxes are labeled
//! against a reference metadata record with a mixed Levenshtein/BLEU
//! similarity, and labeled pages are serialized into training corpora.

use std::io;
use std::path::PathBuf;

pub mod charstream;
pub mod classifier;
pub mod corpus;
pub mod doi;
pub mod label;
pub mod layout;
pub mod matcher;
pub mod par;
pub mod pipeline;
pub mod script;
pub mod synth;

pub use charstream::{validate_charstream, CharGlyph, CharstreamError, MetadataRecord, Page};
pub use classifier::{evaluate, predict, train, ClassifierError, EvalReport, FeatureSpec, Model};
pub use corpus::{
    build_vocab, emit_model_config, serialize_page, tokenize, CorpusError, FinetuneRow, ModelConfig, Vocab,
};
pub use doi::{fetch_metadata, DoiClient, DoiClientConfig, DoiError, DoiMode};
pub use label::Label;
pub use layout::{
    analyze_page, build_lines, merge_lines, order_boxes, LayoutParamError, LayoutParams, TextBox, TextLine,
};
pub use matcher::{
    bleu, label_page, levenshtein_ratio, mixed_similarity, normalize_text, LabeledPage, MatchError, MatcherParams,
};
pub use pipeline::{process_document, run_pipeline, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Charstream(#[from] CharstreamError),
    #[error(transparent)]
    Layout(#[from] LayoutParamError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Doi(#[from] DoiError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the remote metadata service rather than the input.
    pub fn is_upstream(&self) -> bool {
        matches!(self, Error::Doi(DoiError::Upstream { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
