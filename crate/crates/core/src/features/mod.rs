//! Text vectorizers, the summarizer's sequence vocabulary, and clickstream
//! feature engineering.

mod clicks;
mod sparse;
mod vectorizer;
mod vocab;

pub use clicks::{
    sessionize, window_features, ClickFeatureVector, ClickFeaturizer, WindowStats, DEFAULT_SESSION_GAP_S, WINDOWS,
};
pub use sparse::SparseMatrix;
pub use vectorizer::{fit_vectorizer, VectorizerConfig, VectorizerMode, VectorizerModel};
pub use vocab::{build_seq_vocab, encode_sequence, pad_batch, SequenceRole, Vocabulary, EOS, PAD, SOS, UNK};
