//! Mining inbound-call corpora for call *reasons* and call *motivators*.
//!
//! Reasons come from a from-scratch attention seq2seq model that condenses a
//! transcript into a short intent (at most six tokens); intents are then
//! grouped with agglomerative clustering. Motivators are one of twelve closed
//! categories predicted by 1-vs-all classifiers trained per data source
//! (call transcript, whisper + rep-notes, clickstream) and combined with a
//! per-motivator stacking ensemble.
//!
//! The numerical kernels shared by the summarizer and PCA are generic over the
//! scalar type (see [`scalar::Real`]); the aliases below fix the precision used
//! for training and for gradient checking.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod classify;
pub mod cluster;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod linalg;
pub mod normalize;
pub mod pipeline;
pub mod reduce;
pub mod rng;
pub mod scalar;
pub mod summarizer;

pub use error::{Error, Result};

/// Summarizer in 32-bit precision, used for training and inference.
pub type Seq2SeqF32 = summarizer::Seq2SeqModel<f32>;
/// Summarizer in 64-bit precision, used by the finite-difference gradient check.
pub type Seq2SeqF64 = summarizer::Seq2SeqModel<f64>;
/// Dense row-major matrix in 64-bit precision.
pub type MatrixF64 = linalg::Matrix<f64>;
/// PCA model in 64-bit precision (the default for feature reduction).
pub type PcaF64 = reduce::PcaModel<f64>;
/// PCA model in 32-bit precision.
pub type PcaF32 = reduce::PcaModel<f32>;
