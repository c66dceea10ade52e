//! Feature reduction: PCA and an LDA topic model.

mod lda;
mod pca;

pub use lda::{fit_lda, lda_infer, lda_transform, LdaConfig, LdaModel};
pub use pca::{densify, fit_pca, PcaModel, DEFAULT_DENSIFY_CAP};
