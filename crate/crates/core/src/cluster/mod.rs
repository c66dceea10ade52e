//! Grouping generated intents into reason buckets.

mod embed;
mod linkage;

pub use embed::{cosine_distance, EmbeddingBackend, LSA_DIMS};
pub use linkage::{agglomerative_cluster, label_clusters, write_cluster_csv, ClusterAssignment, Linkage, Merge, DEFAULT_THRESHOLD};
