//! Intent clustering of community Q&A questions.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! 1. [`ingest`] streams Stack Exchange `Posts.xml` (or JSONL) and keeps
//!    plain-text questions on whitelisted tags.
//! 2. [`embeddings`] holds fixed-dimension question vectors, the SOCV
//!    binary format, and a deterministic hashing embedder.
//! 3. [`simgraph`] computes pairwise cosine similarities into a sparse,
//!    thresholded undirected graph.
//! 4. [`cluster`] extracts connected components over edges whose weight
//!    is at least the threshold, by breadth-first search.
//! 5. [`metrics`], [`sweep`] and [`report`] score the clusterings over a
//!    range of thresholds and render the results.

pub mod cluster;
pub mod embeddings;
mod error;
pub mod ingest;
pub mod metrics;
mod numfmt;
pub mod report;
pub mod simgraph;
pub mod sweep;

pub use cluster::{assign_to_cluster, cluster, ClusterSet};
pub use embeddings::{hash_embed, read_vectors, write_vectors, EmbeddingVector, VectorCollection};
pub use error::{Error, Location, Result};
pub use ingest::{filter_questions, parse_posts, FilterConfig, PostFormat, Question, RawPost};
pub use metrics::{Distance, MetricReport, MetricValue};
pub use numfmt::round_sig9;
pub use report::{render_report, ReportFormat};
pub use simgraph::{build_graph, cosine_similarity, SimilarityGraph};
pub use sweep::{run_sweep, SweepConfig, SweepReport, DEFAULT_THRESHOLDS};
