//! Cross-view co-contrastive embedding of heterogeneous information
//! networks.
//!
//! Target nodes are encoded twice: once from their directly connected
//! typed neighbors (network-schema view) and once from meta-path
//! neighborhoods (meta-path view). The two views supervise each other
//! through a multi-positive contrastive loss; the meta-path embeddings are
//! then evaluated by linear probing and k-means clustering.

pub mod autodiff;
pub mod cli;
pub mod contrast;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod extensions;
pub mod hin;
pub mod sparse;

pub use error::{Error, Result};
