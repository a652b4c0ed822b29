//! Minimal reverse-mode differentiation over dense `f64` matrices, plus a
//! named parameter store with an Adam optimizer and checkpoint I/O.

mod graph;
mod params;

pub use graph::{Gradients, Graph, Mode, Var};
pub(crate) use graph::sigmoid;
pub use params::{glorot_init, AdamConfig, ParamStore, CHECKPOINT_VERSION};
