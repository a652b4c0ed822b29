//! Typed graph model: heterogeneous graphs, their network schema,
//! meta-path graphs, positive-set selection and typed neighbor sampling.

mod graph;
mod metapath;
mod positives;
mod sampling;

pub use graph::{HeteroGraph, NetworkSchema, NodeRef, NodeType, Relation, RelationDecl, RelationId, TypeId};
pub use metapath::{build_metapath_graph, count_metapath_links, Direction, MetaPathGraph, MetaPathSpec, Step};
pub use positives::{select_positives, PositiveSets};
pub use sampling::{sample_all, sample_neighbors, TypeSample};
