use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hin::graph::{HeteroGraph, TypeId};

/// Draws `t` neighbors of type `ty` for target node `i`.
///
/// Without replacement when the node has at least `t` such neighbors,
/// with replacement otherwise, so every node aggregates exactly `t`
/// messages per type.
pub fn sample_neighbors<R: Rng + ?Sized>(
    g: &HeteroGraph,
    i: usize,
    ty: TypeId,
    t: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    let nbrs = g.typed_neighbors(i, ty)?;
    if nbrs.is_empty() {
        return Err(Error::Structural(format!(
            "target node {i} has no neighbors of type {ty} ({})",
            g.types()[ty].name
        )));
    }
    if nbrs.len() >= t {
        Ok(index::sample(rng, nbrs.len(), t).into_iter().map(|k| nbrs[k]).collect())
    } else {
        Ok((0..t).map(|_| nbrs[rng.random_range(0..nbrs.len())]).collect())
    }
}

/// One epoch's schema-view sample for a single neighbor type: node `i`'s
/// draws occupy `ids[i * per_node..(i + 1) * per_node]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeSample {
    pub ty: TypeId,
    pub per_node: usize,
    pub ids: Vec<usize>,
}

impl TypeSample {
    pub fn of(&self, i: usize) -> &[usize] {
        &self.ids[i * self.per_node..(i + 1) * self.per_node]
    }
}

/// Samples every target node for every schema neighbor type, in type
/// order then node order.
pub fn sample_all<R: Rng + ?Sized>(
    g: &HeteroGraph,
    thresholds: &[usize],
    rng: &mut R,
) -> Result<Vec<TypeSample>> {
    let types = &g.schema().neighbor_types;
    if thresholds.len() != types.len() {
        return Err(Error::Config(format!(
            "{} sample thresholds for {} neighbor types",
            thresholds.len(),
            types.len()
        )));
    }
    types
        .iter()
        .zip(thresholds)
        .map(|(&ty, &t)| {
            let mut ids = Vec::with_capacity(t * g.target_count());
            for i in 0..g.target_count() {
                ids.extend(sample_neighbors(g, i, ty, t, rng)?);
            }
            Ok(TypeSample { ty, per_node: t, ids })
        })
        .collect()
}
