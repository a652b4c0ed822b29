use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::BoolCsr;

pub type TypeId = usize;
pub type RelationId = usize;

/// A node addressed by its type and its dense per-type index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub ty: TypeId,
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeType {
    pub name: String,
    pub count: usize,
}

/// Relation declaration used when assembling a graph.
#[derive(Debug, Clone)]
pub struct RelationDecl {
    pub name: String,
    pub src: TypeId,
    pub dst: TypeId,
    pub edges: Vec<(usize, usize)>,
}

/// A typed relation with its adjacency stored in both directions.
#[derive(Debug, Clone)]
pub struct Relation {
    pub name: String,
    pub src: TypeId,
    pub dst: TypeId,
    forward: BoolCsr,
    backward: BoolCsr,
}

impl Relation {
    /// `src x dst` adjacency.
    pub fn forward(&self) -> &BoolCsr {
        &self.forward
    }

    /// `dst x src` adjacency.
    pub fn backward(&self) -> &BoolCsr {
        &self.backward
    }

    pub fn edge_count(&self) -> usize {
        self.forward.nnz()
    }
}

/// Immutable typed multigraph with per-type dense features.
#[derive(Debug, Clone)]
pub struct HeteroGraph {
    types: Vec<NodeType>,
    relations: Vec<Relation>,
    features: Vec<Array2<f64>>,
    target: TypeId,
    schema: NetworkSchema,
    // target -> neighbor-type adjacency, one per schema neighbor type
    typed_neighbors: Vec<BoolCsr>,
}

/// Type-level template derived from the graph's relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSchema {
    pub types: Vec<TypeId>,
    pub edges: Vec<(TypeId, RelationId, TypeId)>,
    /// Types other than the target that share a relation with it, in
    /// ascending type order.
    pub neighbor_types: Vec<TypeId>,
}

impl HeteroGraph {
    /// Validates and assembles a graph.
    pub fn new(
        types: Vec<NodeType>,
        relations: Vec<RelationDecl>,
        features: Vec<Array2<f64>>,
        target: TypeId,
    ) -> Result<Self> {
        if types.len() + relations.len() <= 2 {
            return Err(Error::Schema(format!(
                "a heterogeneous graph needs |types| + |relations| > 2, got {} + {}",
                types.len(),
                relations.len()
            )));
        }
        if target >= types.len() {
            return Err(Error::Schema(format!("target type {target} is not declared")));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &types {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::Schema(format!("duplicate type name {:?}", t.name)));
            }
        }
        if features.len() != types.len() {
            return Err(Error::Input(format!(
                "{} feature matrices for {} types",
                features.len(),
                types.len()
            )));
        }
        for (t, f) in types.iter().zip(&features) {
            if f.nrows() != t.count {
                return Err(Error::Input(format!(
                    "type {:?} has {} nodes but {} feature rows",
                    t.name,
                    t.count,
                    f.nrows()
                )));
            }
        }

        let mut built = Vec::with_capacity(relations.len());
        for rel in relations {
            let (ns, nd) = match (types.get(rel.src), types.get(rel.dst)) {
                (Some(s), Some(d)) => (s.count, d.count),
                _ => {
                    return Err(Error::Schema(format!(
                        "relation {:?} references an undeclared type",
                        rel.name
                    )))
                }
            };
            if let Some(&(s, d)) = rel.edges.iter().find(|&&(s, d)| s >= ns || d >= nd) {
                return Err(Error::Input(format!(
                    "relation {:?}: edge ({s}, {d}) outside {} x {} endpoint types",
                    rel.name, types[rel.src].name, types[rel.dst].name
                )));
            }
            let forward = BoolCsr::from_pairs(ns, nd, rel.edges.iter().copied());
            let backward = forward.transpose();
            built.push(Relation {
                name: rel.name,
                src: rel.src,
                dst: rel.dst,
                forward,
                backward,
            });
        }

        let schema = derive_schema(types.len(), &built, target);
        let typed_neighbors = schema
            .neighbor_types
            .iter()
            .map(|&ty| union_adjacency(&built, target, ty, types[target].count, types[ty].count))
            .collect();

        Ok(HeteroGraph {
            types,
            relations: built,
            features,
            target,
            schema,
            typed_neighbors,
        })
    }

    pub fn types(&self) -> &[NodeType] {
        &self.types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, id: RelationId) -> Option<&Relation> {
        self.relations.get(id)
    }

    pub fn features(&self, ty: TypeId) -> &Array2<f64> {
        &self.features[ty]
    }

    pub fn target_type(&self) -> TypeId {
        self.target
    }

    pub fn target_count(&self) -> usize {
        self.types[self.target].count
    }

    pub fn node_count(&self, ty: TypeId) -> usize {
        self.types[ty].count
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    /// Sorted neighbors of type `ty` of target node `i`, merged over every
    /// relation joining the two types.
    pub fn typed_neighbors(&self, i: usize, ty: TypeId) -> Result<&[usize]> {
        let slot = self
            .schema
            .neighbor_types
            .iter()
            .position(|&t| t == ty)
            .ok_or_else(|| {
                Error::Input(format!("type {ty} is not a schema neighbor of the target type"))
            })?;
        if i >= self.target_count() {
            return Err(Error::Input(format!("target node {i} out of range")));
        }
        Ok(self.typed_neighbors[slot].row(i))
    }

    /// Copy of the graph with one type's features replaced.
    pub fn with_features(&self, ty: TypeId, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.types[ty].count {
            return Err(Error::Input("feature row count mismatch".into()));
        }
        let mut g = self.clone();
        g.features[ty] = features;
        Ok(g)
    }
}

fn derive_schema(type_count: usize, relations: &[Relation], target: TypeId) -> NetworkSchema {
    let edges: Vec<_> = relations
        .iter()
        .enumerate()
        .map(|(id, r)| (r.src, id, r.dst))
        .collect();
    let mut neighbor_types: Vec<TypeId> = edges
        .iter()
        .filter_map(|&(s, _, d)| match (s == target, d == target) {
            (true, false) => Some(d),
            (false, true) => Some(s),
            _ => None,
        })
        .collect();
    neighbor_types.sort_unstable();
    neighbor_types.dedup();
    NetworkSchema {
        types: (0..type_count).collect(),
        edges,
        neighbor_types,
    }
}

fn union_adjacency(relations: &[Relation], target: TypeId, ty: TypeId, nt: usize, nn: usize) -> BoolCsr {
    let mut pairs = Vec::new();
    for r in relations {
        if r.src == target && r.dst == ty {
            pairs.extend(r.forward.pairs());
        } else if r.dst == target && r.src == ty {
            pairs.extend(r.backward.pairs());
        }
    }
    BoolCsr::from_pairs(nt, nn, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn types() -> Vec<NodeType> {
        vec![
            NodeType { name: "P".into(), count: 2 },
            NodeType { name: "A".into(), count: 2 },
        ]
    }

    fn feats() -> Vec<Array2<f64>> {
        vec![Array2::zeros((2, 1)), Array2::eye(2)]
    }

    #[test]
    fn rejects_homogeneous_graph() {
        let err = HeteroGraph::new(
            vec![NodeType { name: "P".into(), count: 2 }],
            vec![RelationDecl { name: "cites".into(), src: 0, dst: 0, edges: vec![(0, 1)] }],
            vec![Array2::zeros((2, 1))],
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn rejects_edge_with_wrong_endpoint_type() {
        let err = HeteroGraph::new(
            types(),
            vec![
                RelationDecl { name: "pa".into(), src: 0, dst: 1, edges: vec![(0, 5)] },
                RelationDecl { name: "pa2".into(), src: 0, dst: 1, edges: vec![] },
            ],
            feats(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn rejects_feature_row_mismatch() {
        let err = HeteroGraph::new(
            types(),
            vec![RelationDecl { name: "pa".into(), src: 0, dst: 1, edges: vec![(0, 1)] }],
            vec![Array2::zeros((3, 1)), Array2::eye(2)],
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn schema_and_typed_neighbors_merge_relations() {
        let g = HeteroGraph::new(
            types(),
            vec![
                RelationDecl { name: "writes".into(), src: 1, dst: 0, edges: vec![(0, 0)] },
                RelationDecl { name: "reviews".into(), src: 0, dst: 1, edges: vec![(0, 1), (1, 1)] },
            ],
            feats(),
            0,
        )
        .unwrap();
        assert_eq!(g.schema().neighbor_types, vec![1]);
        assert_eq!(g.typed_neighbors(0, 1).unwrap(), &[0, 1]);
        assert_eq!(g.typed_neighbors(1, 1).unwrap(), &[1]);
        assert!(g.typed_neighbors(0, 0).is_err());
    }
}
