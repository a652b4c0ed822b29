//! Meta-path specifications and the target-to-target graphs they induce.

use crate::error::{Error, Result};
use crate::hin::graph::{HeteroGraph, RelationId, TypeId};
use crate::sparse::{BoolCsr, CsrMatrix};

/// Direction in which a relation is traversed by a meta-path step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `src -> dst`
    Forward,
    /// `dst -> src`
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub relation: RelationId,
    pub direction: Direction,
}

/// A relation chain starting and ending at the target type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPathSpec {
    pub name: String,
    pub steps: Vec<Step>,
}

impl MetaPathSpec {
    pub fn new(name: impl Into<String>, steps: Vec<Step>) -> Self {
        MetaPathSpec {
            name: name.into(),
            steps,
        }
    }

    /// Parses a type sequence such as `"PAP"` (single-letter type names)
    /// or `"P-A-P"` against the graph's declared types. Each hop must be
    /// served by exactly one relation.
    pub fn parse(name: &str, g: &HeteroGraph) -> Result<Self> {
        let labels: Vec<String> = if name.contains('-') {
            name.split('-').map(|s| s.trim().to_string()).collect()
        } else {
            name.chars().map(|c| c.to_string()).collect()
        };
        let tys = labels
            .iter()
            .map(|l| {
                g.type_id(l)
                    .ok_or_else(|| Error::Input(format!("meta-path {name:?}: unknown type {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut steps = Vec::with_capacity(tys.len().saturating_sub(1));
        for w in tys.windows(2) {
            let (from, to) = (w[0], w[1]);
            let candidates: Vec<Step> = g
                .relations()
                .iter()
                .enumerate()
                .filter_map(|(id, r)| {
                    if r.src == from && r.dst == to {
                        Some(Step { relation: id, direction: Direction::Forward })
                    } else if r.dst == from && r.src == to {
                        Some(Step { relation: id, direction: Direction::Backward })
                    } else {
                        None
                    }
                })
                .collect();
            match candidates.as_slice() {
                [one] => steps.push(*one),
                [] => {
                    return Err(Error::Schema(format!(
                        "meta-path {name:?}: no relation joins {} and {}",
                        g.types()[from].name,
                        g.types()[to].name
                    )))
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "meta-path {name:?}: several relations join {} and {}",
                        g.types()[from].name,
                        g.types()[to].name
                    )))
                }
            }
        }
        let spec = MetaPathSpec::new(name, steps);
        spec.check(g)?;
        Ok(spec)
    }

    /// Type sequence visited by the chain, or an error if it is not
    /// well-typed over `g`.
    pub fn type_sequence(&self, g: &HeteroGraph) -> Result<Vec<TypeId>> {
        let mut seq = vec![g.target_type()];
        for step in &self.steps {
            let rel = g.relation(step.relation).ok_or_else(|| {
                Error::Input(format!("meta-path {:?}: unknown relation {}", self.name, step.relation))
            })?;
            let (from, to) = match step.direction {
                Direction::Forward => (rel.src, rel.dst),
                Direction::Backward => (rel.dst, rel.src),
            };
            let current = *seq.last().unwrap();
            if from != current {
                return Err(Error::Schema(format!(
                    "meta-path {:?}: relation {:?} does not start at type {}",
                    self.name,
                    rel.name,
                    g.types()[current].name
                )));
            }
            seq.push(to);
        }
        Ok(seq)
    }

    fn check(&self, g: &HeteroGraph) -> Result<()> {
        if self.steps.len() < 2 {
            return Err(Error::Schema(format!(
                "meta-path {:?} needs at least two relations",
                self.name
            )));
        }
        let seq = self.type_sequence(g)?;
        if *seq.last().unwrap() != g.target_type() {
            return Err(Error::Schema(format!(
                "meta-path {:?} does not end at the target type",
                self.name
            )));
        }
        Ok(())
    }
}

/// Boolean, symmetric, self-free adjacency among target nodes induced by
/// one meta-path.
#[derive(Debug, Clone)]
pub struct MetaPathGraph {
    spec: MetaPathSpec,
    adjacency: BoolCsr,
    degrees: Vec<usize>,
}

impl MetaPathGraph {
    pub fn spec(&self) -> &MetaPathSpec {
        &self.spec
    }

    pub fn adjacency(&self) -> &BoolCsr {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adjacency.row(i)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adjacency.contains(i, j)
    }

    /// Symmetric GCN operator with self loops:
    /// `1/(d_i+1)` on the diagonal and `1/sqrt((d_i+1)(d_j+1))` per edge.
    pub fn normalized_operator(&self) -> CsrMatrix {
        let n = self.node_count();
        let rows = (0..n)
            .map(|i| {
                let di = self.degrees[i] as f64 + 1.0;
                let mut row = Vec::with_capacity(self.degrees[i] + 1);
                row.push((i, 1.0 / di));
                for &j in self.neighbors(i) {
                    let dj = self.degrees[j] as f64 + 1.0;
                    row.push((j, 1.0 / (di * dj).sqrt()));
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }
}

/// Composes the relation adjacencies along `spec`. A pair is adjacent iff
/// a path instance joins them in either direction; the diagonal is
/// cleared.
pub fn build_metapath_graph(g: &HeteroGraph, spec: &MetaPathSpec) -> Result<MetaPathGraph> {
    spec.check(g)?;
    let mut reach: Option<BoolCsr> = None;
    for step in &spec.steps {
        let rel = g.relation(step.relation).expect("checked above");
        let hop = match step.direction {
            Direction::Forward => rel.forward(),
            Direction::Backward => rel.backward(),
        };
        reach = Some(match reach {
            None => hop.clone(),
            Some(acc) => acc.compose(hop),
        });
    }
    let paths = reach.expect("at least two steps");
    let adjacency = paths.union(&paths.transpose()).without_diagonal();
    let degrees = (0..adjacency.rows()).map(|i| adjacency.row(i).len()).collect();
    Ok(MetaPathGraph {
        spec: spec.clone(),
        adjacency,
        degrees,
    })
}

/// Number of meta-paths under which `i` and `j` are neighbors.
pub fn count_metapath_links(mpgs: &[MetaPathGraph], i: usize, j: usize) -> Result<usize> {
    let n = mpgs.first().map(MetaPathGraph::node_count).unwrap_or(0);
    if i >= n || j >= n {
        return Err(Error::Input(format!("({i}, {j}) is not a pair of target nodes (n = {n})")));
    }
    if i == j {
        return Err(Error::Input(format!("link count of node {i} with itself is undefined")));
    }
    Ok(mpgs.iter().filter(|m| m.contains(i, j)).count())
}
