use crate::error::{Error, Result};
use crate::hin::metapath::MetaPathGraph;

/// Per-node positive and negative sets among target nodes.
///
/// `positives(i)` never contains `i`; the contrastive loss adds the
/// node's own cross-view embedding separately (see [`PositiveSets::with_self`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveSets {
    t_pos: usize,
    positives: Vec<Vec<usize>>,
    negatives: Vec<Vec<usize>>,
}

impl PositiveSets {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn t_pos(&self) -> usize {
        self.t_pos
    }

    /// Ordered by link count descending, then id ascending.
    pub fn positives(&self, i: usize) -> &[usize] {
        &self.positives[i]
    }

    /// Sorted ascending.
    pub fn negatives(&self, i: usize) -> &[usize] {
        &self.negatives[i]
    }

    /// `i` followed by its selected positives.
    pub fn with_self(&self, i: usize) -> Vec<usize> {
        std::iter::once(i).chain(self.positives[i].iter().copied()).collect()
    }

    /// Dense `n x n` mask over [`PositiveSets::with_self`].
    pub fn mask_with_self(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut row = vec![false; n];
                for j in self.with_self(i) {
                    row[j] = true;
                }
                row
            })
            .collect()
    }
}

/// Ranks every other target node by the number of meta-paths linking it
/// to `i` and keeps the first `t_pos` with a non-zero count.
pub fn select_positives(mpgs: &[MetaPathGraph], t_pos: usize) -> Result<PositiveSets> {
    if t_pos == 0 {
        return Err(Error::Config("t_pos must be at least 1".into()));
    }
    let n = mpgs.first().map(MetaPathGraph::node_count).unwrap_or(0);
    let mut positives = Vec::with_capacity(n);
    let mut negatives = Vec::with_capacity(n);
    let mut counts = vec![0usize; n];
    for i in 0..n {
        let mut touched = Vec::new();
        for m in mpgs {
            for &j in m.neighbors(i) {
                if counts[j] == 0 {
                    touched.push(j);
                }
                counts[j] += 1;
            }
        }
        touched.sort_unstable_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        touched.truncate(t_pos);
        let mut is_pos = vec![false; n];
        for &j in &touched {
            is_pos[j] = true;
        }
        negatives.push((0..n).filter(|&j| j != i && !is_pos[j]).collect());
        positives.push(touched);
        counts.iter_mut().for_each(|c| *c = 0);
    }
    Ok(PositiveSets {
        t_pos,
        positives,
        negatives,
    })
}
