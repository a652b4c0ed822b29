//! Compressed sparse row storage for boolean relations and for the
//! normalized propagation operators built from them.

/// Boolean sparse matrix in CSR form. Column indices within a row are
/// sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolCsr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl BoolCsr {
    /// Builds a matrix from `(row, col)` pairs. Duplicates collapse.
    ///
    /// Panics if a pair is out of range; callers validate ids first.
    pub fn from_pairs(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for (r, c) in pairs {
            assert!(r < rows && c < cols, "pair ({r}, {c}) outside {rows}x{cols}");
            buckets[r].push(c);
        }
        Self::from_rows(cols, buckets)
    }

    fn from_rows(cols: usize, mut buckets: Vec<Vec<usize>>) -> Self {
        let mut indptr = Vec::with_capacity(buckets.len() + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for row in &mut buckets {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        BoolCsr {
            rows: buckets.len(),
            cols,
            indptr,
            indices,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    pub fn transpose(&self) -> BoolCsr {
        BoolCsr::from_pairs(self.cols, self.rows, self.pairs().map(|(r, c)| (c, r)))
    }

    /// Boolean product: `(self ∘ other)(i, k)` holds iff some `j` has
    /// `self(i, j)` and `other(j, k)`.
    pub fn compose(&self, other: &BoolCsr) -> BoolCsr {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut mark = vec![usize::MAX; other.cols];
        let mut buckets = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut row = Vec::new();
            for &mid in self.row(r) {
                for &c in other.row(mid) {
                    if mark[c] != r {
                        mark[c] = r;
                        row.push(c);
                    }
                }
            }
            buckets.push(row);
        }
        BoolCsr::from_rows(other.cols, buckets)
    }

    /// Elementwise OR of two same-shape matrices.
    pub fn union(&self, other: &BoolCsr) -> BoolCsr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let buckets = (0..self.rows)
            .map(|r| {
                let mut row = self.row(r).to_vec();
                row.extend_from_slice(other.row(r));
                row
            })
            .collect();
        BoolCsr::from_rows(self.cols, buckets)
    }

    pub fn without_diagonal(&self) -> BoolCsr {
        let buckets = (0..self.rows)
            .map(|r| self.row(r).iter().copied().filter(|&c| c != r).collect())
            .collect();
        BoolCsr::from_rows(self.cols, buckets)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.pairs().all(|(r, c)| self.contains(c, r))
    }
}

/// Real-valued CSR matrix, used as a constant operand in sparse-dense
/// products.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; entries are sorted by
    /// column and must not repeat.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < cols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v));
            }
        }
        CsrMatrix::from_rows(self.rows, rows)
    }
}
