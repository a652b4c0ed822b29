use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that
/// created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    MulConst(Var, Array2<f64>),
    ConcatCols(Vec<Var>),
    Tanh(Var),
    Elu(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var, f64),
    Sigmoid(Var),
    RowSoftmax(Var),
    WeightedSum(Var, Vec<Var>),
    NormalizeRows(Var),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
    ScaleRows(Var, Var),
    SumGroups(Var, usize),
    RowSums(Var),
    ColMeans(Var),
    Sum(Var),
    Mean(Var),
    SpMM(Arc<CsrMatrix>, Var),
    Dropout(Var, Array2<f64>),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    tracked: bool,
}

/// Define-by-run computation graph over dense `f64` matrices.
///
/// Every op appends a node; [`Graph::backward`] walks the nodes in reverse
/// creation order, which is a valid reverse topological order.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    mode: Mode,
    pub(crate) bindings: Vec<(Var, usize)>,
}

const NORM_EPS: f64 = 1e-12;

fn shape(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

impl Graph {
    pub fn new(mode: Mode) -> Self {
        Graph {
            nodes: Vec::new(),
            mode,
            bindings: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        shape(self.value(v))
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, value: Array2<f64>, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, left: sa, right: sb });
        }
        Ok(())
    }

    /// Untracked input.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Tracked leaf; its gradient is reported by [`Graph::backward`].
    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Shape { op: "matmul", left: sa, right: sb });
        }
        let value = self.value(a).dot(self.value(b));
        let t = self.tracked(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), t))
    }

    /// Adds a `1 x m` row to every row of an `n x m` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sb.0 != 1 || sb.1 != sx.1 {
            return Err(Error::Shape { op: "add_bias", left: sx, right: sb });
        }
        let value = self.value(x) + self.value(bias);
        let t = self.tracked(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), t))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        let t = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), t))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a) - self.value(b);
        let t = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), t))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        let t = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), t))
    }

    /// `scale * x + shift`
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(x).mapv(|v| scale * v + shift);
        let t = self.tracked(&[x]);
        self.push(value, Op::Affine(x, scale), t)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.affine(x, c, 0.0)
    }

    /// Elementwise product with a constant matrix.
    pub fn mul_const(&mut self, x: Var, c: Array2<f64>) -> Result<Var> {
        if shape(&c) != self.shape(x) {
            return Err(Error::Shape { op: "mul_const", left: self.shape(x), right: shape(&c) });
        }
        let value = self.value(x) * &c;
        let t = self.tracked(&[x]);
        Ok(self.push(value, Op::MulConst(x, c), t))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Usage("concat of zero tensors".into()));
        };
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::Shape { op: "concat_cols", left: self.shape(first), right: self.shape(p) });
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let t = self.tracked(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), t))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::tanh);
        let t = self.tracked(&[x]);
        self.push(value, Op::Tanh(x), t)
    }

    /// ELU with unit scale.
    pub fn elu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| if v > 0.0 { v } else { v.exp_m1() });
        let t = self.tracked(&[x]);
        self.push(value, Op::Elu(x), t)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let value = self.value(x).mapv(|v| if v > 0.0 { v } else { slope * v });
        let t = self.tracked(&[x]);
        self.push(value, Op::LeakyRelu(x, slope), t)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::exp);
        let t = self.tracked(&[x]);
        self.push(value, Op::Exp(x), t)
    }

    /// Natural log.
    pub fn log(&mut self, x: Var) -> Var {
        self.log_clamped(x, 0.0)
    }

    /// `ln(max(x, floor))`; zero gradient where the floor is active.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Var {
        let value = self.value(x).mapv(|v| v.max(floor).ln());
        let t = self.tracked(&[x]);
        self.push(value, Op::Log(x, floor), t)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(sigmoid);
        let t = self.tracked(&[x]);
        self.push(value, Op::Sigmoid(x), t)
    }

    /// Softmax within each row (one group per row), max-shifted.
    pub fn row_softmax(&mut self, x: Var) -> Var {
        let mut value = self.value(x).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        let t = self.tracked(&[x]);
        self.push(value, Op::RowSoftmax(x), t)
    }

    /// `Σ_s weights[0, s] * items[s]` for a `1 x S` weight row.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let sw = self.shape(weights);
        if sw.0 != 1 || sw.1 != items.len() || items.is_empty() {
            return Err(Error::Shape { op: "weighted_sum", left: sw, right: (items.len(), 0) });
        }
        let s0 = self.shape(items[0]);
        for &it in items {
            if self.shape(it) != s0 {
                return Err(Error::Shape { op: "weighted_sum", left: s0, right: self.shape(it) });
            }
        }
        let mut value = Array2::zeros(s0);
        for (k, &it) in items.iter().enumerate() {
            value.scaled_add(self.value(weights)[[0, k]], self.value(it));
        }
        let mut deps = items.to_vec();
        deps.push(weights);
        let t = self.tracked(&deps);
        Ok(self.push(value, Op::WeightedSum(weights, items.to_vec()), t))
    }

    /// Scales every row to unit L2 norm (norms floored at 1e-12).
    pub fn normalize_rows(&mut self, x: Var) -> Var {
        let mut value = self.value(x).clone();
        for mut row in value.rows_mut() {
            let n = row.dot(&row).sqrt().max(NORM_EPS);
            row.mapv_inplace(|v| v / n);
        }
        let t = self.tracked(&[x]);
        self.push(value, Op::NormalizeRows(x), t)
    }

    /// Pairwise cosine similarities between the rows of `a` and `b`.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        let na = self.normalize_rows(a);
        let nb = self.normalize_rows(b);
        let nbt = self.transpose(nb);
        self.matmul(na, nbt)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).t().as_standard_layout().into_owned();
        let t = self.tracked(&[x]);
        self.push(value, Op::Transpose(x), t)
    }

    /// Row `k` of the result is row `idx[k]` of `x`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape { op: "gather_rows", left: (rows, cols), right: (bad, 0) });
        }
        let value = self.value(x).select(Axis(0), idx);
        let t = self.tracked(&[x]);
        Ok(self.push(value, Op::GatherRows(x, idx.to_vec()), t))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let s = self.shape(x);
        if s.0 * s.1 != rows * cols {
            return Err(Error::Shape { op: "reshape", left: s, right: (rows, cols) });
        }
        let flat: Vec<f64> = self.value(x).iter().copied().collect();
        let value = Array2::from_shape_vec((rows, cols), flat).expect("size checked");
        let t = self.tracked(&[x]);
        Ok(self.push(value, Op::Reshape(x), t))
    }

    /// Multiplies row `i` of `x` by `w[i, 0]`.
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sw != (sx.0, 1) {
            return Err(Error::Shape { op: "scale_rows", left: sx, right: sw });
        }
        let value = self.value(x) * self.value(w);
        let t = self.tracked(&[x, w]);
        Ok(self.push(value, Op::ScaleRows(x, w), t))
    }

    /// Sums consecutive blocks of `group` rows: `(n * group) x d -> n x d`.
    pub fn sum_groups(&mut self, x: Var, group: usize) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if group == 0 || rows % group != 0 {
            return Err(Error::Shape { op: "sum_groups", left: (rows, cols), right: (group, 0) });
        }
        let src = self.value(x);
        let mut value = Array2::zeros((rows / group, cols));
        for (r, row) in src.rows().into_iter().enumerate() {
            let mut out = value.row_mut(r / group);
            out += &row;
        }
        let t = self.tracked(&[x]);
        Ok(self.push(value, Op::SumGroups(x, group), t))
    }

    /// `n x m -> n x 1`
    pub fn row_sums(&mut self, x: Var) -> Var {
        let value = self.value(x).sum_axis(Axis(1)).insert_axis(Axis(1));
        let t = self.tracked(&[x]);
        self.push(value, Op::RowSums(x), t)
    }

    /// `n x m -> 1 x m`
    pub fn col_means(&mut self, x: Var) -> Var {
        let n = self.shape(x).0 as f64;
        let value = (self.value(x).sum_axis(Axis(0)) / n).insert_axis(Axis(0));
        let t = self.tracked(&[x]);
        self.push(value, Op::ColMeans(x), t)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(x).sum());
        let t = self.tracked(&[x]);
        self.push(value, Op::Sum(x), t)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let value = Array2::from_elem((1, 1), v.sum() / v.len() as f64);
        let t = self.tracked(&[x]);
        self.push(value, Op::Mean(x), t)
    }

    /// Sparse-dense product `a · x` with a constant sparse operator.
    pub fn spmm(&mut self, a: Arc<CsrMatrix>, x: Var) -> Result<Var> {
        let sx = self.shape(x);
        if a.cols() != sx.0 {
            return Err(Error::Shape { op: "spmm", left: (a.rows(), a.cols()), right: sx });
        }
        let value = sparse_dense(&a, self.value(x));
        let t = self.tracked(&[x]);
        Ok(self.push(value, Op::SpMM(a, x), t))
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`;
    /// identity in evaluation mode or at rate 0.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if self.mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = self
            .value(x)
            .mapv(|_| if rng.random::<f64>() < rate { 0.0 } else { keep });
        let value = self.value(x) * &mask;
        let t = self.tracked(&[x]);
        Ok(self.push(value, Op::Dropout(x, mask), t))
    }

    /// Reverse pass from a `1 x 1` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let s = self.shape(loss);
        if s != (1, 1) {
            return Err(Error::Usage(format!("backward needs a scalar loss, got {s:?}")));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].tracked {
                continue;
            }
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let mut acc = |v: Var, d: Array2<f64>| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &d,
                slot @ None => *slot = Some(d),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.dot(&self.value(*b).t()));
                acc(*b, self.value(*a).t().dot(g));
            }
            Op::AddBias(x, b) => {
                acc(*x, g.clone());
                acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                acc(*a, g * self.value(*b));
                acc(*b, g * self.value(*a));
            }
            Op::Affine(x, scale) => acc(*x, g * *scale),
            Op::MulConst(x, c) => acc(*x, g * c),
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    acc(*p, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::Tanh(x) => acc(*x, Zip::from(g).and(y).map_collect(|&g, &y| g * (1.0 - y * y))),
            Op::Elu(x) => acc(
                *x,
                Zip::from(g)
                    .and(self.value(*x))
                    .and(y)
                    .map_collect(|&g, &x, &y| if x > 0.0 { g } else { g * (y + 1.0) }),
            ),
            Op::LeakyRelu(x, slope) => acc(
                *x,
                Zip::from(g)
                    .and(self.value(*x))
                    .map_collect(|&g, &x| if x > 0.0 { g } else { g * slope }),
            ),
            Op::Exp(x) => acc(*x, g * y),
            Op::Log(x, floor) => acc(
                *x,
                Zip::from(g)
                    .and(self.value(*x))
                    .map_collect(|&g, &x| if x > *floor { g / x } else { 0.0 }),
            ),
            Op::Sigmoid(x) => acc(*x, Zip::from(g).and(y).map_collect(|&g, &y| g * y * (1.0 - y))),
            Op::RowSoftmax(x) => {
                let dots = (g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                acc(*x, y * &(g - &dots));
            }
            Op::WeightedSum(w, items) => {
                let wv = self.value(*w);
                let mut dw = Array2::zeros((1, items.len()));
                for (k, it) in items.iter().enumerate() {
                    dw[[0, k]] = (g * self.value(*it)).sum();
                    acc(*it, g * wv[[0, k]]);
                }
                acc(*w, dw);
            }
            Op::NormalizeRows(x) => {
                let xv = self.value(*x);
                let mut dx = Array2::zeros(xv.dim());
                for r in 0..xv.nrows() {
                    let n = xv.row(r).dot(&xv.row(r)).sqrt().max(NORM_EPS);
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let proj = yr.dot(&gr);
                    let mut out = dx.row_mut(r);
                    Zip::from(&mut out)
                        .and(&gr)
                        .and(&yr)
                        .for_each(|o, &g, &y| *o = (g - y * proj) / n);
                }
                acc(*x, dx);
            }
            Op::Transpose(x) => acc(*x, g.t().as_standard_layout().into_owned()),
            Op::GatherRows(x, idx) => {
                let mut dx = Array2::zeros(self.shape(*x));
                for (k, &i) in idx.iter().enumerate() {
                    let mut row = dx.row_mut(i);
                    row += &g.row(k);
                }
                acc(*x, dx);
            }
            Op::Reshape(x) => {
                let flat: Vec<f64> = g.iter().copied().collect();
                acc(*x, Array2::from_shape_vec(self.shape(*x), flat).expect("same size"));
            }
            Op::ScaleRows(x, w) => {
                acc(*x, g * self.value(*w));
                acc(*w, (g * self.value(*x)).sum_axis(Axis(1)).insert_axis(Axis(1)));
            }
            Op::SumGroups(x, group) => {
                let (rows, _) = self.shape(*x);
                let idx: Vec<usize> = (0..rows).map(|r| r / group).collect();
                acc(*x, g.select(Axis(0), &idx));
            }
            Op::RowSums(x) => {
                let s = self.shape(*x);
                acc(*x, g.broadcast(s).expect("n x 1 broadcasts").to_owned());
            }
            Op::ColMeans(x) => {
                let s = self.shape(*x);
                let scaled = g / s.0 as f64;
                acc(*x, scaled.broadcast(s).expect("1 x m broadcasts").to_owned());
            }
            Op::Sum(x) => acc(*x, Array2::from_elem(self.shape(*x), g[[0, 0]])),
            Op::Mean(x) => {
                let s = self.shape(*x);
                acc(*x, Array2::from_elem(s, g[[0, 0]] / (s.0 * s.1) as f64));
            }
            Op::SpMM(a, x) => acc(*x, sparse_dense(&a.transpose(), g)),
            Op::Dropout(x, mask) => acc(*x, g * mask),
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn sparse_dense(a: &CsrMatrix, x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.rows(), x.ncols()));
    for r in 0..a.rows() {
        let mut row = out.row_mut(r);
        for (c, v) in a.row(r) {
            row.scaled_add(v, &x.row(c));
        }
    }
    out
}

/// Result of a reverse pass; gradients of untracked or unreachable nodes
/// are absent.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}
