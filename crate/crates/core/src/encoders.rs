//! The two view encoders.
//!
//! Network-schema view: every target node attends over a fixed-size sample
//! of its typed neighbors (never itself), then a type-level attention with
//! one global weight per neighbor type fuses the per-type embeddings.
//!
//! Meta-path view: one normalized propagation step per meta-path over the
//! projected target features only, fused by a semantic-level attention
//! with one global weight per meta-path.
//!
//! Parameters are stored as right-multiplied matrices (`x · W`), so a
//! projection from raw dimension `r` to `d` has shape `r x d`.

use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::hin::{HeteroGraph, TypeSample};
use crate::sparse::CsrMatrix;

/// Structural settings of the encoders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub dim: usize,
    pub dropout_feat: f64,
    pub dropout_attn: f64,
    pub leaky_slope: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            dropout_feat: 0.3,
            dropout_attn: 0.5,
            leaky_slope: 0.01,
        }
    }
}

pub fn projection_weight(type_name: &str) -> String {
    format!("proj.w.{type_name}")
}

pub fn projection_bias(type_name: &str) -> String {
    format!("proj.b.{type_name}")
}

pub fn node_attention(type_name: &str) -> String {
    format!("sc.att.{type_name}")
}

/// Registers every encoder parameter for `graph`: Glorot for matrices and
/// attention vectors, zeros for biases.
pub fn init_encoder_params<R: Rng + ?Sized>(
    store: &mut ParamStore,
    graph: &HeteroGraph,
    dim: usize,
    rng: &mut R,
) -> Result<()> {
    for (ty, t) in graph.types().iter().enumerate() {
        store.insert_glorot(projection_weight(&t.name), graph.features(ty).ncols(), dim, rng)?;
        store.insert_zeros(projection_bias(&t.name), 1, dim)?;
    }
    for &ty in &graph.schema().neighbor_types {
        store.insert_glorot(node_attention(&graph.types()[ty].name), 2 * dim, 1, rng)?;
    }
    for view in ["sc", "mp"] {
        store.insert_glorot(format!("{view}.w"), dim, dim, rng)?;
        store.insert_zeros(format!("{view}.b"), 1, dim)?;
        store.insert_glorot(format!("{view}.a"), dim, 1, rng)?;
    }
    Ok(())
}

/// `h = ELU(x · W + b)` for every node type, with feature dropout applied
/// to the result in training mode. Indexed by type id.
pub fn project_features<R: Rng + ?Sized>(
    g: &mut Graph,
    store: &ParamStore,
    graph: &HeteroGraph,
    cfg: &EncoderConfig,
    rng: &mut R,
) -> Result<Vec<Var>> {
    graph
        .types()
        .iter()
        .enumerate()
        .map(|(ty, t)| {
            let w = store
                .bind(g, &projection_weight(&t.name))
                .map_err(|_| Error::Config(format!("no projection registered for type {:?}", t.name)))?;
            let b = store.bind(g, &projection_bias(&t.name))?;
            let x = g.constant(graph.features(ty).clone());
            let lin = g.matmul(x, w)?;
            let lin = g.add_bias(lin, b)?;
            let h = g.elu(lin);
            g.dropout(h, cfg.dropout_feat, rng)
        })
        .collect()
}

/// Node-level attention over one neighbor type.
///
/// Returns the `n x d` type embeddings and the `n x T` attention
/// coefficients (before attention dropout). Duplicate draws attend as
/// independent terms.
pub fn encode_type_neighbors<R: Rng + ?Sized>(
    g: &mut Graph,
    h_target: Var,
    h_neighbors: Var,
    sample: &TypeSample,
    attention: Var,
    cfg: &EncoderConfig,
    rng: &mut R,
) -> Result<(Var, Var)> {
    let t = sample.per_node;
    if t == 0 || sample.ids.is_empty() {
        return Err(Error::Structural(format!("empty neighbor sample for type {}", sample.ty)));
    }
    let n = sample.ids.len() / t;
    if g.shape(h_target).0 != n {
        return Err(Error::Shape { op: "encode_type_neighbors", left: g.shape(h_target), right: (n, t) });
    }
    let anchors: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, t)).collect();
    let hi = g.gather_rows(h_target, &anchors)?;
    let hj = g.gather_rows(h_neighbors, &sample.ids)?;
    let pair = g.concat_cols(&[hi, hj])?;
    let logits = g.matmul(pair, attention)?;
    let logits = g.leaky_relu(logits, cfg.leaky_slope);
    let logits = g.reshape(logits, n, t)?;
    let alpha = g.row_softmax(logits);
    let dropped = g.dropout(alpha, cfg.dropout_attn, rng)?;
    let weights = g.reshape(dropped, n * t, 1)?;
    let messages = g.scale_rows(hj, weights)?;
    let summed = g.sum_groups(messages, t)?;
    Ok((g.elu(summed), alpha))
}

/// Global attention fusion shared by both views:
/// `w_k = mean_i a · tanh(W h_i^k + b)`, `β = softmax(w)`,
/// `z = Σ_k β_k h^k`. Returns `(z, β)` with `β` as a `1 x K` row.
pub fn fuse_embeddings<R: Rng + ?Sized>(
    g: &mut Graph,
    items: &[Var],
    w: Var,
    b: Var,
    a: Var,
    dropout_attn: f64,
    rng: &mut R,
) -> Result<(Var, Var)> {
    if items.is_empty() {
        return Err(Error::Structural("nothing to fuse".into()));
    }
    let a = g.dropout(a, dropout_attn, rng)?;
    let mut scores = Vec::with_capacity(items.len());
    for &h in items {
        let lin = g.matmul(h, w)?;
        let lin = g.add_bias(lin, b)?;
        let act = g.tanh(lin);
        let mean = g.col_means(act);
        scores.push(g.matmul(mean, a)?);
    }
    let scores = g.concat_cols(&scores)?;
    let beta = g.row_softmax(scores);
    let z = g.weighted_sum(beta, items)?;
    Ok((z, beta))
}

/// One normalized propagation step over a meta-path graph with self
/// loops. Only target-type features enter.
pub fn propagate_metapath(g: &mut Graph, h_target: Var, operator: Arc<CsrMatrix>) -> Result<Var> {
    g.spmm(operator, h_target)
}

/// Everything one encoder pass produces.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub projected: Vec<Var>,
    pub type_embeddings: Vec<Var>,
    pub node_attention: Vec<Var>,
    pub z_sc: Var,
    pub beta_types: Var,
    pub metapath_embeddings: Vec<Var>,
    pub z_mp: Var,
    pub beta_paths: Var,
}

/// Runs both encoders. `samples` must follow the schema's neighbor-type
/// order and `operators` the meta-path order.
pub fn encode<R: Rng + ?Sized>(
    g: &mut Graph,
    store: &ParamStore,
    graph: &HeteroGraph,
    samples: &[TypeSample],
    operators: &[Arc<CsrMatrix>],
    cfg: &EncoderConfig,
    rng: &mut R,
) -> Result<Encoded> {
    if operators.is_empty() {
        return Err(Error::Config("at least one meta-path is required".into()));
    }
    let projected = project_features(g, store, graph, cfg, rng)?;
    let target = graph.target_type();
    let h_target = projected[target];

    let mut type_embeddings = Vec::with_capacity(samples.len());
    let mut node_attention = Vec::with_capacity(samples.len());
    for sample in samples {
        let att = store.bind(g, &node_attention_name(graph, sample.ty))?;
        let (h, alpha) = encode_type_neighbors(g, h_target, projected[sample.ty], sample, att, cfg, rng)?;
        type_embeddings.push(h);
        node_attention.push(alpha);
    }
    let (w, b, a) = bind_fusion(g, store, "sc")?;
    let (z_sc, beta_types) = fuse_embeddings(g, &type_embeddings, w, b, a, cfg.dropout_attn, rng)?;

    let metapath_embeddings = operators
        .iter()
        .map(|op| propagate_metapath(g, h_target, op.clone()))
        .collect::<Result<Vec<_>>>()?;
    let (w, b, a) = bind_fusion(g, store, "mp")?;
    let (z_mp, beta_paths) = fuse_embeddings(g, &metapath_embeddings, w, b, a, cfg.dropout_attn, rng)?;

    Ok(Encoded {
        projected,
        type_embeddings,
        node_attention,
        z_sc,
        beta_types,
        metapath_embeddings,
        z_mp,
        beta_paths,
    })
}

fn node_attention_name(graph: &HeteroGraph, ty: usize) -> String {
    node_attention(&graph.types()[ty].name)
}

fn bind_fusion(g: &mut Graph, store: &ParamStore, view: &str) -> Result<(Var, Var, Var)> {
    Ok((
        store.bind(g, &format!("{view}.w"))?,
        store.bind(g, &format!("{view}.b"))?,
        store.bind(g, &format!("{view}.a"))?,
    ))
}

/// The entries of a `1 x K` attention row.
pub fn weights_of(g: &Graph, beta: Var) -> Vec<f64> {
    g.value(beta).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Mode;
    use crate::hin::{build_metapath_graph, MetaPathSpec, NodeType, RelationDecl};
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn eval_cfg(dim: usize) -> EncoderConfig {
        EncoderConfig { dim, dropout_feat: 0.0, dropout_attn: 0.0, leaky_slope: 0.01 }
    }

    #[test]
    fn projection_identity_and_zero() {
        let graph = HeteroGraph::new(
            vec![NodeType { name: "P".into(), count: 2 }, NodeType { name: "A".into(), count: 1 }],
            vec![RelationDecl { name: "pa".into(), src: 0, dst: 1, edges: vec![(0, 0), (1, 0)] }],
            vec![array![[0.5, 0.0], [0.0, 0.0]], array![[1.0]]],
            0,
        )
        .unwrap();
        let mut store = ParamStore::new();
        store.insert(projection_weight("P"), Array2::eye(2)).unwrap();
        store.insert_zeros(projection_bias("P"), 1, 2).unwrap();
        store.insert(projection_weight("A"), array![[1.0, 1.0]]).unwrap();
        store.insert_zeros(projection_bias("A"), 1, 2).unwrap();
        let mut g = Graph::new(Mode::Eval);
        let h = project_features(&mut g, &store, &graph, &eval_cfg(2), &mut rng()).unwrap();
        assert_eq!(g.value(h[0]), &array![[0.5, 0.0], [0.0, 0.0]]);

        let mut partial = ParamStore::new();
        partial.insert(projection_weight("P"), Array2::eye(2)).unwrap();
        partial.insert_zeros(projection_bias("P"), 1, 2).unwrap();
        let err = project_features(&mut g, &partial, &graph, &eval_cfg(2), &mut rng()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn projection_matches_direct_evaluation() {
        let w = array![[0.3, -1.2], [0.7, 0.4], [-0.5, 0.9]];
        let b = array![[0.1, -0.2]];
        let x = array![[1.0, -2.0, 0.5]];
        let graph = HeteroGraph::new(
            vec![NodeType { name: "P".into(), count: 1 }, NodeType { name: "A".into(), count: 1 }],
            vec![RelationDecl { name: "pa".into(), src: 0, dst: 1, edges: vec![(0, 0)] }],
            vec![x.clone(), array![[1.0]]],
            0,
        )
        .unwrap();
        let mut store = ParamStore::new();
        store.insert(projection_weight("P"), w.clone()).unwrap();
        store.insert(projection_bias("P"), b.clone()).unwrap();
        store.insert(projection_weight("A"), array![[1.0, 0.0]]).unwrap();
        store.insert_zeros(projection_bias("A"), 1, 2).unwrap();
        let mut g = Graph::new(Mode::Eval);
        let h = project_features(&mut g, &store, &graph, &eval_cfg(2), &mut rng()).unwrap();
        for c in 0..2 {
            let pre: f64 = (0..3).map(|k| x[[0, k]] * w[[k, c]]).sum::<f64>() + b[[0, c]];
            let expect = if pre > 0.0 { pre } else { pre.exp() - 1.0 };
            assert!((g.value(h[0])[[0, c]] - expect).abs() < 1e-15);
        }
    }

    fn attend(h_target: Array2<f64>, h_nb: Array2<f64>, ids: Vec<usize>, t: usize, a: Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut g = Graph::new(Mode::Eval);
        let ht = g.constant(h_target);
        let hn = g.constant(h_nb);
        let att = g.constant(a);
        let sample = TypeSample { ty: 1, per_node: t, ids };
        let (h, alpha) = encode_type_neighbors(&mut g, ht, hn, &sample, att, &eval_cfg(2), &mut rng()).unwrap();
        (g.value(h).clone(), g.value(alpha).clone())
    }

    #[test]
    fn identical_neighbors_split_attention_evenly() {
        let (_, alpha) = attend(
            array![[0.3, 0.1]],
            array![[1.0, 2.0], [1.0, 2.0]],
            vec![0, 1],
            2,
            array![[0.4], [-0.3], [0.2], [0.9]],
        );
        assert_eq!(alpha, array![[0.5, 0.5]]);
    }

    #[test]
    fn single_nonnegative_neighbor_passes_through() {
        let (h, alpha) = attend(array![[-5.0, 7.0]], array![[0.25, 1.5]], vec![0], 1, array![[1.0], [1.0], [1.0], [1.0]]);
        assert_eq!(alpha, array![[1.0]]);
        assert_eq!(h, array![[0.25, 1.5]]);
    }

    #[test]
    fn three_neighbor_attention_matches_scalar_oracle() {
        let hi = [0.2, -0.4];
        let hn = [[1.0, 0.5], [-0.3, 0.8], [0.6, -1.1]];
        // picks h_j[0] out of [h_i || h_j] so the logits differ per neighbor
        let a = [0.0, 0.0, 1.0, 0.0];
        let logits: Vec<f64> = hn
            .iter()
            .map(|h| {
                let raw = a[0] * hi[0] + a[1] * hi[1] + a[2] * h[0] + a[3] * h[1];
                if raw > 0.0 { raw } else { 0.01 * raw }
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let ex: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = ex.iter().sum();
        let alpha: Vec<f64> = ex.iter().map(|e| e / s).collect();
        let mut out = [0.0; 2];
        for (k, h) in hn.iter().enumerate() {
            out[0] += alpha[k] * h[0];
            out[1] += alpha[k] * h[1];
        }
        let out = out.map(|v| if v > 0.0 { v } else { v.exp() - 1.0 });

        let (h, al) = attend(
            array![[hi[0], hi[1]]],
            array![[1.0, 0.5], [-0.3, 0.8], [0.6, -1.1]],
            vec![0, 1, 2],
            3,
            array![[a[0]], [a[1]], [a[2]], [a[3]]],
        );
        for k in 0..3 {
            assert!((al[[0, k]] - alpha[k]).abs() < 1e-15);
        }
        for c in 0..2 {
            assert!((h[[0, c]] - out[c]).abs() < 1e-15);
        }
    }

    fn fuse(items: Vec<Array2<f64>>, w: Array2<f64>, b: Array2<f64>, a: Array2<f64>) -> (Array2<f64>, Vec<f64>) {
        let mut g = Graph::new(Mode::Eval);
        let vars: Vec<Var> = items.into_iter().map(|m| g.constant(m)).collect();
        let (w, b, a) = (g.constant(w), g.constant(b), g.constant(a));
        let (z, beta) = fuse_embeddings(&mut g, &vars, w, b, a, 0.0, &mut rng()).unwrap();
        (g.value(z).clone(), weights_of(&g, beta))
    }

    #[test]
    fn fusion_singleton_and_identical_items() {
        let h = array![[0.1, 0.2], [0.3, -0.4]];
        let w = array![[0.5, -0.1], [0.2, 0.3]];
        let (z, beta) = fuse(vec![h.clone()], w.clone(), array![[0.0, 0.1]], array![[1.0], [2.0]]);
        assert_eq!(beta, vec![1.0]);
        assert_eq!(z, h);
        let (_, beta) = fuse(vec![h.clone(), h.clone()], w, array![[0.0, 0.1]], array![[1.0], [2.0]]);
        assert_eq!(beta, vec![0.5, 0.5]);
    }

    #[test]
    fn fusion_matches_hand_computation() {
        let h1 = array![[0.1, 0.2], [0.3, -0.4]];
        let h2 = array![[-0.5, 0.6], [0.0, 0.9]];
        let w = array![[0.5, -0.1], [0.2, 0.3]];
        let b = array![[0.05, -0.02]];
        let a = array![[0.7], [-1.3]];
        let score = |h: &Array2<f64>| -> f64 {
            let mut total = 0.0;
            for i in 0..2 {
                for c in 0..2 {
                    let pre = h[[i, 0]] * w[[0, c]] + h[[i, 1]] * w[[1, c]] + b[[0, c]];
                    total += a[[c, 0]] * pre.tanh();
                }
            }
            total / 2.0
        };
        let (s1, s2) = (score(&h1), score(&h2));
        let b1 = 1.0 / (1.0 + (s2 - s1).exp());
        let (z, beta) = fuse(vec![h1.clone(), h2.clone()], w, b, a);
        assert!((beta[0] - b1).abs() < 1e-14 && (beta[1] - (1.0 - b1)).abs() < 1e-14);
        let expect = &h1 * b1 + &h2 * (1.0 - b1);
        for (x, y) in z.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    fn path_graph(edges: Vec<(usize, usize)>, n: usize) -> Arc<CsrMatrix> {
        // targets linked through one author per edge
        let mut pa = vec![];
        for (k, &(i, j)) in edges.iter().enumerate() {
            pa.push((i, k));
            pa.push((j, k));
        }
        let m = edges.len().max(1);
        let graph = HeteroGraph::new(
            vec![NodeType { name: "P".into(), count: n }, NodeType { name: "A".into(), count: m }],
            vec![RelationDecl { name: "pa".into(), src: 0, dst: 1, edges: pa }],
            vec![Array2::zeros((n, 1)), Array2::eye(m)],
            0,
        )
        .unwrap();
        let mpg = build_metapath_graph(&graph, &MetaPathSpec::parse("PAP", &graph).unwrap()).unwrap();
        Arc::new(mpg.normalized_operator())
    }

    fn propagate(op: Arc<CsrMatrix>, h: Array2<f64>) -> Array2<f64> {
        let mut g = Graph::new(Mode::Eval);
        let hv = g.constant(h);
        let out = propagate_metapath(&mut g, hv, op).unwrap();
        g.value(out).clone()
    }

    #[test]
    fn propagation_isolated_and_pair() {
        let h = array![[1.0, -2.0], [3.0, 0.5], [0.25, 0.75]];
        let out = propagate(path_graph(vec![(0, 1)], 3), h.clone());
        assert_eq!(out.row(2), h.row(2));

        let same = array![[0.4, -0.8], [0.4, -0.8]];
        let out = propagate(path_graph(vec![(0, 1)], 2), same.clone());
        for (x, y) in out.iter().zip(same.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn propagation_on_three_node_path() {
        let h = array![[1.0], [2.0], [4.0]];
        let out = propagate(path_graph(vec![(0, 1), (1, 2)], 3), h);
        // degrees 1, 2, 1
        let e0 = 1.0 / 2.0 + 2.0 / 6f64.sqrt();
        let e1 = 2.0 / 3.0 + 1.0 / 6f64.sqrt() + 4.0 / 6f64.sqrt();
        let e2 = 4.0 / 2.0 + 2.0 / 6f64.sqrt();
        for (k, e) in [e0, e1, e2].iter().enumerate() {
            assert!((out[[k, 0]] - e).abs() < 1e-14);
        }
    }
}
