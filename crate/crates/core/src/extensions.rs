//! Harder negatives for the contrastive objective.
//!
//! Mixing: convex combinations of each anchor's hardest negatives join the
//! loss denominator. No parameters are added.
//!
//! Adversarial: a bilinear discriminator per view learns to tell real
//! cross-view positives from generated ones; a Gaussian generator centred
//! on the mapped anchor produces fakes that later serve as extra
//! negatives. Parameters live under the `gan.` prefix.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Graph, Mode, ParamStore, Var};
use crate::contrast::{BestSnapshot, ContrastConfig, EarlyStopping, FakeBatch, Negatives, TrainOutput, Trainer, Verdict};
use crate::error::{Error, Result};
use crate::hin::{HeteroGraph, MetaPathSpec, PositiveSets};

/// Floor applied inside the logarithms of the adversarial losses.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixConfig {
    pub k: usize,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig { k: 8 }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("mix k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One synthetic negative with the draws that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub a: usize,
    pub b: usize,
    pub m: f64,
    pub vector: Array1<f64>,
}

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt().max(1e-12);
    let nb = b.dot(&b).sqrt().max(1e-12);
    a.dot(&b) / (na * nb)
}

/// Ranks `negatives` by cosine similarity to `anchor` (ties by id), keeps
/// the top `min(k, |negatives|)` and emits `k` mixtures
/// `m·z_a + (1 - m)·z_b` of rows of `others`.
pub fn mix_hard_negatives<R: Rng + ?Sized>(
    anchor: ArrayView1<f64>,
    others: &Array2<f64>,
    negatives: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Mixture>> {
    if k == 0 {
        return Err(Error::Config("mix k must be at least 1".into()));
    }
    if negatives.is_empty() {
        return Ok(Vec::new());
    }
    let mut ranked: Vec<(usize, f64)> = negatives.iter().map(|&j| (j, cosine(anchor, others.row(j)))).collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let hard: Vec<usize> = ranked.iter().take(k).map(|&(j, _)| j).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let (a, b) = if hard.len() == 1 {
            (hard[0], hard[0])
        } else {
            let pair = index::sample(rng, hard.len(), 2);
            (hard[pair.index(0)], hard[pair.index(1)])
        };
        let m: f64 = rng.random();
        let vector = &others.row(a) * m + &others.row(b) * (1.0 - m);
        out.push(Mixture { a, b, m, vector });
    }
    Ok(out)
}

/// Plain training with `k` mixed hard negatives per anchor and direction.
pub fn train_mixing(
    graph: &HeteroGraph,
    specs: &[MetaPathSpec],
    config: &ContrastConfig,
    mix: &MixConfig,
) -> Result<TrainOutput> {
    mix.validate()?;
    let mut trainer = Trainer::new(graph, specs, config)?;
    let best = trainer.run(config.max_epochs, &Negatives::Mix(mix.k))?;
    trainer.finish(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub sigma2: f64,
    pub k0: usize,
    pub k_d: usize,
    pub k_g: usize,
    pub i_dg: usize,
    pub k_h: usize,
    /// Cap on the per-anchor positive subset, and so on fakes per anchor.
    pub positive_subset: usize,
    /// Anchors per discriminator/generator step; 0 means all target nodes.
    pub batch: usize,
    pub lr: f64,
    /// Outer iterations of (alternation, contrastive phase) at most.
    pub max_outer: usize,
    /// Outer iterations without improvement before stopping.
    pub outer_patience: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            sigma2: 1.0,
            k0: 50,
            k_d: 5,
            k_g: 5,
            i_dg: 3,
            k_h: 20,
            positive_subset: 4,
            batch: 0,
            lr: 0.001,
            max_outer: 10,
            outer_patience: 2,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k0", self.k0),
            ("k_d", self.k_d),
            ("k_g", self.k_g),
            ("i_dg", self.i_dg),
            ("k_h", self.k_h),
            ("positive_subset", self.positive_subset),
            ("max_outer", self.max_outer),
            ("outer_patience", self.outer_patience),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("gan {name} must be at least 1")));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!("gan sigma2 must be non-negative, got {}", self.sigma2)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("gan lr must be positive".into()));
        }
        Ok(())
    }
}

/// Which embeddings a discriminator/generator pair deals in. `Mp` judges
/// meta-path embeddings against schema-view anchors; `Sc` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanView {
    Mp,
    Sc,
}

impl GanView {
    fn tag(self) -> &'static str {
        match self {
            GanView::Mp => "mp",
            GanView::Sc => "sc",
        }
    }

    pub fn discriminator(self) -> String {
        format!("gan.d.{}", self.tag())
    }

    pub fn generator(self) -> String {
        format!("gan.g.{}", self.tag())
    }
}

pub const GENERATOR_W: &str = "gan.g.w";
pub const GENERATOR_B: &str = "gan.g.b";

pub fn init_gan_params<R: Rng + ?Sized>(store: &mut ParamStore, dim: usize, rng: &mut R) -> Result<()> {
    for view in [GanView::Mp, GanView::Sc] {
        store.insert_glorot(view.discriminator(), dim, dim, rng)?;
        store.insert_glorot(view.generator(), dim, dim, rng)?;
    }
    store.insert_glorot(GENERATOR_W, dim, dim, rng)?;
    store.insert_zeros(GENERATOR_B, 1, dim)
}

/// `σ(anchor · M · candidate)`.
pub fn discriminate(anchor: ArrayView1<f64>, candidate: ArrayView1<f64>, m: &Array2<f64>) -> Result<f64> {
    if m.dim() != (anchor.len(), candidate.len()) {
        return Err(Error::Shape { op: "discriminate", left: (anchor.len(), candidate.len()), right: m.dim() });
    }
    Ok(crate::autodiff::sigmoid(anchor.dot(&m.dot(&candidate))))
}

/// `ELU((anchor · M_G + σ ε) · W + b)` with `ε` standard normal.
pub fn generate_fake<R: Rng + ?Sized>(
    anchor: ArrayView1<f64>,
    m_g: &Array2<f64>,
    w: &Array2<f64>,
    b: ArrayView1<f64>,
    sigma2: f64,
    rng: &mut R,
) -> Result<Array1<f64>> {
    if m_g.nrows() != anchor.len() || w.nrows() != m_g.ncols() || w.ncols() != b.len() {
        return Err(Error::Shape { op: "generate_fake", left: m_g.dim(), right: w.dim() });
    }
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(Error::Config(format!("sigma2 must be non-negative, got {sigma2}")));
    }
    let sigma = sigma2.sqrt();
    let mean = anchor.dot(m_g);
    let e = mean.mapv(|mu| {
        let eps: f64 = StandardNormal.sample(rng);
        mu + sigma * eps
    });
    Ok((e.dot(w) + b).mapv(|v| if v > 0.0 { v } else { v.exp_m1() }))
}

/// Pairs for one view: row `r` pairs anchor embedding `anchors[r]` with a
/// real positive `positives[r]` and with one fake drawn from noise
/// `noise[r]`; `weights[r]` carries the per-anchor averaging and batch
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBatch {
    pub anchors: Array2<f64>,
    pub positives: Array2<f64>,
    pub noise: Array2<f64>,
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanBatch {
    /// Schema-view anchors, meta-path candidates.
    pub mp: ViewBatch,
    /// Meta-path anchors, schema-view candidates.
    pub sc: ViewBatch,
    pub sigma2: f64,
}

impl GanBatch {
    fn view(&self, v: GanView) -> &ViewBatch {
        match v {
            GanView::Mp => &self.mp,
            GanView::Sc => &self.sc,
        }
    }
}

/// Draws a uniform positive subset of size `min(cap, |P_i|)` per anchor in
/// `batch` (self included in `P_i`) plus Gaussian noise for as many fakes.
#[allow(clippy::too_many_arguments)]
pub fn build_gan_batch<R: Rng + ?Sized>(
    z_sc: &Array2<f64>,
    z_mp: &Array2<f64>,
    positives: &PositiveSets,
    batch: &[usize],
    cap: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<GanBatch> {
    if batch.is_empty() {
        return Err(Error::Structural("empty adversarial batch".into()));
    }
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for &i in batch {
        let pool = positives.with_self(i);
        let c = cap.min(pool.len());
        if c == 0 {
            return Err(Error::Structural(format!("node {i} has no positives to sample")));
        }
        let w = 1.0 / (2.0 * batch.len() as f64 * c as f64);
        for k in index::sample(rng, pool.len(), c) {
            pairs.push((i, pool[k], w));
        }
    }
    let mut make = |anchor_src: &Array2<f64>, cand_src: &Array2<f64>| {
        let d = anchor_src.ncols();
        let p = pairs.len();
        let anchors = Array2::from_shape_fn((p, d), |(r, c)| anchor_src[[pairs[r].0, c]]);
        let cands = Array2::from_shape_fn((p, d), |(r, c)| cand_src[[pairs[r].1, c]]);
        let noise = Array2::from_shape_simple_fn((p, cand_src.ncols()), || StandardNormal.sample(rng));
        let weights = Array2::from_shape_fn((p, 1), |(r, _)| pairs[r].2);
        ViewBatch { anchors, positives: cands, noise, weights }
    };
    let mp = make(z_sc, z_mp);
    let sc = make(z_mp, z_sc);
    Ok(GanBatch { mp, sc, sigma2 })
}

fn bind(g: &mut Graph, store: &ParamStore, name: &str, trainable: bool) -> Result<Var> {
    if trainable {
        store.bind(g, name)
    } else {
        store.bind_frozen(g, name)
    }
}

/// Fakes for one view from constant anchors and noise.
fn fakes(g: &mut Graph, store: &ParamStore, view: GanView, batch: &ViewBatch, sigma2: f64, trainable: bool) -> Result<Var> {
    let m = bind(g, store, &view.generator(), trainable)?;
    let w = bind(g, store, GENERATOR_W, trainable)?;
    let b = bind(g, store, GENERATOR_B, trainable)?;
    let anchors = g.constant(batch.anchors.clone());
    let noise = g.constant(batch.noise.clone() * sigma2.sqrt());
    let mean = g.matmul(anchors, m)?;
    let e = g.add(mean, noise)?;
    let h = g.matmul(e, w)?;
    let h = g.add_bias(h, b)?;
    Ok(g.elu(h))
}

/// Row-wise `D(candidate | anchor)` as an `r x 1` column.
fn scores(g: &mut Graph, anchors: Var, m: Var, candidates: Var) -> Result<Var> {
    let left = g.matmul(anchors, m)?;
    let prod = g.mul(left, candidates)?;
    let logits = g.row_sums(prod);
    Ok(g.sigmoid(logits))
}

fn neg_log(g: &mut Graph, p: Var) -> Var {
    let l = g.log_clamped(p, LOG_FLOOR);
    g.scale(l, -1.0)
}

fn neg_log_complement(g: &mut Graph, p: Var) -> Var {
    let q = g.affine(p, -1.0, 1.0);
    neg_log(g, q)
}

fn weighted(g: &mut Graph, terms: Var, weights: &Array2<f64>) -> Result<Var> {
    let w = g.mul_const(terms, weights.clone())?;
    Ok(g.sum(w))
}

/// Discriminator objective over both views; the generator is frozen.
/// Returns `(total, mp part, sc part)`.
pub fn discriminator_loss(g: &mut Graph, store: &ParamStore, batch: &GanBatch) -> Result<(Var, Var, Var)> {
    let mut parts = Vec::with_capacity(2);
    for view in [GanView::Mp, GanView::Sc] {
        let vb = batch.view(view);
        let m = store.bind(g, &view.discriminator())?;
        let anchors = g.constant(vb.anchors.clone());
        let real = g.constant(vb.positives.clone());
        let fake = fakes(g, store, view, vb, batch.sigma2, false)?;
        let d_real = scores(g, anchors, m, real)?;
        let d_fake = scores(g, anchors, m, fake)?;
        let t_real = neg_log(g, d_real);
        let t_fake = neg_log_complement(g, d_fake);
        let terms = g.add(t_real, t_fake)?;
        parts.push(weighted(g, terms, &vb.weights)?);
    }
    let total = g.add(parts[0], parts[1])?;
    Ok((total, parts[0], parts[1]))
}

/// Generator objective over both views; the discriminator is frozen.
/// Returns `(total, mp part, sc part)`.
pub fn generator_loss(g: &mut Graph, store: &ParamStore, batch: &GanBatch) -> Result<(Var, Var, Var)> {
    let mut parts = Vec::with_capacity(2);
    for view in [GanView::Mp, GanView::Sc] {
        let vb = batch.view(view);
        let m = store.bind_frozen(g, &view.discriminator())?;
        let anchors = g.constant(vb.anchors.clone());
        let fake = fakes(g, store, view, vb, batch.sigma2, true)?;
        let d_fake = scores(g, anchors, m, fake)?;
        let terms = neg_log(g, d_fake);
        parts.push(weighted(g, terms, &vb.weights)?);
    }
    let total = g.add(parts[0], parts[1])?;
    Ok((total, parts[0], parts[1]))
}

/// Extra negatives for one contrastive epoch: per anchor as many fakes as
/// its positive subset, in both directions, from the current embeddings.
fn generator_fakes<R: Rng + ?Sized>(
    store: &ParamStore,
    z_sc: &Array2<f64>,
    z_mp: &Array2<f64>,
    positives: &PositiveSets,
    cap: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<Negatives> {
    let all: Vec<usize> = (0..z_sc.nrows()).collect();
    let batch = build_gan_batch(z_sc, z_mp, positives, &all, cap, sigma2, rng)?;
    let owners: Vec<usize> = all
        .iter()
        .flat_map(|&i| std::iter::repeat_n(i, cap.min(positives.with_self(i).len())))
        .collect();
    let make = |view: GanView| -> Result<FakeBatch> {
        let mut g = Graph::new(Mode::Eval);
        let f = fakes(&mut g, store, view, batch.view(view), sigma2, false)?;
        Ok(FakeBatch { vectors: g.value(f).clone(), owners: owners.clone() })
    };
    Ok(Negatives::Fakes { sc: make(GanView::Mp)?, mp: make(GanView::Sc)? })
}

/// Result of adversarial training plus the objective values that frame it.
#[derive(Debug, Clone)]
pub struct GanOutput {
    pub output: TrainOutput,
    /// Evaluation-mode objective right after warm-up.
    pub warmup_objective: f64,
    /// Evaluation-mode objective after the last outer iteration.
    pub final_objective: f64,
    /// Evaluation-mode objective of the returned parameters.
    pub best_objective: f64,
    /// Outer iteration the returned parameters come from; 0 is warm-up.
    pub best_outer: usize,
    pub outer_iterations: usize,
}

fn batch_ids<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Vec<usize> {
    if size == 0 || size >= n {
        (0..n).collect()
    } else {
        let mut ids = index::sample(rng, n, size).into_vec();
        ids.sort_unstable();
        ids
    }
}

/// Warm-up, then outer iterations of (`i_dg` rounds of discriminator and
/// generator training, `k_h` contrastive epochs with generated negatives),
/// stopped early on the evaluation-mode objective.
pub fn train_gan(
    graph: &HeteroGraph,
    specs: &[MetaPathSpec],
    config: &ContrastConfig,
    gan: &GanConfig,
) -> Result<GanOutput> {
    gan.validate()?;
    let mut trainer = Trainer::new(graph, specs, config)?;
    init_gan_params(&mut trainer.store, config.dim, &mut trainer.rng)?;
    let adam = AdamConfig { lr: gan.lr, ..config.adam() };

    for _ in 0..gan.k0 {
        trainer.step(&Negatives::None, Some("warmup"))?;
    }
    let warmup_objective = trainer.evaluate()?.objective;
    let mut stopper = EarlyStopping::new(gan.outer_patience);
    stopper.observe(0, warmup_objective);
    let mut best = trainer.store.values();
    let mut best_epoch = trainer.epochs_run();
    let mut final_objective = warmup_objective;
    let mut outer_iterations = 0;

    for outer in 1..=gan.max_outer {
        outer_iterations = outer;
        for _ in 0..gan.i_dg {
            let eval = trainer.evaluate()?;
            let n = eval.z_mp.nrows();
            for (phase, count) in [("disc", gan.k_d), ("gen", gan.k_g)] {
                for _ in 0..count {
                    let ids = batch_ids(n, gan.batch, &mut trainer.rng);
                    let batch = build_gan_batch(
                        &eval.z_sc,
                        &eval.z_mp,
                        &trainer.problem.positives,
                        &ids,
                        gan.positive_subset,
                        gan.sigma2,
                        &mut trainer.rng,
                    )?;
                    let mut g = Graph::new(Mode::Train);
                    let (total, mp, sc) = if phase == "disc" {
                        discriminator_loss(&mut g, &trainer.store, &batch)?
                    } else {
                        generator_loss(&mut g, &trainer.store, &batch)?
                    };
                    trainer.record(phase, g.scalar(total), g.scalar(sc), g.scalar(mp))?;
                    let grads = g.backward(total)?;
                    trainer.store.accumulate(&g, &grads);
                    trainer.store.adam_step(&adam)?;
                }
            }
        }
        for _ in 0..gan.k_h {
            let eval = trainer.evaluate()?;
            let negatives = generator_fakes(
                &trainer.store,
                &eval.z_sc,
                &eval.z_mp,
                &trainer.problem.positives,
                gan.positive_subset,
                gan.sigma2,
                &mut trainer.rng,
            )?;
            trainer.step(&negatives, Some("contrast"))?;
        }
        final_objective = trainer.evaluate()?.objective;
        if !final_objective.is_finite() {
            return Err(Error::Numeric(format!("non-finite objective after outer iteration {outer}")));
        }
        match stopper.observe(outer, final_objective) {
            Verdict::Improved => {
                best = trainer.store.values();
                best_epoch = trainer.epochs_run();
            }
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    let best_objective = stopper.best();
    let best_outer = stopper.best_epoch();
    let output = trainer.finish(BestSnapshot { epoch: best_epoch, objective: best_objective, values: best })?;
    Ok(GanOutput { output, warmup_objective, final_objective, best_objective, best_outer, outer_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_hard_negative_repeats() {
        let others = array![[1.0, 2.0], [3.0, -1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mixed = mix_hard_negatives(array![1.0, 0.0].view(), &others, &[1], 3, &mut rng).unwrap();
        assert_eq!(mixed.len(), 3);
        for m in mixed {
            assert_eq!((m.a, m.b), (1, 1));
            for (x, y) in m.vector.iter().zip(others.row(1).iter()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_negatives_emit_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let others = array![[1.0]];
        assert!(mix_hard_negatives(array![1.0].view(), &others, &[], 4, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn mixtures_replay_and_hardest_selection() {
        // cosine to e1: row 0 = 1.0, row 1 ~ 0.707, row 2 = -1.0
        let others = array![[2.0, 0.0], [1.0, 1.0], [-1.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mixed = mix_hard_negatives(array![1.0, 0.0].view(), &others, &[0, 1, 2], 2, &mut rng).unwrap();
        assert_eq!(mixed.len(), 2);
        for m in &mixed {
            assert!([0, 1].contains(&m.a) && [0, 1].contains(&m.b) && m.a != m.b);
            assert!((0.0..1.0).contains(&m.m));
            for c in 0..2 {
                let expect = m.m * others[[m.a, c]] + (1.0 - m.m) * others[[m.b, c]];
                assert!((m.vector[c] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn discriminator_values() {
        let z = array![1.0, 3.0];
        let eye = Array2::eye(2);
        assert!((discriminate(z.view(), z.view(), &eye).unwrap() - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
        assert!((discriminate(z.view(), z.view(), &eye).unwrap() - 0.9999546).abs() < 1e-7);
        assert_eq!(discriminate(array![1.0, 0.0].view(), array![0.0, 1.0].view(), &eye).unwrap(), 0.5);
        assert!(discriminate(z.view(), z.view(), &Array2::eye(3)).is_err());
    }

    #[test]
    fn noiseless_generator_is_identity() {
        let eye = Array2::eye(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = array![0.5, 2.0];
        let fake = generate_fake(z.view(), &eye, &eye, array![0.0, 0.0].view(), 0.0, &mut rng).unwrap();
        assert_eq!(fake, z);
    }

    #[test]
    fn generator_noise_centred_on_mapped_anchor() {
        // W = I with a large bias keeps ELU in its identity regime
        let m_g = array![[0.5, -0.2], [0.1, 0.3]];
        let z = array![1.0, -2.0];
        let bias = array![100.0, 100.0];
        let mean = z.dot(&m_g);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000;
        let mut sum = Array1::<f64>::zeros(2);
        for _ in 0..draws {
            sum += &generate_fake(z.view(), &m_g, &Array2::eye(2), bias.view(), 1.0, &mut rng).unwrap();
        }
        let se = 1.0 / (draws as f64).sqrt();
        for c in 0..2 {
            let avg = sum[c] / draws as f64 - 100.0;
            assert!((avg - mean[c]).abs() < 5.0 * se, "{avg} vs {}", mean[c]);
        }
    }

    fn zero_store(dim: usize) -> ParamStore {
        let mut store = ParamStore::new();
        for view in [GanView::Mp, GanView::Sc] {
            store.insert_zeros(view.discriminator(), dim, dim).unwrap();
            store.insert_zeros(view.generator(), dim, dim).unwrap();
        }
        store.insert_zeros(GENERATOR_W, dim, dim).unwrap();
        store.insert_zeros(GENERATOR_B, 1, dim).unwrap();
        store
    }

    fn one_pair_batch(weight: f64) -> GanBatch {
        let vb = ViewBatch {
            anchors: array![[1.0, 0.5]],
            positives: array![[0.2, -0.3]],
            noise: array![[0.1, 0.4]],
            weights: array![[weight]],
        };
        GanBatch { mp: vb.clone(), sc: vb, sigma2: 1.0 }
    }

    #[test]
    fn uninformative_discriminator_losses() {
        let store = zero_store(2);
        let batch = one_pair_batch(0.5);
        let mut g = Graph::new(Mode::Eval);
        let (_, mp, _) = discriminator_loss(&mut g, &store, &batch).unwrap();
        // per-anchor term 2 ln 2, weighted by 1/2
        assert!((g.scalar(mp) * 2.0 - 2.0 * 2f64.ln()).abs() < 1e-12);
        let (total, _, _) = generator_loss(&mut g, &store, &batch).unwrap();
        assert!((g.scalar(total) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn adversarial_losses_match_scalar_oracle() {
        let mut store = zero_store(2);
        *store.get_mut("gan.d.mp").unwrap() = array![[0.8, -0.1], [0.3, 0.5]];
        *store.get_mut("gan.d.sc").unwrap() = array![[-0.4, 0.2], [0.6, 0.1]];
        *store.get_mut("gan.g.mp").unwrap() = array![[0.9, 0.2], [-0.3, 0.7]];
        *store.get_mut("gan.g.sc").unwrap() = array![[0.1, -0.5], [0.4, 0.3]];
        *store.get_mut(GENERATOR_W).unwrap() = array![[1.2, 0.1], [-0.2, 0.6]];
        *store.get_mut(GENERATOR_B).unwrap() = array![[0.05, -0.1]];
        let vb = ViewBatch {
            anchors: array![[1.0, 0.5], [-0.3, 0.8]],
            positives: array![[0.2, -0.3], [0.7, 0.1]],
            noise: array![[0.1, 0.4], [-1.0, 0.2]],
            weights: array![[0.25], [0.25]],
        };
        let batch = GanBatch { mp: vb.clone(), sc: vb.clone(), sigma2: 0.25 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d_expect = 0.0;
        let mut g_expect = 0.0;
        for view in [GanView::Mp, GanView::Sc] {
            let m_d = store.get(&view.discriminator()).unwrap().clone();
            let m_g = store.get(&view.generator()).unwrap().clone();
            for r in 0..2 {
                // replay the generator with the stored noise through the sigma = 0 path
                let mean = vb.anchors.row(r).dot(&m_g) + &vb.noise.row(r) * 0.5;
                let w = store.get(GENERATOR_W).unwrap();
                let b = store.get(GENERATOR_B).unwrap().row(0).to_owned();
                let fake = generate_fake(mean.view(), &Array2::eye(2), w, b.view(), 0.0, &mut rng).unwrap();
                let d_real = discriminate(vb.anchors.row(r), vb.positives.row(r), &m_d).unwrap();
                let d_fake = discriminate(vb.anchors.row(r), fake.view(), &m_d).unwrap();
                d_expect += 0.25 * (-d_real.ln() - (1.0 - d_fake).ln());
                g_expect += 0.25 * -d_fake.ln();
            }
        }
        let mut g = Graph::new(Mode::Eval);
        let (d, _, _) = discriminator_loss(&mut g, &store, &batch).unwrap();
        let (gl, _, _) = generator_loss(&mut g, &store, &batch).unwrap();
        assert!((g.scalar(d) - d_expect).abs() < 1e-12);
        assert!((g.scalar(gl) - g_expect).abs() < 1e-12);
    }

    #[test]
    fn gan_config_validation() {
        GanConfig::default().validate().unwrap();
        assert!(GanConfig { k_h: 0, ..GanConfig::default() }.validate().is_err());
        assert!(GanConfig { sigma2: -1.0, ..GanConfig::default() }.validate().is_err());
        assert!(MixConfig { k: 0 }.validate().is_err());
    }
}
