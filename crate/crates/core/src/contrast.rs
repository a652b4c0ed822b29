//! Cross-view contrastive objective and the training loop.
//!
//! Both views go through one shared projection head; each anchor is scored
//! by cosine similarity against every node of the other view, with its own
//! cross-view embedding and its selected positives in the numerator.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{AdamConfig, Graph, Mode, ParamStore, Var};
use crate::data::EmbeddingMatrix;
use crate::encoders::{self, EncoderConfig};
use crate::error::{Error, Result};
use crate::extensions::mix_hard_negatives;
use crate::hin::{build_metapath_graph, sample_all, select_positives, HeteroGraph, MetaPathGraph, MetaPathSpec, PositiveSets, TypeSample};
use crate::sparse::CsrMatrix;

/// Offset mixed into the seed for the fixed evaluation-time neighbor sample.
const EVAL_SAMPLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hyperparameters of the contrastive model and its training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastConfig {
    pub dim: usize,
    pub tau: f64,
    pub lambda: f64,
    pub t_pos: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub patience: usize,
    pub max_epochs: usize,
    /// Set from the run seed; not part of the file format.
    #[serde(skip)]
    pub seed: u64,
    pub dropout_feat: f64,
    pub dropout_attn: f64,
    pub leaky_slope: f64,
    /// Neighbor sample size per schema type, keyed by type name.
    pub samples: BTreeMap<String, usize>,
    /// Sample size for neighbor types missing from `samples`.
    pub default_sample: usize,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        ContrastConfig {
            dim: 64,
            tau: 0.8,
            lambda: 0.5,
            t_pos: 5,
            lr: 0.0008,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patience: 5,
            max_epochs: 1000,
            seed: 0,
            dropout_feat: 0.3,
            dropout_attn: 0.5,
            leaky_slope: 0.01,
            samples: BTreeMap::new(),
            default_sample: 5,
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        check_lambda(self.lambda)?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.t_pos == 0 {
            return bad("t_pos must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("Adam betas must lie in [0, 1) and eps must be positive");
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return bad("patience and max_epochs must be at least 1");
        }
        for (name, rate) in [("dropout_feat", self.dropout_feat), ("dropout_attn", self.dropout_attn)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {rate}")));
            }
        }
        if self.default_sample == 0 || self.samples.values().any(|&t| t == 0) {
            return bad("neighbor sample sizes must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            dim: self.dim,
            dropout_feat: self.dropout_feat,
            dropout_attn: self.dropout_attn,
            leaky_slope: self.leaky_slope,
        }
    }

    /// Short hex digest of the canonical TOML form, used as provenance.
    pub fn fingerprint(&self) -> String {
        let text = format!("seed = {}\n{}", self.seed, toml::to_string(self).expect("config serializes"));
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")))
    }
}

/// Registers the shared projection head.
pub fn init_head_params<R: Rng + ?Sized>(store: &mut ParamStore, dim: usize, rng: &mut R) -> Result<()> {
    store.insert_glorot("head.w1", dim, dim, rng)?;
    store.insert_zeros("head.b1", 1, dim)?;
    store.insert_glorot("head.w2", dim, dim, rng)?;
    store.insert_zeros("head.b2", 1, dim)
}

/// `ELU(z W1 + b1) W2 + b2`.
pub fn project(g: &mut Graph, store: &ParamStore, z: Var) -> Result<Var> {
    let w1 = store.bind(g, "head.w1")?;
    let b1 = store.bind(g, "head.b1")?;
    let w2 = store.bind(g, "head.w2")?;
    let b2 = store.bind(g, "head.b2")?;
    let h = g.matmul(z, w1)?;
    let h = g.add_bias(h, b1)?;
    let h = g.elu(h);
    let h = g.matmul(h, w2)?;
    g.add_bias(h, b2)
}

/// Synthetic negatives appended to the denominator: row `r` of `vectors`
/// belongs to anchor `owners[r]`.
#[derive(Debug, Clone, Copy)]
pub struct ExtraNegatives<'a> {
    pub vectors: Var,
    pub owners: &'a [usize],
}

/// Dense `n x n` indicator of each node's positives, self included.
pub fn positive_mask(sets: &PositiveSets) -> Array2<f64> {
    let n = sets.len();
    let mut mask = Array2::zeros((n, n));
    for i in 0..n {
        for j in sets.with_self(i) {
            mask[[i, j]] = 1.0;
        }
    }
    mask
}

/// Per-anchor loss `-log(Σ_pos e / Σ_all e)` with `e = exp(cos/τ)`, as an
/// `n x 1` column. Candidates all come from `other`.
///
/// Similarities are shifted by `-1/τ` before exponentiating; the shift
/// cancels in the ratio and keeps every term at most 1.
pub fn contrastive_loss(
    g: &mut Graph,
    anchor: Var,
    other: Var,
    positives: &Array2<f64>,
    tau: f64,
    extra: Option<ExtraNegatives<'_>>,
) -> Result<Var> {
    check_tau(tau)?;
    let n = g.shape(anchor).0;
    let m = g.shape(other).0;
    if positives.dim() != (n, m) {
        return Err(Error::Shape { op: "contrastive_loss", left: (n, m), right: positives.dim() });
    }
    let sim = g.cosine_similarity(anchor, other)?;
    let scaled = g.affine(sim, 1.0 / tau, -1.0 / tau);
    let e = g.exp(scaled);
    let pos = g.mul_const(e, positives.clone())?;
    let num = g.row_sums(pos);
    let mut den = g.row_sums(e);
    if let Some(extra) = extra {
        let mass = extra_mass(g, anchor, extra, tau)?;
        den = g.add(den, mass)?;
    }
    let ln_den = g.log(den);
    let ln_num = g.log(num);
    g.sub(ln_den, ln_num)
}

fn extra_mass(g: &mut Graph, anchor: Var, extra: ExtraNegatives<'_>, tau: f64) -> Result<Var> {
    let n = g.shape(anchor).0;
    let count = g.shape(extra.vectors).0;
    if count != extra.owners.len() {
        return Err(Error::Shape { op: "extra_negatives", left: (count, 1), right: (extra.owners.len(), 1) });
    }
    let unit_anchor = g.normalize_rows(anchor);
    let rep = g.gather_rows(unit_anchor, extra.owners)?;
    let unit_extra = g.normalize_rows(extra.vectors);
    let prod = g.mul(rep, unit_extra)?;
    let sim = g.row_sums(prod);
    let scaled = g.affine(sim, 1.0 / tau, -1.0 / tau);
    let e = g.exp(scaled);
    let mut rows = vec![Vec::new(); n];
    for (r, &owner) in extra.owners.iter().enumerate() {
        rows[owner].push((r, 1.0));
    }
    g.spmm(Arc::new(CsrMatrix::from_rows(count, rows)), e)
}

/// `mean_i [λ L_sc_i + (1 - λ) L_mp_i]`.
pub fn total_loss(g: &mut Graph, l_sc: Var, l_mp: Var, lambda: f64) -> Result<Var> {
    check_lambda(lambda)?;
    let a = g.scale(l_sc, lambda);
    let b = g.scale(l_mp, 1.0 - lambda);
    let s = g.add(a, b)?;
    Ok(g.mean(s))
}

/// One row of the loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub phase: Option<&'static str>,
    pub j: f64,
    pub l_sc: f64,
    pub l_mp: f64,
}

/// One row of the attention trace; labels read `type:<name>` or
/// `metapath:<name>`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub epoch: usize,
    pub label: String,
    pub weight: f64,
}

pub fn format_loss_trace(records: &[LossRecord]) -> String {
    let phased = records.iter().any(|r| r.phase.is_some());
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("{}\t{}\t{}\t{}", r.epoch, r.j, r.l_sc, r.l_mp));
        if phased {
            out.push('\t');
            out.push_str(r.phase.unwrap_or("contrast"));
        }
        out.push('\n');
    }
    out
}

pub fn format_attention_trace(records: &[AttentionRecord]) -> String {
    records.iter().map(|r| format!("{}\t{}\t{}\n", r.epoch, r.label, r.weight)).collect()
}

/// Counter semantics: an epoch improves when its loss is strictly below
/// the best so far; training stops once `patience` consecutive epochs
/// fail to improve.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, bad: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad = 0;
            Verdict::Improved
        } else {
            self.bad += 1;
            if self.bad >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Extra negatives for one epoch, beyond the other view's nodes.
#[derive(Debug, Clone, Default)]
pub enum Negatives {
    #[default]
    None,
    /// Mix `k` hardest negatives per anchor and direction.
    Mix(usize),
    /// Pre-head fake embeddings; `sc` imitates meta-path embeddings for
    /// schema-view anchors and `mp` the reverse.
    Fakes { sc: FakeBatch, mp: FakeBatch },
}

#[derive(Debug, Clone, Default)]
pub struct FakeBatch {
    pub vectors: Array2<f64>,
    pub owners: Vec<usize>,
}

/// Result of one forward pass through both views and the objective.
#[derive(Debug, Clone)]
pub struct Objective {
    pub j: Var,
    pub l_sc: Var,
    pub l_mp: Var,
    pub z_sc: Var,
    pub z_mp: Var,
    pub beta_types: Var,
    pub beta_paths: Var,
}

/// Everything precomputed from the graph that stays fixed during training.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub graph: &'a HeteroGraph,
    pub metapaths: Vec<MetaPathGraph>,
    pub operators: Vec<Arc<CsrMatrix>>,
    pub positives: PositiveSets,
    pub mask: Array2<f64>,
    pub thresholds: Vec<usize>,
    pub config: ContrastConfig,
}

impl<'a> Problem<'a> {
    pub fn new(graph: &'a HeteroGraph, specs: &[MetaPathSpec], config: &ContrastConfig) -> Result<Self> {
        config.validate()?;
        if specs.is_empty() {
            return Err(Error::Config("at least one meta-path is required".into()));
        }
        let metapaths = specs
            .iter()
            .map(|s| build_metapath_graph(graph, s))
            .collect::<Result<Vec<_>>>()?;
        let operators = metapaths.iter().map(|m| Arc::new(m.normalized_operator())).collect();
        let positives = select_positives(&metapaths, config.t_pos)?;
        let mask = positive_mask(&positives);
        let names: Vec<&str> = graph.types().iter().map(|t| t.name.as_str()).collect();
        if let Some(unknown) = config.samples.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(Error::Config(format!("sample size given for unknown type {unknown:?}")));
        }
        let thresholds = graph
            .schema()
            .neighbor_types
            .iter()
            .map(|&ty| *config.samples.get(&graph.types()[ty].name).unwrap_or(&config.default_sample))
            .collect();
        Ok(Problem { graph, metapaths, operators, positives, mask, thresholds, config: config.clone() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<TypeSample>> {
        sample_all(self.graph, &self.thresholds, rng)
    }

    /// Fixed sample used whenever the model runs in evaluation mode.
    pub fn eval_sample(&self) -> Result<Vec<TypeSample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ EVAL_SAMPLE_SALT);
        self.sample(&mut rng)
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        encoders::init_encoder_params(&mut store, self.graph, self.config.dim, rng)?;
        init_head_params(&mut store, self.config.dim, rng)?;
        Ok(store)
    }

    pub fn type_labels(&self) -> Vec<String> {
        let g = self.graph;
        g.schema().neighbor_types.iter().map(|&t| format!("type:{}", g.types()[t].name)).collect()
    }

    pub fn metapath_labels(&self) -> Vec<String> {
        self.metapaths.iter().map(|m| format!("metapath:{}", m.spec().name)).collect()
    }

    /// Builds the full objective into `g`.
    pub fn objective<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        samples: &[TypeSample],
        negatives: &Negatives,
        rng: &mut R,
    ) -> Result<Objective> {
        let cfg = &self.config;
        let enc = encoders::encode(g, store, self.graph, samples, &self.operators, &cfg.encoder(), rng)?;
        let p_sc = project(g, store, enc.z_sc)?;
        let p_mp = project(g, store, enc.z_mp)?;

        let (l_sc, l_mp) = match negatives {
            Negatives::None => (
                contrastive_loss(g, p_sc, p_mp, &self.mask, cfg.tau, None)?,
                contrastive_loss(g, p_mp, p_sc, &self.mask, cfg.tau, None)?,
            ),
            Negatives::Mix(k) => {
                let (sc_vecs, sc_owners) = self.mixtures(g.value(p_sc), g.value(p_mp), *k, rng)?;
                let (mp_vecs, mp_owners) = self.mixtures(g.value(p_mp), g.value(p_sc), *k, rng)?;
                let sc_extra = g.constant(sc_vecs);
                let mp_extra = g.constant(mp_vecs);
                (
                    contrastive_loss(g, p_sc, p_mp, &self.mask, cfg.tau, Some(ExtraNegatives { vectors: sc_extra, owners: &sc_owners }))?,
                    contrastive_loss(g, p_mp, p_sc, &self.mask, cfg.tau, Some(ExtraNegatives { vectors: mp_extra, owners: &mp_owners }))?,
                )
            }
            Negatives::Fakes { sc, mp } => {
                let sc_raw = g.constant(sc.vectors.clone());
                let sc_proj = project(g, store, sc_raw)?;
                let mp_raw = g.constant(mp.vectors.clone());
                let mp_proj = project(g, store, mp_raw)?;
                (
                    contrastive_loss(g, p_sc, p_mp, &self.mask, cfg.tau, Some(ExtraNegatives { vectors: sc_proj, owners: &sc.owners }))?,
                    contrastive_loss(g, p_mp, p_sc, &self.mask, cfg.tau, Some(ExtraNegatives { vectors: mp_proj, owners: &mp.owners }))?,
                )
            }
        };
        let j = total_loss(g, l_sc, l_mp, cfg.lambda)?;
        Ok(Objective {
            j,
            l_sc,
            l_mp,
            z_sc: enc.z_sc,
            z_mp: enc.z_mp,
            beta_types: enc.beta_types,
            beta_paths: enc.beta_paths,
        })
    }

    /// Evaluation-mode forward with the fixed sample and no extra
    /// negatives.
    pub fn evaluate(&self, store: &ParamStore) -> Result<Evaluation> {
        let samples = self.eval_sample()?;
        let mut g = Graph::new(Mode::Eval);
        // dropout is off in evaluation mode, so this generator is never drawn from
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obj = self.objective(&mut g, store, &samples, &Negatives::None, &mut rng)?;
        let mut attention: Vec<(String, f64)> =
            self.type_labels().into_iter().zip(g.value(obj.beta_types).iter().copied()).collect();
        attention.extend(self.metapath_labels().into_iter().zip(g.value(obj.beta_paths).iter().copied()));
        Ok(Evaluation {
            objective: g.scalar(obj.j),
            z_mp: g.value(obj.z_mp).clone(),
            z_sc: g.value(obj.z_sc).clone(),
            attention,
        })
    }

    fn mixtures<R: Rng + ?Sized>(
        &self,
        anchors: &Array2<f64>,
        others: &Array2<f64>,
        k: usize,
        rng: &mut R,
    ) -> Result<(Array2<f64>, Vec<usize>)> {
        let d = others.ncols();
        let mut data = Vec::new();
        let mut owners = Vec::new();
        for i in 0..anchors.nrows() {
            let mixed = mix_hard_negatives(anchors.row(i), others, self.positives.negatives(i), k, rng)?;
            for m in mixed {
                data.extend(m.vector.iter());
                owners.push(i);
            }
        }
        let vectors = Array2::from_shape_vec((owners.len(), d), data).expect("row-major mixtures");
        Ok((vectors, owners))
    }
}

/// Stateful full-batch trainer over a [`Problem`].
pub struct Trainer<'a> {
    pub problem: Problem<'a>,
    pub store: ParamStore,
    pub rng: ChaCha8Rng,
    pub losses: Vec<LossRecord>,
    pub attention: Vec<AttentionRecord>,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(graph: &'a HeteroGraph, specs: &[MetaPathSpec], config: &ContrastConfig) -> Result<Self> {
        let problem = Problem::new(graph, specs, config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let store = problem.init_params(&mut rng)?;
        Ok(Trainer { problem, store, rng, losses: Vec::new(), attention: Vec::new(), epoch: 0 })
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    /// One optimizer step on the objective with freshly sampled neighbors.
    /// Returns the objective at the pre-step parameters.
    pub fn step(&mut self, negatives: &Negatives, phase: Option<&'static str>) -> Result<LossRecord> {
        self.epoch += 1;
        let samples = self.problem.sample(&mut self.rng)?;
        let mut g = Graph::new(Mode::Train);
        let obj = self.problem.objective(&mut g, &self.store, &samples, negatives, &mut self.rng)?;
        let record = LossRecord {
            epoch: self.epoch,
            phase,
            j: g.scalar(obj.j),
            l_sc: mean_of(&g, obj.l_sc),
            l_mp: mean_of(&g, obj.l_mp),
        };
        if !record.j.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite objective at epoch {} ({})",
                self.epoch,
                phase.unwrap_or("contrast")
            )));
        }
        let labels = self.problem.type_labels().into_iter().zip(g.value(obj.beta_types).iter());
        let paths = self.problem.metapath_labels().into_iter().zip(g.value(obj.beta_paths).iter());
        for (label, &weight) in labels.chain(paths) {
            self.attention.push(AttentionRecord { epoch: self.epoch, label, weight });
        }
        let grads = g.backward(obj.j)?;
        self.store.accumulate(&g, &grads);
        self.store.adam_step(&self.problem.config.adam())?;
        self.losses.push(record.clone());
        Ok(record)
    }

    /// Appends a trace row for a step taken outside [`Trainer::step`].
    pub fn record(&mut self, phase: &'static str, j: f64, l_sc: f64, l_mp: f64) -> Result<LossRecord> {
        self.epoch += 1;
        if !j.is_finite() {
            return Err(Error::Numeric(format!("non-finite {phase} loss at epoch {}", self.epoch)));
        }
        let record = LossRecord { epoch: self.epoch, phase: Some(phase), j, l_sc, l_mp };
        self.losses.push(record.clone());
        Ok(record)
    }

    /// Runs up to `max_epochs` steps with early stopping on the objective.
    /// Returns the parameters at the best epoch.
    pub fn run(&mut self, max_epochs: usize, negatives: &Negatives) -> Result<BestSnapshot> {
        let mut stopper = EarlyStopping::new(self.problem.config.patience);
        let mut best = self.store.values();
        for _ in 0..max_epochs {
            let before = self.store.values();
            let record = self.step(negatives, None)?;
            match stopper.observe(record.epoch, record.j) {
                Verdict::Improved => best = before,
                Verdict::Continue => {}
                Verdict::Stop => break,
            }
        }
        Ok(BestSnapshot { epoch: stopper.best_epoch(), objective: stopper.best(), values: best })
    }

    /// Evaluation-mode forward with the fixed sample and no extra
    /// negatives.
    pub fn evaluate(&self) -> Result<Evaluation> {
        self.problem.evaluate(&self.store)
    }

    pub fn finish(mut self, best: BestSnapshot) -> Result<TrainOutput> {
        self.store.load_values(&best.values)?;
        let eval = self.evaluate()?;
        if eval.z_mp.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite embeddings after training".into()));
        }
        let embeddings = EmbeddingMatrix {
            values: eval.z_mp,
            view: "mp".into(),
            epoch: best.epoch,
            config_hash: self.problem.config.fingerprint(),
        };
        Ok(TrainOutput {
            embeddings,
            params: self.store,
            losses: self.losses,
            attention: self.attention,
            final_attention: eval.attention,
            best_epoch: best.epoch,
            epochs_run: self.epoch,
        })
    }
}

fn mean_of(g: &Graph, v: Var) -> f64 {
    g.value(v).mean_axis(Axis(0)).map(|m| m[0]).unwrap_or(f64::NAN)
}

/// Parameter values at the best epoch seen by a run.
#[derive(Debug, Clone)]
pub struct BestSnapshot {
    pub epoch: usize,
    pub objective: f64,
    pub values: Vec<(String, Array2<f64>)>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub z_mp: Array2<f64>,
    pub z_sc: Array2<f64>,
    pub attention: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub embeddings: EmbeddingMatrix,
    pub params: ParamStore,
    pub losses: Vec<LossRecord>,
    pub attention: Vec<AttentionRecord>,
    /// Attention weights of the returned model in evaluation mode.
    pub final_attention: Vec<(String, f64)>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Plain training: early stopping on the objective, embeddings from the
/// meta-path view at the best epoch.
pub fn train(graph: &HeteroGraph, specs: &[MetaPathSpec], config: &ContrastConfig) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(graph, specs, config)?;
    let best = trainer.run(config.max_epochs, &Negatives::None)?;
    trainer.finish(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn loss_values(anchor: Array2<f64>, other: Array2<f64>, mask: Array2<f64>, tau: f64) -> Vec<f64> {
        let mut g = Graph::new(Mode::Eval);
        let a = g.constant(anchor);
        let o = g.constant(other);
        let l = contrastive_loss(&mut g, a, o, &mask, tau, None).unwrap();
        g.value(l).iter().copied().collect()
    }

    #[test]
    fn ln2_and_zero_negative_cases() {
        let l = loss_values(array![[1.0, 0.0], [0.0, 1.0]], array![[1.0, 1.0], [1.0, 1.0]], array![[1.0, 0.0], [0.0, 1.0]], 0.8);
        assert!((l[0] - 2f64.ln()).abs() < 1e-12);
        let l = loss_values(array![[1.0, 0.0], [0.3, 1.0]], array![[0.2, 1.0], [1.0, -0.5]], Array2::ones((2, 2)), 0.5);
        assert_eq!(l, vec![0.0, 0.0]);
    }

    #[test]
    fn three_candidate_scalar_oracle() {
        // unit vectors at the listed cosines to the anchor e1
        let cos = [0.9f64, 0.1, -0.2];
        let other = Array2::from_shape_fn((3, 2), |(k, c)| if c == 0 { cos[k] } else { (1.0 - cos[k] * cos[k]).sqrt() });
        let anchor = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let mut mask = Array2::zeros((3, 3));
        mask[[0, 0]] = 1.0;
        mask[[0, 1]] = 1.0;
        mask[[1, 1]] = 1.0;
        mask[[2, 2]] = 1.0;
        let tau = 0.5;
        let e: Vec<f64> = cos.iter().map(|c| (c / tau).exp()).collect();
        let expect = -((e[0] + e[1]) / (e[0] + e[1] + e[2])).ln();
        let l = loss_values(anchor, other, mask, tau);
        assert!((l[0] - expect).abs() < 1e-12, "{} vs {expect}", l[0]);
    }

    #[test]
    fn rejects_bad_tau_and_lambda() {
        let mut g = Graph::new(Mode::Eval);
        let a = g.constant(array![[1.0]]);
        assert!(matches!(contrastive_loss(&mut g, a, a, &array![[1.0]], 0.0, None), Err(Error::Config(_))));
        assert!(matches!(total_loss(&mut g, a, a, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn total_loss_weighted_mean() {
        let mut g = Graph::new(Mode::Eval);
        let sc = g.constant(array![[1.0], [2.0], [3.0]]);
        let mp = g.constant(array![[0.5], [0.0], [4.0]]);
        let j = total_loss(&mut g, sc, mp, 0.3).unwrap();
        let expect = (0.3 * 6.0 + 0.7 * 4.5) / 3.0;
        assert!((g.scalar(j) - expect).abs() < 1e-12);
        let j = total_loss(&mut g, sc, mp, 1.0).unwrap();
        assert!((g.scalar(j) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn projection_head_identity_and_oracle() {
        let mut store = ParamStore::new();
        store.insert("head.w1", Array2::eye(2)).unwrap();
        store.insert_zeros("head.b1", 1, 2).unwrap();
        store.insert("head.w2", Array2::eye(2)).unwrap();
        store.insert_zeros("head.b2", 1, 2).unwrap();
        let mut g = Graph::new(Mode::Eval);
        let z = g.constant(array![[0.3, 2.0]]);
        let p = project(&mut g, &store, z).unwrap();
        assert_eq!(g.value(p), &array![[0.3, 2.0]]);

        let w1 = array![[0.4, -0.7], [1.1, 0.2]];
        let b1 = array![[0.05, -0.3]];
        let w2 = array![[-0.6, 0.9], [0.3, 0.8]];
        let b2 = array![[0.1, 0.0]];
        *store.get_mut("head.w1").unwrap() = w1.clone();
        *store.get_mut("head.b1").unwrap() = b1.clone();
        *store.get_mut("head.w2").unwrap() = w2.clone();
        *store.get_mut("head.b2").unwrap() = b2.clone();
        let z = [0.5, -1.5];
        let elu = |v: f64| if v > 0.0 { v } else { v.exp() - 1.0 };
        let h: Vec<f64> = (0..2).map(|c| elu(z[0] * w1[[0, c]] + z[1] * w1[[1, c]] + b1[[0, c]])).collect();
        let expect: Vec<f64> = (0..2).map(|c| h[0] * w2[[0, c]] + h[1] * w2[[1, c]] + b2[[0, c]]).collect();
        let zv = g.constant(array![[z[0], z[1]]]);
        let p = project(&mut g, &store, zv).unwrap();
        for (c, e) in expect.iter().enumerate() {
            assert!((g.value(p)[[0, c]] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn early_stopping_counter() {
        let mut s = EarlyStopping::new(5);
        let mut stopped = None;
        for epoch in 1..=20 {
            if s.observe(epoch, epoch as f64) == Verdict::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(6));
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn table_defaults_accepted() {
        let cfg = ContrastConfig {
            lr: 0.0008,
            tau: 0.8,
            dropout_feat: 0.3,
            dropout_attn: 0.5,
            patience: 5,
            samples: [("A".to_string(), 7), ("S".to_string(), 1)].into_iter().collect(),
            ..ContrastConfig::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.samples["A"], 7);
        assert_eq!(cfg.fingerprint(), cfg.clone().fingerprint());
    }

    #[test]
    fn extra_negatives_add_mass() {
        let mut g = Graph::new(Mode::Eval);
        let a = g.constant(array![[1.0, 0.0], [0.0, 1.0]]);
        let o = g.constant(array![[1.0, 0.0], [0.0, 1.0]]);
        let extra = g.constant(array![[1.0, 0.0]]);
        let owners = [0usize];
        let mask = Array2::eye(2);
        let l = contrastive_loss(&mut g, a, o, &mask, 1.0, Some(ExtraNegatives { vectors: extra, owners: &owners })).unwrap();
        // anchor 0: e^1 / (e^1 + e^0 + e^1)
        let e = 1f64.exp();
        assert!((g.value(l)[[0, 0]] - ((2.0 * e + 1.0) / e).ln()).abs() < 1e-12);
        assert!((g.value(l)[[1, 0]] - ((e + 1.0) / e).ln()).abs() < 1e-12);
    }
}
