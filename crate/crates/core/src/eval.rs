//! Downstream evaluation of frozen embeddings: a linear probe scored by
//! Macro-F1, Micro-F1 and macro one-vs-rest AUC, and k-means scored by
//! NMI and ARI.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Graph, Mode, ParamStore};
use crate::error::{Error, Result};

/// Train/validation/test node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub per_class: usize,
}

pub fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// `per_class` training nodes from every class, then `val_size` and
/// `test_size` nodes from the shuffled remainder. A size of 0 means half
/// of whatever remains after training selection.
pub fn make_split(labels: &[usize], per_class: usize, val_size: usize, test_size: usize, seed: u64) -> Result<Split> {
    if per_class == 0 {
        return Err(Error::Config("labels per class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for (c, mut ids) in by_class {
        if ids.len() < per_class {
            return Err(Error::Input(format!("class {c} has {} nodes, fewer than {per_class}", ids.len())));
        }
        ids.shuffle(&mut rng);
        train.extend_from_slice(&ids[..per_class]);
        rest.extend_from_slice(&ids[per_class..]);
    }
    rest.shuffle(&mut rng);
    let val_size = if val_size == 0 { rest.len() / 2 } else { val_size };
    let test_size = if test_size == 0 { rest.len() - val_size.min(rest.len()) } else { test_size };
    if val_size + test_size > rest.len() {
        return Err(Error::Input(format!(
            "validation ({val_size}) plus test ({test_size}) exceed the {} unlabeled nodes",
            rest.len()
        )));
    }
    let val = rest[..val_size].to_vec();
    let test = rest[val_size..val_size + test_size].to_vec();
    train.sort_unstable();
    Ok(Split { train, val, test, per_class })
}

/// The labels the probe may see: training and validation only.
#[derive(Debug, Clone)]
pub struct ProbeLabels {
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub classes: usize,
}

impl ProbeLabels {
    pub fn new(split: &Split, labels: &[usize]) -> Self {
        let pick = |ids: &[usize]| ids.iter().map(|&i| (i, labels[i])).collect();
        ProbeLabels { train: pick(&split.train), val: pick(&split.val), classes: class_count(labels) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Set per repeat by the evaluation driver.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { epochs: 200, lr: 0.01, seed: 0 }
    }
}

/// Multinomial logistic regression `softmax(x W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub w: Array2<f64>,
    pub b: Array2<f64>,
}

impl LinearProbe {
    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut logits = x.dot(&self.w) + &self.b;
        for mut row in logits.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let s = row.sum();
            row /= s;
        }
        logits
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.probabilities(x).rows().into_iter().map(argmax).collect()
    }
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn rows(x: &Array2<f64>, ids: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), ids)
}

/// Full-batch cross-entropy with Adam; keeps the weights of the epoch with
/// the best validation Micro-F1 (the latest such epoch on ties).
pub fn train_linear_probe(embeddings: &Array2<f64>, labels: &ProbeLabels, cfg: &ProbeConfig) -> Result<LinearProbe> {
    if labels.train.is_empty() {
        return Err(Error::Input("empty training split".into()));
    }
    let mut present = vec![false; labels.classes];
    for &(_, c) in &labels.train {
        present[c] = true;
    }
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(Error::Input(format!("class {c} is absent from the training split")));
    }
    let (train_ids, train_y): (Vec<usize>, Vec<usize>) = labels.train.iter().copied().unzip();
    let (val_ids, val_y): (Vec<usize>, Vec<usize>) = labels.val.iter().copied().unzip();
    let x_train = rows(embeddings, &train_ids);
    let x_val = rows(embeddings, &val_ids);
    let mut onehot = Array2::zeros((train_y.len(), labels.classes));
    for (r, &c) in train_y.iter().enumerate() {
        onehot[[r, c]] = 1.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    store.insert_glorot("probe.w", embeddings.ncols(), labels.classes, &mut rng)?;
    store.insert_zeros("probe.b", 1, labels.classes)?;
    let adam = AdamConfig::with_lr(cfg.lr);
    let snapshot = |s: &ParamStore| -> Result<LinearProbe> {
        Ok(LinearProbe { w: s.get("probe.w")?.clone(), b: s.get("probe.b")?.clone() })
    };
    let mut best = snapshot(&store)?;
    let mut best_score = f64::NEG_INFINITY;
    for _ in 0..cfg.epochs {
        let mut g = Graph::new(Mode::Train);
        let w = store.bind(&mut g, "probe.w")?;
        let b = store.bind(&mut g, "probe.b")?;
        let x = g.constant(x_train.clone());
        let logits = g.matmul(x, w)?;
        let logits = g.add_bias(logits, b)?;
        let p = g.row_softmax(logits);
        let picked = g.mul_const(p, onehot.clone())?;
        let picked = g.row_sums(picked);
        let ll = g.log_clamped(picked, 1e-300);
        let mean = g.mean(ll);
        let loss = g.scale(mean, -1.0);
        let grads = g.backward(loss)?;
        store.accumulate(&g, &grads);
        store.adam_step(&adam)?;

        let current = snapshot(&store)?;
        let score = if val_ids.is_empty() {
            0.0
        } else {
            let pred = current.predict(&x_val);
            pred.iter().zip(&val_y).filter(|(p, y)| p == y).count() as f64 / val_y.len() as f64
        };
        if score >= best_score {
            best_score = score;
            best = current;
        }
    }
    Ok(best)
}

/// `(macro_f1, micro_f1, auc)`; AUC is one-vs-rest, macro-averaged over
/// classes that have both positive and negative examples.
pub fn classification_metrics(predictions: &[usize], scores: &Array2<f64>, labels: &[usize]) -> Result<(f64, f64, f64)> {
    if predictions.len() != labels.len() || scores.nrows() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions and {} score rows for {} labels",
            predictions.len(),
            scores.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Input("no samples to score".into()));
    }
    let classes = scores.ncols().max(class_count(labels)).max(class_count(predictions));
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p == y {
            tp[y] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let mut f1s = Vec::new();
    for c in 0..classes {
        if tp[c] + fp[c] + fn_[c] == 0 {
            continue;
        }
        f1s.push(2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64);
    }
    let macro_f1 = f1s.iter().sum::<f64>() / f1s.len() as f64;
    let (t, f, n): (usize, usize, usize) = (tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let micro_f1 = 2.0 * t as f64 / (2 * t + f + n) as f64;

    let mut aucs = Vec::new();
    for c in 0..scores.ncols() {
        let truth: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        if let Some(a) = binary_auc(scores.column(c), &truth) {
            aucs.push(a);
        }
    }
    let auc = if aucs.is_empty() { f64::NAN } else { aucs.iter().sum::<f64>() / aucs.len() as f64 };
    Ok((macro_f1, micro_f1, auc))
}

/// Rank-sum AUC with average ranks for ties; `None` without both classes.
pub fn binary_auc(scores: ArrayView1<f64>, truth: &[bool]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &order[k..=end] {
            if truth[i] {
                rank_sum += avg;
            }
        }
        k = end + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos * neg) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assigns every point to its nearest centroid (lowest index on ties).
pub fn assign(x: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let assignment = x
        .rows()
        .into_iter()
        .map(|p| {
            let (best, d) = centroids
                .rows()
                .into_iter()
                .map(|c| sq_dist(p, c))
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc });
            inertia += d;
            best
        })
        .collect();
    (assignment, inertia)
}

fn plus_plus<R: Rng + ?Sized>(x: &Array2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    centroids.row_mut(0).assign(&x.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|p| sq_dist(p, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, p) in x.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd<R: Rng + ?Sized>(x: &Array2<f64>, k: usize, rng: &mut R) -> KMeansResult {
    let mut centroids = plus_plus(x, k, rng);
    let (mut assignment, mut inertia) = assign(x, &centroids);
    for _ in 0..300 {
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (p, &a) in x.rows().into_iter().zip(&assignment) {
            let mut row = sums.row_mut(a);
            row += &p;
            counts[a] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / count as f64));
            } else {
                // reseed from the point farthest from its current centroid
                let far = x
                    .rows()
                    .into_iter()
                    .zip(&assignment)
                    .map(|(p, &a)| sq_dist(p, centroids.row(a)))
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc })
                    .0;
                centroids.row_mut(c).assign(&x.row(far));
            }
        }
        let (next, next_inertia) = assign(x, &centroids);
        let done = next == assignment;
        assignment = next;
        inertia = next_inertia;
        if done {
            break;
        }
    }
    KMeansResult { assignment, centroids, inertia }
}

/// Lloyd's algorithm with k-means++ seeding; best inertia over `restarts`.
pub fn kmeans_cluster<R: Rng + ?Sized>(x: &Array2<f64>, k: usize, restarts: usize, rng: &mut R) -> Result<KMeansResult> {
    if k < 2 || k > x.nrows() {
        return Err(Error::Input(format!("k = {k} must lie in [2, {}]", x.nrows())));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(x, k, rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

type Counts<K> = BTreeMap<K, usize>;

fn contingency(a: &[usize], b: &[usize]) -> (Counts<(usize, usize)>, Counts<usize>, Counts<usize>) {
    let mut joint = BTreeMap::new();
    let mut ra = BTreeMap::new();
    let mut rb = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *ra.entry(x).or_insert(0) += 1;
        *rb.entry(y).or_insert(0) += 1;
    }
    (joint, ra, rb)
}

fn entropy(counts: &BTreeMap<usize, usize>, n: f64) -> f64 {
    counts.values().map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// `(nmi, ari)`; NMI normalizes by the arithmetic mean of the entropies.
pub fn clustering_metrics(assignment: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    if assignment.len() != labels.len() {
        return Err(Error::Input(format!("{} assignments for {} labels", assignment.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Input("no samples to score".into()));
    }
    let n = labels.len() as f64;
    let (joint, ra, rb) = contingency(assignment, labels);
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let p = c as f64 / n;
            p * (p * n * n / (ra[&x] as f64 * rb[&y] as f64)).ln()
        })
        .sum();
    let (ha, hb) = (entropy(&ra, n), entropy(&rb, n));
    let nmi = if ha + hb == 0.0 { 1.0 } else { (2.0 * mi / (ha + hb)).clamp(0.0, 1.0) };

    let pairs = |c: usize| (c * c.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ra.values().map(|&c| pairs(c)).sum();
    let sb: f64 = rb.values().map(|&c| pairs(c)).sum();
    let expected = sa * sb / pairs(labels.len());
    let max = (sa + sb) / 2.0;
    let ari = if max == expected { 1.0 } else { (index - expected) / (max - expected) };
    Ok((nmi, ari))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub labels_per_class: Vec<usize>,
    /// 0 splits the remainder evenly with `test_size`.
    pub val_size: usize,
    pub test_size: usize,
    pub repeats: usize,
    pub kmeans_restarts: usize,
    pub probe: ProbeConfig,
    /// Set from the run seed; not part of the file format.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            labels_per_class: vec![20, 40, 60],
            val_size: 1000,
            test_size: 1000,
            repeats: 10,
            kmeans_restarts: 10,
            probe: ProbeConfig::default(),
            seed: 0,
        }
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

/// One row per (setting, metric): the setting is a labels-per-class count
/// for classification metrics and `kmeans` for clustering metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<(String, String, Summary)>,
}

impl MetricsReport {
    pub fn get(&self, setting: &str, metric: &str) -> Option<Summary> {
        self.rows.iter().find(|(s, m, _)| s == setting && m == metric).map(|r| r.2)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("setting\tmetric\tmean\tstd\n");
        for (s, m, v) in &self.rows {
            out.push_str(&format!("{s}\t{m}\t{}\t{}\n", v.mean, v.std));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, m, v) in &self.rows {
            out.push_str(&format!("{s:>8} {m:<9} {:>7.2} ± {:.2}\n", 100.0 * v.mean, 100.0 * v.std));
        }
        out
    }
}

/// Repeated probes per labels-per-class setting plus repeated k-means.
pub fn evaluate_embeddings(x: &Array2<f64>, labels: &[usize], cfg: &EvalConfig) -> Result<MetricsReport> {
    if x.nrows() != labels.len() {
        return Err(Error::Input(format!("{} embedding rows for {} labels", x.nrows(), labels.len())));
    }
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut report = Vec::new();
    for &per_class in &cfg.labels_per_class {
        let mut metrics = [Vec::new(), Vec::new(), Vec::new()];
        for r in 0..cfg.repeats {
            let seed = cfg.seed.wrapping_add(r as u64);
            let split = make_split(labels, per_class, cfg.val_size, cfg.test_size, seed)?;
            let probe = train_linear_probe(x, &ProbeLabels::new(&split, labels), &ProbeConfig { seed, ..cfg.probe })?;
            let x_test = rows(x, &split.test);
            let test_labels: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
            let (ma, mi, auc) = classification_metrics(&probe.predict(&x_test), &probe.probabilities(&x_test), &test_labels)?;
            metrics[0].push(ma);
            metrics[1].push(mi);
            metrics[2].push(auc);
        }
        for (name, values) in ["macro_f1", "micro_f1", "auc"].iter().zip(&metrics) {
            report.push((per_class.to_string(), name.to_string(), Summary::of(values)));
        }
    }
    let k = class_count(labels);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut nmis, mut aris) = (Vec::new(), Vec::new());
    for _ in 0..cfg.repeats {
        let km = kmeans_cluster(x, k, cfg.kmeans_restarts, &mut rng)?;
        let (nmi, ari) = clustering_metrics(&km.assignment, labels)?;
        nmis.push(nmi);
        aris.push(ari);
    }
    report.push(("kmeans".into(), "nmi".into(), Summary::of(&nmis)));
    report.push(("kmeans".into(), "ari".into(), Summary::of(&aris)));
    Ok(MetricsReport { rows: report })
}
