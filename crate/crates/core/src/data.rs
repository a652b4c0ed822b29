//! Dataset files, the planted-class synthetic generator, and persisted
//! artifacts (embeddings, splits, config snapshots).
//!
//! A dataset directory holds a manifest of `key = value` lines:
//!
//! ```text
//! nodes = nodes.tsv
//! target = P
//! relation = pa P A pa.tsv
//! features = P p.feat
//! labels = labels.tsv
//! metapaths = PAP PSP
//! ```
//!
//! `relation` and `features` repeat. Node lines are `id<TAB>type` with ids
//! dense per type, edge lines `src<TAB>dst` in local ids, feature files an
//! `n d` header followed by `n` rows, and label lines `id<TAB>class`.
//! Types without a feature file get one-hot identity features. Lines that
//! are empty or start with `#` are skipped everywhere.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Split;
use crate::hin::{HeteroGraph, MetaPathSpec, NodeType, RelationDecl};

pub const MANIFEST_FILE: &str = "manifest.txt";
const EMBEDDINGS_HEADER: &str = "#cocontrast embeddings v";
const SPLIT_HEADER: &str = "#cocontrast split v";
const CONFIG_HEADER: &str = "# cocontrast config v";
pub const FORMAT_VERSION: u32 = 1;

/// A loaded or generated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: HeteroGraph,
    pub labels: Vec<usize>,
    pub metapaths: Vec<MetaPathSpec>,
}

/// Final node embeddings plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Array2<f64>,
    pub view: String,
    pub epoch: usize,
    pub config_hash: String,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(file: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::load(file, line, format!("invalid {what} {field:?}")))
}

fn two_fields<'a>(file: &Path, line: usize, text: &'a str) -> Result<(&'a str, &'a str)> {
    let mut it = text.split('\t').map(str::trim);
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::load(file, line, "expected two tab-separated fields")),
    }
}

#[derive(Debug, Default)]
struct Manifest {
    nodes: Option<(usize, String)>,
    target: Option<(usize, String)>,
    relations: Vec<(usize, [String; 4])>,
    features: Vec<(usize, String, String)>,
    labels: Option<(usize, String)>,
    metapaths: Option<(usize, Vec<String>)>,
}

fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = read(path)?;
    let mut m = Manifest::default();
    for (line, l) in content_lines(&text) {
        let (key, value) = l
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::load(path, line, "expected key = value"))?;
        let words: Vec<String> = value.split_whitespace().map(String::from).collect();
        let single = |what: &str| -> Result<(usize, String)> {
            match words.as_slice() {
                [w] => Ok((line, w.clone())),
                _ => Err(Error::load(path, line, format!("{what} takes exactly one value"))),
            }
        };
        match key {
            "nodes" => m.nodes = Some(single("nodes")?),
            "target" => m.target = Some(single("target")?),
            "labels" => m.labels = Some(single("labels")?),
            "relation" => match words.as_slice() {
                [name, src, dst, file] => m.relations.push((line, [name.clone(), src.clone(), dst.clone(), file.clone()])),
                _ => return Err(Error::load(path, line, "relation takes: name src-type dst-type file")),
            },
            "features" => match words.as_slice() {
                [ty, file] => m.features.push((line, ty.clone(), file.clone())),
                _ => return Err(Error::load(path, line, "features takes: type file")),
            },
            "metapaths" => {
                if words.is_empty() {
                    return Err(Error::load(path, line, "metapaths needs at least one entry"));
                }
                m.metapaths = Some((line, words));
            }
            other => return Err(Error::load(path, line, format!("unknown manifest key {other:?}"))),
        }
    }
    Ok(m)
}

/// Loads a dataset from a directory containing [`MANIFEST_FILE`] (or from
/// the manifest path itself).
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = parse_manifest(&manifest_path)?;
    let missing = |key: &str| Error::load(&manifest_path, 0, format!("missing key {key:?}"));
    let (_, nodes_file) = m.nodes.clone().ok_or_else(|| missing("nodes"))?;
    let (target_line, target_name) = m.target.clone().ok_or_else(|| missing("target"))?;
    let (_, labels_file) = m.labels.clone().ok_or_else(|| missing("labels"))?;
    let (mp_line, mp_names) = m.metapaths.clone().ok_or_else(|| missing("metapaths"))?;

    let types = load_nodes(&dir.join(&nodes_file))?;
    let type_index = |name: &str, line: usize| -> Result<usize> {
        types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::load(&manifest_path, line, format!("type {name:?} has no nodes")))
    };
    let target = type_index(&target_name, target_line)?;

    let mut relations = Vec::with_capacity(m.relations.len());
    for (line, [name, src, dst, file]) in &m.relations {
        let (s, d) = (type_index(src, *line)?, type_index(dst, *line)?);
        let edges = load_edges(&dir.join(file), types[s].count, types[d].count)?;
        relations.push(RelationDecl { name: name.clone(), src: s, dst: d, edges });
    }

    let mut features: Vec<Option<Array2<f64>>> = vec![None; types.len()];
    for (line, ty, file) in &m.features {
        let t = type_index(ty, *line)?;
        if features[t].is_some() {
            return Err(Error::load(&manifest_path, *line, format!("features for type {ty:?} given twice")));
        }
        features[t] = Some(load_features(&dir.join(file), types[t].count)?);
    }
    let features = features
        .into_iter()
        .zip(&types)
        .map(|(f, t)| f.unwrap_or_else(|| Array2::eye(t.count)))
        .collect();

    let labels = load_labels(&dir.join(&labels_file), types[target].count)?;
    let graph = HeteroGraph::new(types, relations, features, target)
        .map_err(|e| Error::load(&manifest_path, 0, e.to_string()))?;
    let metapaths = mp_names
        .iter()
        .map(|n| MetaPathSpec::parse(n, &graph).map_err(|e| Error::load(&manifest_path, mp_line, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { graph, labels, metapaths })
}

fn load_nodes(path: &Path) -> Result<Vec<NodeType>> {
    let text = read(path)?;
    let mut ids: Vec<(String, Vec<bool>)> = Vec::new();
    for (line, l) in content_lines(&text) {
        let (id, ty) = two_fields(path, line, l)?;
        let id: usize = parse_num(path, line, id, "node id")?;
        let slot = match ids.iter().position(|(n, _)| n == ty) {
            Some(k) => k,
            None => {
                ids.push((ty.to_string(), Vec::new()));
                ids.len() - 1
            }
        };
        let seen = &mut ids[slot].1;
        if seen.len() <= id {
            seen.resize(id + 1, false);
        }
        if seen[id] {
            return Err(Error::load(path, line, format!("duplicate node id {id} of type {ty:?}")));
        }
        seen[id] = true;
    }
    ids.into_iter()
        .map(|(name, seen)| match seen.iter().position(|s| !s) {
            Some(gap) => Err(Error::load(path, 0, format!("type {name:?} ids are not dense: {gap} is missing"))),
            None => Ok(NodeType { name, count: seen.len() }),
        })
        .collect()
}

fn load_edges(path: &Path, n_src: usize, n_dst: usize) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (line, l) in content_lines(&text) {
        let (s, d) = two_fields(path, line, l)?;
        let s: usize = parse_num(path, line, s, "source id")?;
        let d: usize = parse_num(path, line, d, "destination id")?;
        if s >= n_src {
            return Err(Error::load(path, line, format!("dangling source {s} (type has {n_src} nodes)")));
        }
        if d >= n_dst {
            return Err(Error::load(path, line, format!("dangling destination {d} (type has {n_dst} nodes)")));
        }
        edges.push((s, d));
    }
    Ok(edges)
}

fn load_features(path: &Path, count: usize) -> Result<Array2<f64>> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines.next().ok_or_else(|| Error::load(path, 1, "missing `n d` header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [n, d] = dims.as_slice() else {
        return Err(Error::load(path, hline, "header must be `n d`"));
    };
    let n: usize = parse_num(path, hline, n, "row count")?;
    let d: usize = parse_num(path, hline, d, "column count")?;
    if n != count {
        return Err(Error::load(path, hline, format!("{n} feature rows for {count} nodes")));
    }
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (line, l) in lines {
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != d {
            return Err(Error::load(path, line, format!("expected {d} values, found {}", vals.len())));
        }
        for v in vals {
            data.push(parse_num::<f64>(path, line, v, "feature value")?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::load(path, hline, format!("header promises {n} rows, file has {rows}")));
    }
    Ok(Array2::from_shape_vec((n, d), data).expect("row-major features"))
}

fn load_labels(path: &Path, count: usize) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut labels: Vec<Option<usize>> = vec![None; count];
    for (line, l) in content_lines(&text) {
        let (id, class) = two_fields(path, line, l)?;
        let id: usize = parse_num(path, line, id, "node id")?;
        let class: usize = parse_num(path, line, class, "class")?;
        match labels.get_mut(id) {
            None => return Err(Error::load(path, line, format!("label for unknown target node {id}"))),
            Some(Some(_)) => return Err(Error::load(path, line, format!("duplicate label for node {id}"))),
            Some(slot) => *slot = Some(class),
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::load(path, 0, format!("target node {i} has no label"))))
        .collect()
}

fn format_matrix(out: &mut String, m: &Array2<f64>) {
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

/// Writes `dataset` in the manifest layout. Features are written for the
/// target type; other types fall back to one-hot on load.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = &dataset.graph;
    let mut nodes = String::new();
    for t in g.types() {
        for id in 0..t.count {
            writeln!(nodes, "{id}\t{}", t.name).unwrap();
        }
    }
    write(&dir.join("nodes.tsv"), &nodes)?;

    let target = &g.types()[g.target_type()].name;
    let mut manifest = format!("nodes = nodes.tsv\ntarget = {target}\n");
    for rel in g.relations() {
        let file = format!("{}.tsv", rel.name);
        let mut edges = String::new();
        for (s, d) in rel.forward().pairs() {
            writeln!(edges, "{s}\t{d}").unwrap();
        }
        write(&dir.join(&file), &edges)?;
        writeln!(manifest, "relation = {} {} {} {file}", rel.name, g.types()[rel.src].name, g.types()[rel.dst].name).unwrap();
    }
    let f = g.features(g.target_type());
    let mut feats = format!("{} {}\n", f.nrows(), f.ncols());
    format_matrix(&mut feats, f);
    let feat_file = format!("{target}.feat");
    write(&dir.join(&feat_file), &feats)?;
    writeln!(manifest, "features = {target} {feat_file}").unwrap();

    let mut labels = String::new();
    for (i, c) in dataset.labels.iter().enumerate() {
        writeln!(labels, "{i}\t{c}").unwrap();
    }
    write(&dir.join("labels.tsv"), &labels)?;
    let names: Vec<&str> = dataset.metapaths.iter().map(|m| m.name.as_str()).collect();
    writeln!(manifest, "labels = labels.tsv\nmetapaths = {}", names.join(" ")).unwrap();
    write(&dir.join(MANIFEST_FILE), &manifest)
}

/// One schema neighbor type of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthNeighbor {
    pub name: String,
    /// Nodes of this type owned by each class; the type has
    /// `classes * pool_per_class` nodes.
    pub pool_per_class: usize,
    /// Edge slots per target node.
    pub slots: usize,
}

/// Planted-class heterogeneous graph.
///
/// Every target node fills `slots` edge slots per neighbor type. A slot
/// goes to a uniformly drawn node of another class's pool with
/// probability `cross`, otherwise to a node of its own class's pool with
/// probability `intra`, and otherwise stays empty. A node whose slots all
/// stay empty receives one own-pool edge so that no node is isolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub target: String,
    pub neighbors: Vec<SynthNeighbor>,
    pub intra: f64,
    pub cross: f64,
    pub feature_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 3,
            per_class: 40,
            target: "P".into(),
            neighbors: vec![
                SynthNeighbor { name: "A".into(), pool_per_class: 20, slots: 3 },
                SynthNeighbor { name: "S".into(), pool_per_class: 1, slots: 1 },
            ],
            intra: 0.8,
            cross: 0.05,
            feature_dim: 16,
            noise: 0.5,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes == 0 || self.per_class == 0 {
            return bad("synthetic spec needs at least one target node".into());
        }
        if self.neighbors.is_empty() {
            return bad("synthetic spec needs at least one neighbor type".into());
        }
        for n in &self.neighbors {
            if n.pool_per_class == 0 || n.slots == 0 {
                return bad(format!("neighbor type {:?} needs a non-empty pool and at least one slot", n.name));
            }
            if n.name == self.target {
                return bad(format!("neighbor type {:?} clashes with the target type", n.name));
            }
        }
        if !(0.0..=1.0).contains(&self.intra) || !(0.0..=1.0).contains(&self.cross) {
            return bad("affinities must lie in [0, 1]".into());
        }
        if self.cross > 0.0 && self.classes < 2 {
            return bad("cross-class edges need at least two classes".into());
        }
        if self.noise.is_nan() || self.noise < 0.0 || self.feature_dim == 0 {
            return bad("noise must be non-negative and feature_dim positive".into());
        }
        Ok(())
    }
}

/// Pure function of `spec`: same spec, same bytes.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.classes * spec.per_class;
    let labels: Vec<usize> = (0..n).map(|i| i / spec.per_class).collect();

    let mut types = vec![NodeType { name: spec.target.clone(), count: n }];
    let mut relations = Vec::new();
    for (k, nb) in spec.neighbors.iter().enumerate() {
        let pool = nb.pool_per_class;
        types.push(NodeType { name: nb.name.clone(), count: spec.classes * pool });
        let mut edges = Vec::new();
        for (i, &c) in labels.iter().enumerate() {
            let mut mine = Vec::with_capacity(nb.slots);
            for _ in 0..nb.slots {
                if rng.random::<f64>() < spec.cross {
                    let other = (c + 1 + rng.random_range(0..spec.classes - 1)) % spec.classes;
                    mine.push(other * pool + rng.random_range(0..pool));
                } else if rng.random::<f64>() < spec.intra {
                    mine.push(c * pool + rng.random_range(0..pool));
                }
            }
            if mine.is_empty() {
                mine.push(c * pool + rng.random_range(0..pool));
            }
            mine.sort_unstable();
            mine.dedup();
            edges.extend(mine.into_iter().map(|j| (i, j)));
        }
        relations.push(RelationDecl {
            name: format!("{}{}", spec.target, nb.name).to_lowercase(),
            src: 0,
            dst: k + 1,
            edges,
        });
    }

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let means = Array2::from_shape_simple_fn((spec.classes, spec.feature_dim), || unit.sample(&mut rng));
    let mut target_features = Array2::zeros((n, spec.feature_dim));
    for (i, &c) in labels.iter().enumerate() {
        for d in 0..spec.feature_dim {
            let eps: f64 = unit.sample(&mut rng);
            target_features[[i, d]] = means[[c, d]] + spec.noise * eps;
        }
    }
    let mut features = vec![target_features];
    features.extend(types[1..].iter().map(|t| Array2::eye(t.count)));

    let graph = HeteroGraph::new(types, relations, features, 0)?;
    let metapaths = spec
        .neighbors
        .iter()
        .map(|nb| MetaPathSpec::parse(&format!("{t}-{}-{t}", nb.name, t = spec.target), &graph))
        .collect::<Result<Vec<_>>>()?;
    // display names follow the usual letter form when every type is one letter
    let metapaths = metapaths
        .into_iter()
        .zip(&spec.neighbors)
        .map(|(mut m, nb)| {
            m.name = if spec.target.len() == 1 && nb.name.len() == 1 {
                format!("{t}{}{t}", nb.name, t = spec.target)
            } else {
                format!("{t}-{}-{t}", nb.name, t = spec.target)
            };
            m
        })
        .collect();
    Ok(Dataset { graph, labels, metapaths })
}

fn check_version(path: &Path, line: Option<&str>, header: &str) -> Result<()> {
    let line = line.unwrap_or("");
    match line.strip_prefix(header) {
        Some(v) if v.trim() == FORMAT_VERSION.to_string() => Ok(()),
        Some(v) => Err(Error::load(path, 1, format!("format version {}, expected {FORMAT_VERSION}", v.trim()))),
        None => Err(Error::load(path, 1, format!("missing header {header}{FORMAT_VERSION}"))),
    }
}

pub fn save_embeddings(path: &Path, e: &EmbeddingMatrix) -> Result<()> {
    let mut out = format!(
        "{EMBEDDINGS_HEADER}{FORMAT_VERSION}\n#view {}\n#epoch {}\n#config {}\n{} {}\n",
        e.view,
        e.epoch,
        e.config_hash,
        e.values.nrows(),
        e.values.ncols()
    );
    format_matrix(&mut out, &e.values);
    write(path, &out)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let text = read(path)?;
    let mut lines = text.lines();
    check_version(path, lines.next(), EMBEDDINGS_HEADER)?;
    let mut meta = BTreeMap::new();
    let mut body = Vec::new();
    for (k, l) in lines.enumerate() {
        let line = k + 2;
        if let Some(rest) = l.strip_prefix('#') {
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(key.to_string(), value.to_string());
        } else if !l.trim().is_empty() {
            body.push((line, l));
        }
    }
    let ((hline, header), rows) = body.split_first().ok_or_else(|| Error::load(path, 2, "missing `N d` header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [n, d] = dims.as_slice() else {
        return Err(Error::load(path, *hline, "header must be `N d`"));
    };
    let n: usize = parse_num(path, *hline, n, "row count")?;
    let d: usize = parse_num(path, *hline, d, "column count")?;
    if rows.len() != n {
        return Err(Error::load(path, *hline, format!("header promises {n} rows, file has {}", rows.len())));
    }
    let mut data = Vec::with_capacity(n * d);
    for (line, l) in rows {
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != d {
            return Err(Error::load(path, *line, format!("expected {d} values, found {}", vals.len())));
        }
        for v in vals {
            data.push(parse_num::<f64>(path, *line, v, "embedding value")?);
        }
    }
    let epoch = match meta.get("epoch") {
        Some(e) => parse_num(path, 1, e, "epoch")?,
        None => 0,
    };
    Ok(EmbeddingMatrix {
        values: Array2::from_shape_vec((n, d), data).expect("row-major embeddings"),
        view: meta.remove("view").unwrap_or_default(),
        epoch,
        config_hash: meta.remove("config").unwrap_or_default(),
    })
}

fn id_list(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn save_split(path: &Path, split: &Split) -> Result<()> {
    let text = format!(
        "{SPLIT_HEADER}{FORMAT_VERSION}\n#per_class {}\ntrain\t{}\nval\t{}\ntest\t{}\n",
        split.per_class,
        id_list(&split.train),
        id_list(&split.val),
        id_list(&split.test)
    );
    write(path, &text)
}

pub fn load_split(path: &Path) -> Result<Split> {
    let text = read(path)?;
    let mut lines = text.lines();
    check_version(path, lines.next(), SPLIT_HEADER)?;
    let mut per_class = None;
    let mut parts: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, l) in lines.enumerate() {
        let line = k + 2;
        if let Some(v) = l.strip_prefix("#per_class ") {
            per_class = Some(parse_num(path, line, v.trim(), "per-class count")?);
            continue;
        }
        if l.trim().is_empty() || l.starts_with('#') {
            continue;
        }
        let (name, ids) = l.split_once('\t').unwrap_or((l, ""));
        if !["train", "val", "test"].contains(&name) {
            return Err(Error::load(path, line, format!("unknown split part {name:?}")));
        }
        let ids = ids
            .split_whitespace()
            .map(|v| parse_num(path, line, v, "node id"))
            .collect::<Result<Vec<usize>>>()?;
        parts.insert(name, ids);
    }
    let mut take = |name: &str| parts.remove(name).ok_or_else(|| Error::load(path, 0, format!("missing {name} line")));
    Ok(Split {
        train: take("train")?,
        val: take("val")?,
        test: take("test")?,
        per_class: per_class.ok_or_else(|| Error::load(path, 0, "missing #per_class line"))?,
    })
}

/// Writes `value` as TOML behind a version comment.
pub fn save_config_snapshot<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    write(path, &format!("{CONFIG_HEADER}{FORMAT_VERSION}\n{body}"))
}

pub fn load_config_snapshot<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    check_version(path, text.lines().next(), CONFIG_HEADER)?;
    toml::from_str(&text).map_err(|e| Error::load(path, 0, e.to_string()))
}
