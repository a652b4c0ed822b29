use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::autodiff::graph::{Gradients, Graph, Var};
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 4] = b"CCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
    m: Array2<f64>,
    v: Array2<f64>,
    steps: u64,
}

/// Named learnable matrices plus their optimizer state.
///
/// Moments and step counts are kept per parameter, so parameters frozen
/// during some phases get correct bias correction when they resume.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

/// Uniform Glorot initialization for a `fan_in x fan_out` matrix.
pub fn glorot_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Usage(format!("parameter {name:?} registered twice")));
        }
        let dim = value.dim();
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            grad: None,
            m: Array2::zeros(dim),
            v: Array2::zeros(dim),
            steps: 0,
        });
        Ok(())
    }

    pub fn insert_glorot<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<()> {
        self.insert(name, glorot_init(rows, cols, rng))
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<()> {
        self.insert(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    fn slot(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("no parameter named {name:?}")))
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        Ok(&self.params[self.slot(name)?].value)
    }

    /// Mutable access to a value; used by finite-difference checks.
    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2<f64>> {
        let k = self.slot(name)?;
        Ok(&mut self.params[k].value)
    }

    pub fn grad(&self, name: &str) -> Result<Option<&Array2<f64>>> {
        Ok(self.params[self.slot(name)?].grad.as_ref())
    }

    /// Adds the parameter as a tracked leaf of `g`.
    pub fn bind(&self, g: &mut Graph, name: &str) -> Result<Var> {
        let k = self.slot(name)?;
        let v = g.variable(self.params[k].value.clone());
        g.bindings.push((v, k));
        Ok(v)
    }

    /// Adds the parameter as a constant; it receives no gradient.
    pub fn bind_frozen(&self, g: &mut Graph, name: &str) -> Result<Var> {
        Ok(g.constant(self.get(name)?.clone()))
    }

    /// Adds the gradients of every parameter bound into `g`.
    pub fn accumulate(&mut self, g: &Graph, grads: &Gradients) {
        for &(v, k) in &g.bindings {
            if let Some(d) = grads.get(v) {
                let p = &mut self.params[k];
                match &mut p.grad {
                    Some(existing) => *existing += d,
                    slot @ None => *slot = Some(d.clone()),
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Applies one bias-corrected Adam update to every parameter holding a
    /// gradient, then clears all gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if self.params.iter().all(|p| p.grad.is_none()) {
            return Err(Error::Usage("optimizer step without any accumulated gradient".into()));
        }
        for p in &mut self.params {
            let Some(g) = p.grad.take() else { continue };
            p.steps += 1;
            let t = p.steps as i32;
            let bc1 = 1.0 - cfg.beta1.powi(t);
            let bc2 = 1.0 - cfg.beta2.powi(t);
            ndarray::Zip::from(&mut p.value)
                .and(&mut p.m)
                .and(&mut p.v)
                .and(&g)
                .for_each(|w, m, v, &g| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
                });
        }
        Ok(())
    }

    /// Copies values (not optimizer state) from `other` for every shared
    /// name.
    pub fn load_values(&mut self, other: &[(String, Array2<f64>)]) -> Result<()> {
        for (name, value) in other {
            let k = self.slot(name)?;
            if self.params[k].value.dim() != value.dim() {
                return Err(Error::Shape {
                    op: "load_values",
                    left: self.params[k].value.dim(),
                    right: value.dim(),
                });
            }
            self.params[k].value = value.clone();
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<(String, Array2<f64>)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect()
    }

    /// Writes `(label, shape, row-major f64)` records after a magic and
    /// version header. All integers and floats are little-endian.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            buf.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            buf.extend_from_slice(p.name.as_bytes());
            buf.extend_from_slice(&(p.value.nrows() as u32).to_le_bytes());
            buf.extend_from_slice(&(p.value.ncols() as u32).to_le_bytes());
            for v in p.value.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Array2<f64>)>> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = Reader { bytes: &bytes, pos: 0, path };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::load(path, 0, "not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::load(
                path,
                0,
                format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
            ));
        }
        let count = r.u32()? as usize;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::load(path, 0, "parameter label is not UTF-8"))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
            }
            out.push((name, Array2::from_shape_vec((rows, cols), data).unwrap()));
        }
        if r.pos != bytes.len() {
            return Err(Error::load(path, 0, "trailing bytes after last record"));
        }
        Ok(out)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::load(self.path, 0, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
