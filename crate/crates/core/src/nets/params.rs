use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::NetError;
use crate::autodiff::{Gradients, Graph, Tensor, Var};

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Uniform in `±scale/√fan_in`.
    pub fn uniform(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize, scale: f64, rng: &mut ChaCha8Rng) -> ParamId {
        let bound = scale / (fan_in as f64).sqrt();
        self.add(name, Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound)))
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    /// Identity plus Gaussian noise of the given standard deviation.
    pub fn noisy_identity(&mut self, name: &str, n: usize, std: f64, rng: &mut ChaCha8Rng) -> ParamId {
        let normal = Normal::new(0.0, std).expect("finite std");
        let t = Tensor::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } + normal.sample(rng));
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Places every parameter on `g`; those rejected by `trainable` become constants.
    pub fn bind(&self, g: &mut Graph, trainable: impl Fn(&str) -> bool) -> Bound {
        let vars = self
            .values
            .iter()
            .zip(&self.names)
            .map(|(v, n)| if trainable(n) { g.input(v.clone()) } else { g.constant(v.clone()) })
            .collect();
        Bound { vars }
    }

    pub fn write_to<W: Write>(&self, mut w: W, digest: &[u8; 32]) -> std::io::Result<()> {
        w.write_all(b"MDCK")?;
        w.write_u32::<LittleEndian>(1)?;
        w.write_all(digest)?;
        w.write_u32::<LittleEndian>(self.values.len() as u32)?;
        for (name, t) in self.names.iter().zip(&self.values) {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            w.write_u32::<LittleEndian>(t.rows as u32)?;
            w.write_u32::<LittleEndian>(t.cols as u32)?;
            for &v in &t.data {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    /// Reads a checkpoint, returning the store and its config digest.
    pub fn read_from<R: Read>(mut r: R) -> Result<(Self, [u8; 32]), NetError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"MDCK" {
            return Err(NetError::BadCheckpoint("missing MDCK magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != 1 {
            return Err(NetError::BadCheckpoint(format!("unsupported version {version}")));
        }
        let mut digest = [0u8; 32];
        r.read_exact(&mut digest)?;
        let count = r.read_u32::<LittleEndian>()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| NetError::BadCheckpoint("parameter name is not UTF-8".into()))?;
            let rows = r.read_u32::<LittleEndian>()? as usize;
            let cols = r.read_u32::<LittleEndian>()? as usize;
            let mut data = vec![0.0; rows * cols];
            r.read_f64_into::<LittleEndian>(&mut data)?;
            store.add(name, Tensor::from_vec(rows, cols, data));
        }
        Ok((store, digest))
    }

    /// Copies values of identically named and shaped parameters from `other`.
    pub fn load_matching(&mut self, other: &ParamStore) -> Result<(), NetError> {
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let id = other.find(name).ok_or_else(|| NetError::BadCheckpoint(format!("missing parameter {name}")))?;
            let src = other.get(id);
            if src.shape() != value.shape() {
                return Err(NetError::BadCheckpoint(format!("parameter {name} has the wrong shape")));
            }
            value.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}

/// Graph nodes of a bound [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Per-parameter gradients (zero for constants or unused parameters).
    pub fn gradients(&self, g: &Graph, grads: &mut Gradients) -> Vec<Tensor> {
        self.vars
            .iter()
            .map(|&v| grads.take(v).unwrap_or_else(|| {
                let (r, c) = g.shape(v);
                Tensor::zeros(r, c)
            }))
            .collect()
    }
}

/// First/second-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || store.values.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: zeros(), v: zeros(), t: 0 }
    }

    /// Updates parameters accepted by `trainable`.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor], lr: f64, trainable: impl Fn(&str) -> bool) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..store.values.len() {
            if !trainable(&store.names[i]) {
                continue;
            }
            let (m, v, p) = (&mut self.m[i].data, &mut self.v[i].data, &mut store.values[i].data);
            for (((m, v), p), &g) in m.iter_mut().zip(v.iter_mut()).zip(p.iter_mut()).zip(&grads[i].data) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}
