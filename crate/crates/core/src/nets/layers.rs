use rand_chacha::ChaCha8Rng;

use super::params::{Bound, ParamId, ParamStore};
use crate::autodiff::{Graph, Var};

/// `x·W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let w = store.uniform(&format!("{name}.w"), inputs, outputs, inputs, scale, rng);
        let b = store.zeros(&format!("{name}.b"), 1, outputs);
        Self { w, b, inputs, outputs }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let y = g.matmul(x, p.var(self.w));
        g.add_row(y, p.var(self.b))
    }
}

/// Gated recurrent cell.
#[derive(Debug, Clone)]
pub struct Gru {
    wx: ParamId,
    wh: ParamId,
    bx: ParamId,
    bh: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl Gru {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            wx: store.uniform(&format!("{name}.wx"), inputs, 3 * hidden, hidden, 1.0, rng),
            wh: store.uniform(&format!("{name}.wh"), hidden, 3 * hidden, hidden, 1.0, rng),
            bx: store.zeros(&format!("{name}.bx"), 1, 3 * hidden),
            bh: store.zeros(&format!("{name}.bh"), 1, 3 * hidden),
            inputs,
            hidden,
        }
    }

    /// One step: update gate `z`, reset gate `r`, candidate `n`, `h' = n + z⊙(h − n)`.
    pub fn step(&self, g: &mut Graph, p: &Bound, x: Var, h: Var) -> Var {
        let n = self.hidden;
        let gx = g.matmul(x, p.var(self.wx));
        let gx = g.add_row(gx, p.var(self.bx));
        let gh = g.matmul(h, p.var(self.wh));
        let gh = g.add_row(gh, p.var(self.bh));
        let (xz, xr, xn) = (g.slice_cols(gx, 0, n), g.slice_cols(gx, n, 2 * n), g.slice_cols(gx, 2 * n, 3 * n));
        let (hz, hr, hn) = (g.slice_cols(gh, 0, n), g.slice_cols(gh, n, 2 * n), g.slice_cols(gh, 2 * n, 3 * n));
        let z = g.add(xz, hz);
        let z = g.sigmoid(z);
        let r = g.add(xr, hr);
        let r = g.sigmoid(r);
        let rh = g.mul(r, hn);
        let cand = g.add(xn, rh);
        let cand = g.tanh(cand);
        let diff = g.sub(h, cand);
        let gated = g.mul(z, diff);
        g.add(cand, gated)
    }
}

/// One graph convolution `σ(A·F·W)` with a dense learnable adjacency.
#[derive(Debug, Clone)]
pub struct GcnLayer {
    pub a: ParamId,
    pub w: ParamId,
    pub activation: bool,
}

impl GcnLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        nodes: usize,
        inputs: usize,
        outputs: usize,
        activation: bool,
        scale: f64,
        noise: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let a = store.noisy_identity(&format!("{name}.adj"), nodes, noise, rng);
        let w = store.uniform(&format!("{name}.w"), inputs, outputs, inputs, scale, rng);
        Self { a, w, activation }
    }

    /// `x` stacks one `nodes × inputs` block per sample.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let xw = g.matmul(x, p.var(self.w));
        let y = g.block_matmul(p.var(self.a), xw);
        if self.activation {
            g.tanh(y)
        } else {
            y
        }
    }
}

/// Input layer, residual blocks of two layers, and a linear output layer.
#[derive(Debug, Clone)]
pub struct GcnStack {
    pub input: GcnLayer,
    pub blocks: Vec<(GcnLayer, GcnLayer)>,
    pub output: GcnLayer,
}

impl GcnStack {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        nodes: usize,
        inputs: usize,
        hidden: usize,
        outputs: usize,
        blocks: usize,
        output_scale: f64,
        noise: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let input = GcnLayer::new(store, &format!("{name}.in"), nodes, inputs, hidden, true, 1.0, noise, rng);
        let blocks = (0..blocks)
            .map(|i| {
                (
                    GcnLayer::new(store, &format!("{name}.block{i}.0"), nodes, hidden, hidden, true, 1.0, noise, rng),
                    GcnLayer::new(store, &format!("{name}.block{i}.1"), nodes, hidden, hidden, true, 1.0, noise, rng),
                )
            })
            .collect();
        let output = GcnLayer::new(store, &format!("{name}.out"), nodes, hidden, outputs, false, output_scale, noise, rng);
        Self { input, blocks, output }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let mut h = self.input.forward(g, p, x);
        for (a, b) in &self.blocks {
            let y = a.forward(g, p, h);
            let y = b.forward(g, p, y);
            h = g.add(h, y);
        }
        self.output.forward(g, p, h)
    }
}
