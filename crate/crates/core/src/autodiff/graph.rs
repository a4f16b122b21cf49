use super::tensor::{gemm, Tensor};
use super::AutodiffError;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) struct BackwardCtx<'a> {
    pub inputs: Vec<&'a Tensor>,
    pub output: &'a Tensor,
    pub grad: &'a Tensor,
    pub needs: Vec<bool>,
}

impl BackwardCtx<'_> {
    pub fn need(&self, i: usize) -> bool {
        self.needs[i]
    }
}

pub(crate) type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>>>;

/// Pins a closure to the backward signature so its argument lifetime is inferred.
pub(crate) fn op<F>(f: F) -> F
where
    F: Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>> + 'static,
{
    f
}

struct Node {
    value: Tensor,
    inputs: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

/// Append-only tape of tensor operations with reverse-mode differentiation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every leaf that requires them.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Leaf that receives a gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.leaf(t, true)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, inputs: Vec::new(), backward: None, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn push<F>(&mut self, value: Tensor, inputs: &[Var], backward: F) -> Var
    where
        F: Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>> + 'static,
    {
        let backward: BackwardFn = Box::new(backward);
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            inputs: inputs.iter().map(|v| v.0).collect(),
            backward: requires_grad.then_some(backward),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        let out = &self.nodes[loss.0].value;
        if out.len() != 1 {
            return Err(AutodiffError::NotAScalarLoss { rows: out.rows, cols: out.cols });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some(backward) = &node.backward else { continue };
            let Some(grad) = grads[i].take() else { continue };
            if node.inputs.iter().any(|&j| j >= i) {
                return Err(AutodiffError::GraphCycle(i));
            }
            let ctx = BackwardCtx {
                inputs: node.inputs.iter().map(|&j| &self.nodes[j].value).collect(),
                output: &node.value,
                grad: &grad,
                needs: node.inputs.iter().map(|&j| self.nodes[j].requires_grad).collect(),
            };
            for (&j, contribution) in node.inputs.iter().zip(backward(&ctx)) {
                let Some(c) = contribution else { continue };
                if !self.nodes[j].requires_grad {
                    continue;
                }
                match &mut grads[j] {
                    Some(g) => g.add_assign(&c),
                    slot => *slot = Some(c),
                }
            }
        }
        Ok(Gradients { grads })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimension");
        let value = self.value(a).matmul(self.value(b));
        self.push(
            value,
            &[a, b],
            op(move |ctx| {
                let ga = ctx.need(0).then(|| {
                    let mut g = Tensor::zeros(m, k);
                    gemm(m, n, k, &ctx.grad.data, false, &ctx.inputs[1].data, true, &mut g.data, 0.0);
                    g
                });
                let gb = ctx.need(1).then(|| {
                    let mut g = Tensor::zeros(k, n);
                    gemm(k, m, n, &ctx.inputs[0].data, true, &ctx.grad.data, false, &mut g.data, 0.0);
                    g
                });
                vec![ga, gb]
            }),
        )
    }

    /// Applies `a` (r×k) to each consecutive k-row block of `x`, giving one r-row block per input block.
    pub fn block_matmul(&mut self, a: Var, x: Var) -> Var {
        let (r, k) = self.shape(a);
        let (xr, f) = self.shape(x);
        assert_eq!(xr % k, 0, "block_matmul block size");
        let blocks = xr / k;
        let mut value = Tensor::zeros(blocks * r, f);
        {
            let (av, xv) = (&self.value(a).data, &self.value(x).data);
            for b in 0..blocks {
                gemm(r, k, f, av, false, &xv[b * k * f..(b + 1) * k * f], false, &mut value.data[b * r * f..(b + 1) * r * f], 0.0);
            }
        }
        self.push(
            value,
            &[a, x],
            op(move |ctx| {
                let (av, xv, g) = (&ctx.inputs[0].data, &ctx.inputs[1].data, &ctx.grad.data);
                let ga = ctx.need(0).then(|| {
                    let mut ga = Tensor::zeros(r, k);
                    for b in 0..blocks {
                        gemm(r, f, k, &g[b * r * f..(b + 1) * r * f], false, &xv[b * k * f..(b + 1) * k * f], true, &mut ga.data, 1.0);
                    }
                    ga
                });
                let gx = ctx.need(1).then(|| {
                    let mut gx = Tensor::zeros(blocks * k, f);
                    for b in 0..blocks {
                        gemm(k, r, f, av, true, &g[b * r * f..(b + 1) * r * f], false, &mut gx.data[b * k * f..(b + 1) * k * f], 0.0);
                    }
                    gx
                });
                vec![ga, gx]
            }),
        )
    }

    fn zip_op(&mut self, a: Var, b: Var, f: fn(f64, f64) -> f64, name: &str) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "{name} shape");
        Tensor::from_vec(ta.rows, ta.cols, ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_op(a, b, |x, y| x + y, "add");
        self.push(value, &[a, b], op(|ctx| vec![ctx.need(0).then(|| ctx.grad.clone()), ctx.need(1).then(|| ctx.grad.clone())]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_op(a, b, |x, y| x - y, "sub");
        self.push(value, &[a, b], op(|ctx| vec![ctx.need(0).then(|| ctx.grad.clone()), ctx.need(1).then(|| ctx.grad.map(|v| -v))]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.zip_op(a, b, |x, y| x * y, "mul");
        self.push(
            value,
            &[a, b],
            op(|ctx| {
                let prod = |t: &Tensor| {
                    Tensor::from_vec(t.rows, t.cols, t.data.iter().zip(&ctx.grad.data).map(|(x, g)| x * g).collect())
                };
                vec![ctx.need(0).then(|| prod(ctx.inputs[1])), ctx.need(1).then(|| prod(ctx.inputs[0]))]
            }),
        )
    }

    /// Adds a `1×n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (rows, cols) = self.shape(a);
        assert_eq!(self.shape(row), (1, cols), "add_row shape");
        let mut value = self.value(a).clone();
        let bias = self.value(row).data.clone();
        for r in 0..rows {
            for (v, b) in value.row_mut(r).iter_mut().zip(&bias) {
                *v += b;
            }
        }
        self.push(
            value,
            &[a, row],
            op(move |ctx| {
                let gb = ctx.need(1).then(|| {
                    let mut gb = Tensor::zeros(1, cols);
                    for r in 0..rows {
                        for (s, g) in gb.data.iter_mut().zip(ctx.grad.row(r)) {
                            *s += g;
                        }
                    }
                    gb
                });
                vec![ctx.need(0).then(|| ctx.grad.clone()), gb]
            }),
        )
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v * s);
        self.push(value, &[a], op(move |ctx| vec![Some(ctx.grad.map(|g| g * s))]))
    }

    fn unary(&mut self, a: Var, f: fn(f64) -> f64, df: fn(f64, f64) -> f64) -> Var {
        let value = self.value(a).map(f);
        self.push(
            value,
            &[a],
            op(move |ctx| {
                let (x, y, g) = (ctx.inputs[0], ctx.output, ctx.grad);
                let data = x.data.iter().zip(&y.data).zip(&g.data).map(|((&x, &y), &g)| g * df(x, y)).collect();
                vec![Some(Tensor::from_vec(x.rows, x.cols, data))]
            }),
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), |_, y| y * (1.0 - y))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, f64::abs, |x, _| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let value = Tensor::scalar(self.value(a).data.iter().sum());
        self.push(value, &[a], op(move |ctx| vec![Some(Tensor::from_vec(rows, cols, vec![ctx.grad.data[0]; rows * cols]))]))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.shape(parts[0]).0;
        let widths: Vec<usize> = parts.iter().map(|&p| self.shape(p).1).collect();
        assert!(parts.iter().all(|&p| self.shape(p).0 == rows), "concat_cols rows");
        let cols: usize = widths.iter().sum();
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for (&p, &w) in parts.iter().zip(&widths) {
                value.row_mut(r)[offset..offset + w].copy_from_slice(self.value(p).row(r));
                offset += w;
            }
        }
        self.push(
            value,
            parts,
            op(move |ctx| {
                let mut offset = 0;
                widths
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| {
                        let start = offset;
                        offset += w;
                        ctx.need(i).then(|| Tensor::from_fn(rows, w, |r, c| ctx.grad.get(r, start + c)))
                    })
                    .collect()
            }),
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let (rows, cols) = self.shape(a);
        assert!(start <= end && end <= cols, "slice_cols range");
        let src = self.value(a);
        let value = Tensor::from_fn(rows, end - start, |r, c| src.get(r, start + c));
        self.push(
            value,
            &[a],
            op(move |ctx| {
                let mut g = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    g.row_mut(r)[start..end].copy_from_slice(ctx.grad.row(r));
                }
                vec![Some(g)]
            }),
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.shape(parts[0]).1;
        assert!(parts.iter().all(|&p| self.shape(p).1 == cols), "concat_rows cols");
        let heights: Vec<usize> = parts.iter().map(|&p| self.shape(p).0).collect();
        let mut data = Vec::with_capacity(heights.iter().sum::<usize>() * cols);
        for &p in parts {
            data.extend_from_slice(&self.value(p).data);
        }
        let value = Tensor::from_vec(data.len() / cols.max(1), cols, data);
        self.push(
            value,
            parts,
            op(move |ctx| {
                let mut offset = 0;
                heights
                    .iter()
                    .enumerate()
                    .map(|(i, &h)| {
                        let start = offset * cols;
                        offset += h;
                        ctx.need(i).then(|| Tensor::from_vec(h, cols, ctx.grad.data[start..start + h * cols].to_vec()))
                    })
                    .collect()
            }),
        )
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let (rows, cols) = self.shape(a);
        assert!(start <= end && end <= rows, "slice_rows range");
        let value = Tensor::from_vec(end - start, cols, self.value(a).data[start * cols..end * cols].to_vec());
        self.push(
            value,
            &[a],
            op(move |ctx| {
                let mut g = Tensor::zeros(rows, cols);
                g.data[start * cols..end * cols].copy_from_slice(&ctx.grad.data);
                vec![Some(g)]
            }),
        )
    }

    /// Rows of `a` picked by `index`; repeated indices accumulate in the backward pass.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Var {
        let (rows, cols) = self.shape(a);
        let src = self.value(a);
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            data.extend_from_slice(src.row(i));
        }
        let value = Tensor::from_vec(index.len(), cols, data);
        let index = index.to_vec();
        self.push(
            value,
            &[a],
            op(move |ctx| {
                let mut g = Tensor::zeros(rows, cols);
                for (o, &i) in index.iter().enumerate() {
                    for (d, s) in g.row_mut(i).iter_mut().zip(ctx.grad.row(o)) {
                        *d += s;
                    }
                }
                vec![Some(g)]
            }),
        )
    }

    /// Repeats every row `times` times in place (row `r` becomes rows `r*times..(r+1)*times`).
    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Var {
        let rows = self.shape(a).0;
        let index: Vec<usize> = (0..rows).flat_map(|r| std::iter::repeat(r).take(times)).collect();
        self.gather_rows(a, &index)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let (r0, c0) = self.shape(a);
        assert_eq!(r0 * c0, rows * cols, "reshape size");
        let value = Tensor::from_vec(rows, cols, self.value(a).data.clone());
        self.push(value, &[a], op(move |ctx| vec![Some(Tensor::from_vec(r0, c0, ctx.grad.data.clone()))]))
    }

    /// `sum(a ⊙ w)` for a constant weight tensor, a convenient scalar probe.
    pub fn weighted_sum(&mut self, a: Var, w: &Tensor) -> Var {
        let wv = self.constant(w.clone());
        let p = self.mul(a, wv);
        self.sum(p)
    }
}
