use super::graph::{op, Graph, Var};
use super::tensor::{gemm, Tensor};

/// Cubic 3-D convolution geometry: kernel 3, padding 1, fixed stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dShape {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Input edge length.
    pub size: usize,
    pub stride: usize,
}

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL * KERNEL;

impl Conv3dShape {
    pub fn out_size(&self) -> usize {
        (self.size + 2 - KERNEL) / self.stride + 1
    }

    pub fn weight_shape(&self) -> (usize, usize) {
        (self.out_channels, self.in_channels * TAPS)
    }

    fn out_voxels(&self) -> usize {
        self.out_size().pow(3)
    }

    /// Output range `lo..hi` along one axis whose input index `o·stride - 1 + k` is in bounds.
    fn valid_range(&self, k: isize) -> (usize, usize) {
        let (n, o, s) = (self.size as isize, self.out_size() as isize, self.stride as isize);
        let lo = ((1 - k) + s - 1).div_euclid(s).max(0);
        let hi = ((n - k) / s + 1).min(o).max(lo);
        (lo as usize, hi as usize)
    }

    /// Patch matrix `(in_channels·27) × out_voxels` for one sample.
    fn im2col(&self, x: &[f64], col: &mut [f64]) {
        let (n, o, s) = (self.size, self.out_size(), self.stride);
        let ov = self.out_voxels();
        for ci in 0..self.in_channels {
            let xc = &x[ci * n.pow(3)..(ci + 1) * n.pow(3)];
            for tap in 0..TAPS {
                let (kx, ky, kz) = (tap % 3, tap / 3 % 3, tap / 9);
                let (xlo, xhi) = self.valid_range(kx as isize);
                let (ylo, yhi) = self.valid_range(ky as isize);
                let (zlo, zhi) = self.valid_range(kz as isize);
                let row = &mut col[(ci * TAPS + tap) * ov..(ci * TAPS + tap + 1) * ov];
                row.fill(0.0);
                for oz in zlo..zhi {
                    let iz = oz * s + kz - 1;
                    for oy in ylo..yhi {
                        let iy = oy * s + ky - 1;
                        let src = &xc[(iz * n + iy) * n..(iz * n + iy + 1) * n];
                        let dst = &mut row[(oz * o + oy) * o..(oz * o + oy + 1) * o];
                        for ox in xlo..xhi {
                            dst[ox] = src[ox * s + kx - 1];
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f64], gx: &mut [f64]) {
        let (n, o, s) = (self.size, self.out_size(), self.stride);
        let ov = self.out_voxels();
        for ci in 0..self.in_channels {
            let gc = &mut gx[ci * n.pow(3)..(ci + 1) * n.pow(3)];
            for tap in 0..TAPS {
                let (kx, ky, kz) = (tap % 3, tap / 3 % 3, tap / 9);
                let (xlo, xhi) = self.valid_range(kx as isize);
                let (ylo, yhi) = self.valid_range(ky as isize);
                let (zlo, zhi) = self.valid_range(kz as isize);
                let row = &col[(ci * TAPS + tap) * ov..(ci * TAPS + tap + 1) * ov];
                for oz in zlo..zhi {
                    let iz = oz * s + kz - 1;
                    for oy in ylo..yhi {
                        let iy = oy * s + ky - 1;
                        let dst = &mut gc[(iz * n + iy) * n..(iz * n + iy + 1) * n];
                        let src = &row[(oz * o + oy) * o..(oz * o + oy + 1) * o];
                        for ox in xlo..xhi {
                            dst[ox * s + kx - 1] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

impl Graph {
    /// Batched convolution. `x` holds one sample per row laid out as
    /// `channel, z, y, x` (x fastest); `w` is `out × (in·27)`, `bias` is `1 × out`.
    pub fn conv3d(&mut self, x: Var, w: Var, bias: Var, shape: Conv3dShape) -> Var {
        let batch = self.shape(x).0;
        let in_len = shape.in_channels * shape.size.pow(3);
        assert_eq!(self.shape(x).1, in_len, "conv3d input size");
        assert_eq!(self.shape(w), shape.weight_shape(), "conv3d weight shape");
        assert_eq!(self.shape(bias), (1, shape.out_channels), "conv3d bias shape");
        let (co, ck, ov) = (shape.out_channels, shape.in_channels * TAPS, shape.out_voxels());
        let mut value = Tensor::zeros(batch, co * ov);
        let mut col = vec![0.0; ck * ov];
        {
            let (xv, wv, bv) = (self.value(x), self.value(w), self.value(bias));
            for b in 0..batch {
                shape.im2col(xv.row(b), &mut col);
                let out = value.row_mut(b);
                for (c, chunk) in out.chunks_mut(ov).enumerate() {
                    chunk.fill(bv.data[c]);
                }
                gemm(co, ck, ov, &wv.data, false, &col, false, out, 1.0);
            }
        }
        self.push(
            value,
            &[x, w, bias],
            op(move |ctx| {
                let (xv, wv, g) = (ctx.inputs[0], ctx.inputs[1], ctx.grad);
                let mut gx = ctx.need(0).then(|| Tensor::zeros(batch, in_len));
                let mut gw = ctx.need(1).then(|| Tensor::zeros(co, ck));
                let mut gb = ctx.need(2).then(|| Tensor::zeros(1, co));
                let mut col = vec![0.0; ck * ov];
                let mut gcol = if ctx.need(0) { vec![0.0; ck * ov] } else { Vec::new() };
                for b in 0..batch {
                    let gout = g.row(b);
                    if let Some(gb) = gb.as_mut() {
                        for (c, chunk) in gout.chunks(ov).enumerate() {
                            gb.data[c] += chunk.iter().sum::<f64>();
                        }
                    }
                    if let Some(gw) = gw.as_mut() {
                        shape.im2col(xv.row(b), &mut col);
                        gemm(co, ov, ck, gout, false, &col, true, &mut gw.data, 1.0);
                    }
                    if let Some(gx) = gx.as_mut() {
                        gemm(ck, co, ov, &wv.data, true, gout, false, &mut gcol, 0.0);
                        shape.col2im(&gcol, gx.row_mut(b));
                    }
                }
                vec![gx, gw, gb]
            }),
        )
    }

    /// Mean over each channel's voxels: `batch × (channels·V)` to `batch × channels`.
    pub fn global_avg_pool(&mut self, x: Var, channels: usize) -> Var {
        let (batch, len) = self.shape(x);
        assert_eq!(len % channels, 0, "pool channel split");
        let v = len / channels;
        let src = self.value(x);
        let value = Tensor::from_fn(batch, channels, |b, c| src.row(b)[c * v..(c + 1) * v].iter().sum::<f64>() / v as f64);
        self.push(
            value,
            &[x],
            op(move |ctx| {
                let g = Tensor::from_fn(batch, len, |b, i| ctx.grad.get(b, i / v) / v as f64);
                vec![Some(g)]
            }),
        )
    }
}
