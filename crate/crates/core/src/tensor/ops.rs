//! Forward primitives. Each operation validates shapes, computes its output
//! and records the node needed for the backward pass.

use super::{numel_of, Element, Tensor};
use crate::error::{MagnetError, Result};

/// Spatial padding mode for convolutions (stride is fixed at 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero-pad so the output has the same height/width as the input.
    Same,
    /// No padding; output shrinks by `kernel - 1`.
    Valid,
}

pub(crate) enum Op<T: Element> {
    Leaf,
    Add,
    AddBias,
    Mul,
    MulBroadcastLast,
    MulScalar(T),
    Matmul,
    Relu,
    Sigmoid,
    Softmax { axis: usize },
    Conv2d { padding: Padding },
    DepthwiseConv2d,
    MaxPool2d { argmax: Vec<usize> },
    UpsampleNearest2d,
    ConcatChannels { left_channels: usize },
    GlobalAvgPool,
    LayerNorm { mean: Vec<T>, inv_std: Vec<T> },
    Sum,
    Mean,
    BceLoss { eps: T },
    CeLoss { eps: T },
}

fn dims4(shape: &[usize]) -> Result<(usize, usize, usize, usize)> {
    if shape.len() != 4 {
        return Err(MagnetError::Shape(format!(
            "expected a 4-d (batch, height, width, channels) tensor, got shape {shape:?}"
        )));
    }
    Ok((shape[0], shape[1], shape[2], shape[3]))
}

impl<T: Element> Tensor<T> {
    /// Elementwise sum of two same-shape tensors.
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape() != other.shape() {
            return Err(MagnetError::Shape(format!(
                "add: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        let out = {
            let a = self.data();
            let b = other.data();
            a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect()
        };
        Ok(Tensor::from_op(
            Op::Add,
            vec![self.clone(), other.clone()],
            out,
            self.shape().to_vec(),
        ))
    }

    /// Broadcast a rank-1 bias over the last axis.
    pub fn add_bias(&self, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let c = *self.shape().last().ok_or_else(|| {
            MagnetError::Shape("add_bias: scalar tensors have no channel axis".into())
        })?;
        if bias.shape() != [c] {
            return Err(MagnetError::Shape(format!(
                "add_bias: bias shape {:?} does not match channel count {c}",
                bias.shape()
            )));
        }
        let out = {
            let a = self.data();
            let b = bias.data();
            let mut out = Vec::with_capacity(a.len());
            for row in a.chunks_exact(c) {
                for (x, y) in row.iter().zip(b.iter()) {
                    out.push(*x + *y);
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::AddBias,
            vec![self.clone(), bias.clone()],
            out,
            self.shape().to_vec(),
        ))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape() != other.shape() {
            return Err(MagnetError::Shape(format!(
                "mul: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        let out = {
            let a = self.data();
            let b = other.data();
            a.iter().zip(b.iter()).map(|(&x, &y)| x * y).collect()
        };
        Ok(Tensor::from_op(
            Op::Mul,
            vec![self.clone(), other.clone()],
            out,
            self.shape().to_vec(),
        ))
    }

    /// Multiply by a map whose last axis is 1, broadcast over the last axis
    /// (used for spatial attention maps over channels).
    pub fn mul_broadcast_last(&self, map: &Tensor<T>) -> Result<Tensor<T>> {
        let c = *self.shape().last().ok_or_else(|| {
            MagnetError::Shape("mul_broadcast_last: scalar lhs".into())
        })?;
        let lead = &self.shape()[..self.shape().len() - 1];
        let map_lead = if map.shape().is_empty() {
            &[][..]
        } else {
            &map.shape()[..map.shape().len() - 1]
        };
        if map.shape().last() != Some(&1) || map_lead != lead {
            return Err(MagnetError::Shape(format!(
                "mul_broadcast_last: map shape {:?} does not broadcast over {:?}",
                map.shape(),
                self.shape()
            )));
        }
        let out = {
            let a = self.data();
            let m = map.data();
            let mut out = Vec::with_capacity(a.len());
            for (row, &s) in a.chunks_exact(c).zip(m.iter()) {
                for &x in row {
                    out.push(x * s);
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::MulBroadcastLast,
            vec![self.clone(), map.clone()],
            out,
            self.shape().to_vec(),
        ))
    }

    /// Multiply every element by a constant.
    pub fn mul_scalar(&self, s: T) -> Tensor<T> {
        let out = self.data().iter().map(|&x| x * s).collect();
        Tensor::from_op(Op::MulScalar(s), vec![self.clone()], out, self.shape().to_vec())
    }

    /// Rank-2 matrix product `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape().len() != 2 || other.shape().len() != 2 {
            return Err(MagnetError::Shape(format!(
                "matmul: expected rank-2 operands, got {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, k) = (self.shape()[0], self.shape()[1]);
        let (k2, n) = (other.shape()[0], other.shape()[1]);
        if k != k2 {
            return Err(MagnetError::Shape(format!(
                "matmul: inner dimensions {k} and {k2} differ"
            )));
        }
        let out = {
            let a = self.data();
            let b = other.data();
            let mut out = vec![T::zero(); m * n];
            for i in 0..m {
                let arow = &a[i * k..(i + 1) * k];
                let orow = &mut out[i * n..(i + 1) * n];
                for (p, &av) in arow.iter().enumerate() {
                    let brow = &b[p * n..(p + 1) * n];
                    for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                        *o = *o + av * bv;
                    }
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::Matmul,
            vec![self.clone(), other.clone()],
            out,
            vec![m, n],
        ))
    }

    pub fn relu(&self) -> Tensor<T> {
        let out = self
            .data()
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        Tensor::from_op(Op::Relu, vec![self.clone()], out, self.shape().to_vec())
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        let out = self
            .data()
            .iter()
            .map(|&x| T::one() / (T::one() + (-x).exp()))
            .collect();
        Tensor::from_op(Op::Sigmoid, vec![self.clone()], out, self.shape().to_vec())
    }

    /// Softmax along `axis`; outputs are positive and sum to 1 per lane.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        if axis >= self.shape().len() {
            return Err(MagnetError::Shape(format!(
                "softmax: axis {axis} out of range for shape {:?}",
                self.shape()
            )));
        }
        let alen = self.shape()[axis];
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let outer: usize = self.shape()[..axis].iter().product();
        let out = {
            let x = self.data();
            let mut out = vec![T::zero(); x.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |a: usize| (o * alen + a) * inner + i;
                    let mut maxv = x[idx(0)];
                    for a in 1..alen {
                        if x[idx(a)] > maxv {
                            maxv = x[idx(a)];
                        }
                    }
                    let mut denom = T::zero();
                    for a in 0..alen {
                        let e = (x[idx(a)] - maxv).exp();
                        out[idx(a)] = e;
                        denom = denom + e;
                    }
                    for a in 0..alen {
                        out[idx(a)] = out[idx(a)] / denom;
                    }
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::Softmax { axis },
            vec![self.clone()],
            out,
            self.shape().to_vec(),
        ))
    }

    /// 2-d convolution, stride 1, odd kernel, NHWC layout.
    ///
    /// `kernel` is `[f, f, cin, cout]`; `bias`, when present, is `[cout]`.
    pub fn conv2d(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        padding: Padding,
    ) -> Result<Tensor<T>> {
        let (b, h, w, cin) = dims4(self.shape())?;
        if kernel.shape().len() != 4 || kernel.shape()[0] != kernel.shape()[1] {
            return Err(MagnetError::Shape(format!(
                "conv2d: kernel must be [f, f, cin, cout], got {:?}",
                kernel.shape()
            )));
        }
        let f = kernel.shape()[0];
        if f % 2 == 0 {
            return Err(MagnetError::Config(format!(
                "conv2d: kernel size must be odd, got {f}"
            )));
        }
        if kernel.shape()[2] != cin {
            return Err(MagnetError::Shape(format!(
                "conv2d: kernel expects {} input channels, tensor has {cin}",
                kernel.shape()[2]
            )));
        }
        let cout = kernel.shape()[3];
        if let Some(bt) = bias {
            if bt.shape() != [cout] {
                return Err(MagnetError::Shape(format!(
                    "conv2d: bias shape {:?} does not match {cout} output channels",
                    bt.shape()
                )));
            }
        }
        let (oh, ow, pad) = match padding {
            Padding::Same => (h, w, (f - 1) / 2),
            Padding::Valid => {
                if h < f || w < f {
                    return Err(MagnetError::Shape(format!(
                        "conv2d: valid padding needs input of at least {f}x{f}, got {h}x{w}"
                    )));
                }
                (h - f + 1, w - f + 1, 0)
            }
        };
        let out = {
            let x = self.data();
            let k = kernel.data();
            let mut out = vec![T::zero(); b * oh * ow * cout];
            if let Some(bt) = bias {
                let bv = bt.data();
                for row in out.chunks_exact_mut(cout) {
                    row.copy_from_slice(&bv);
                }
            }
            for bi in 0..b {
                for oy in 0..oh {
                    for ky in 0..f {
                        let iy = oy + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let iy = iy - pad;
                        for ox in 0..ow {
                            let orow_base = ((bi * oh + oy) * ow + ox) * cout;
                            for kx in 0..f {
                                let ix = ox + kx;
                                if ix < pad || ix - pad >= w {
                                    continue;
                                }
                                let ix = ix - pad;
                                let xrow = &x[((bi * h + iy) * w + ix) * cin..][..cin];
                                let kbase = ((ky * f + kx) * cin) * cout;
                                let orow = &mut out[orow_base..orow_base + cout];
                                for (ci, &xv) in xrow.iter().enumerate() {
                                    let krow = &k[kbase + ci * cout..][..cout];
                                    for (o, &kv) in orow.iter_mut().zip(krow.iter()) {
                                        *o = *o + xv * kv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            out
        };
        let mut parents = vec![self.clone(), kernel.clone()];
        if let Some(bt) = bias {
            parents.push(bt.clone());
        }
        Ok(Tensor::from_op(
            Op::Conv2d { padding },
            parents,
            out,
            vec![b, oh, ow, cout],
        ))
    }

    /// Per-channel spatial convolution, stride 1, same padding.
    ///
    /// `kernel` is `[f, f, c]`; output channel `i` depends only on input
    /// channel `i`.
    pub fn depthwise_conv2d(&self, kernel: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, h, w, c) = dims4(self.shape())?;
        if kernel.shape().len() != 3 || kernel.shape()[0] != kernel.shape()[1] {
            return Err(MagnetError::Shape(format!(
                "depthwise_conv2d: kernel must be [f, f, c], got {:?}",
                kernel.shape()
            )));
        }
        let f = kernel.shape()[0];
        if f % 2 == 0 {
            return Err(MagnetError::Config(format!(
                "depthwise_conv2d: kernel size must be odd, got {f}"
            )));
        }
        if kernel.shape()[2] != c {
            return Err(MagnetError::Shape(format!(
                "depthwise_conv2d: kernel has {} channels, tensor has {c}",
                kernel.shape()[2]
            )));
        }
        let pad = (f - 1) / 2;
        let out = {
            let x = self.data();
            let k = kernel.data();
            let mut out = vec![T::zero(); b * h * w * c];
            for bi in 0..b {
                for oy in 0..h {
                    for ky in 0..f {
                        let iy = oy + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let iy = iy - pad;
                        for ox in 0..w {
                            let orow_base = ((bi * h + oy) * w + ox) * c;
                            for kx in 0..f {
                                let ix = ox + kx;
                                if ix < pad || ix - pad >= w {
                                    continue;
                                }
                                let ix = ix - pad;
                                let xrow = &x[((bi * h + iy) * w + ix) * c..][..c];
                                let krow = &k[(ky * f + kx) * c..][..c];
                                let orow = &mut out[orow_base..orow_base + c];
                                for ((o, &xv), &kv) in
                                    orow.iter_mut().zip(xrow.iter()).zip(krow.iter())
                                {
                                    *o = *o + xv * kv;
                                }
                            }
                        }
                    }
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::DepthwiseConv2d,
            vec![self.clone(), kernel.clone()],
            out,
            vec![b, h, w, c],
        ))
    }

    /// 2x2 max pooling with stride 2. Height and width must be even.
    pub fn max_pool2d(&self) -> Result<Tensor<T>> {
        let (b, h, w, c) = dims4(self.shape())?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(MagnetError::Shape(format!(
                "max_pool2d: spatial dims must be even, got {h}x{w}"
            )));
        }
        let (oh, ow) = (h / 2, w / 2);
        let (out, argmax) = {
            let x = self.data();
            let mut out = vec![T::zero(); b * oh * ow * c];
            let mut argmax = vec![0usize; out.len()];
            for bi in 0..b {
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ci in 0..c {
                            let mut best = T::neg_infinity();
                            let mut best_idx = 0usize;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let idx =
                                        ((bi * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ci;
                                    if x[idx] > best {
                                        best = x[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            let oidx = ((bi * oh + oy) * ow + ox) * c + ci;
                            out[oidx] = best;
                            argmax[oidx] = best_idx;
                        }
                    }
                }
            }
            (out, argmax)
        };
        Ok(Tensor::from_op(
            Op::MaxPool2d { argmax },
            vec![self.clone()],
            out,
            vec![b, oh, ow, c],
        ))
    }

    /// Nearest-neighbor spatial upsampling by a factor of 2.
    pub fn upsample_nearest2d(&self) -> Result<Tensor<T>> {
        let (b, h, w, c) = dims4(self.shape())?;
        let (oh, ow) = (2 * h, 2 * w);
        let out = {
            let x = self.data();
            let mut out = vec![T::zero(); b * oh * ow * c];
            for bi in 0..b {
                for oy in 0..oh {
                    let iy = oy / 2;
                    for ox in 0..ow {
                        let ix = ox / 2;
                        let src = ((bi * h + iy) * w + ix) * c;
                        let dst = ((bi * oh + oy) * ow + ox) * c;
                        out[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::UpsampleNearest2d,
            vec![self.clone()],
            out,
            vec![b, oh, ow, c],
        ))
    }

    /// Concatenate along the channel (last) axis.
    pub fn concat_channels(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, h, w, c1) = dims4(self.shape())?;
        let (b2, h2, w2, c2) = dims4(other.shape())?;
        if (b, h, w) != (b2, h2, w2) {
            return Err(MagnetError::Shape(format!(
                "concat_channels: leading dims {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        let out = {
            let a = self.data();
            let bd = other.data();
            let mut out = Vec::with_capacity(a.len() + bd.len());
            for (ra, rb) in a.chunks_exact(c1).zip(bd.chunks_exact(c2)) {
                out.extend_from_slice(ra);
                out.extend_from_slice(rb);
            }
            out
        };
        Ok(Tensor::from_op(
            Op::ConcatChannels { left_channels: c1 },
            vec![self.clone(), other.clone()],
            out,
            vec![b, h, w, c1 + c2],
        ))
    }

    /// Mean over the spatial axes: `[b, h, w, c] -> [b, c]`.
    pub fn global_avg_pool(&self) -> Result<Tensor<T>> {
        let (b, h, w, c) = dims4(self.shape())?;
        let inv = T::from_f64c(1.0 / (h * w) as f64);
        let out = {
            let x = self.data();
            let mut out = vec![T::zero(); b * c];
            for bi in 0..b {
                let obase = bi * c;
                for row in x[bi * h * w * c..(bi + 1) * h * w * c].chunks_exact(c) {
                    for (o, &v) in out[obase..obase + c].iter_mut().zip(row.iter()) {
                        *o = *o + v;
                    }
                }
                for o in out[obase..obase + c].iter_mut() {
                    *o = *o * inv;
                }
            }
            out
        };
        Ok(Tensor::from_op(
            Op::GlobalAvgPool,
            vec![self.clone()],
            out,
            vec![b, c],
        ))
    }

    /// Layer normalization over all non-batch axes, with per-channel affine.
    ///
    /// Each sample is normalized to mean 0 / variance 1 across every non-batch
    /// element, then scaled by `gamma` and shifted by `beta` (both `[channels]`,
    /// the last axis).
    pub fn layer_norm(&self, gamma: &Tensor<T>, beta: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
        if eps <= T::zero() {
            return Err(MagnetError::Config(format!(
                "layer_norm: eps must be positive, got {eps}"
            )));
        }
        if self.shape().len() < 2 {
            return Err(MagnetError::Shape(format!(
                "layer_norm: need at least (batch, features), got {:?}",
                self.shape()
            )));
        }
        let batch = self.shape()[0];
        let c = *self.shape().last().unwrap();
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(MagnetError::Shape(format!(
                "layer_norm: gamma {:?} / beta {:?} must both be [{c}]",
                gamma.shape(),
                beta.shape()
            )));
        }
        let n = self.numel() / batch;
        let inv_n = T::from_f64c(1.0 / n as f64);
        let (out, means, inv_stds) = {
            let x = self.data();
            let g = gamma.data();
            let bt = beta.data();
            let mut out = vec![T::zero(); x.len()];
            let mut means = Vec::with_capacity(batch);
            let mut inv_stds = Vec::with_capacity(batch);
            for bi in 0..batch {
                let sample = &x[bi * n..(bi + 1) * n];
                let mean = sample.iter().copied().sum::<T>() * inv_n;
                let var = sample
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .sum::<T>()
                    * inv_n;
                let inv_std = T::one() / (var + eps).sqrt();
                means.push(mean);
                inv_stds.push(inv_std);
                let orow = &mut out[bi * n..(bi + 1) * n];
                for (j, (&v, o)) in sample.iter().zip(orow.iter_mut()).enumerate() {
                    let norm = (v - mean) * inv_std;
                    let ci = j % c;
                    *o = g[ci] * norm + bt[ci];
                }
            }
            (out, means, inv_stds)
        };
        Ok(Tensor::from_op(
            Op::LayerNorm {
                mean: means,
                inv_std: inv_stds,
            },
            vec![self.clone(), gamma.clone(), beta.clone()],
            out,
            self.shape().to_vec(),
        ))
    }

    /// Fully connected layer: `x [b, in] x w [in, out] + bias [out]`.
    pub fn dense(&self, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
        self.matmul(weights)?.add_bias(bias)
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum(&self) -> Tensor<T> {
        let total = self.data().iter().copied().sum::<T>();
        Tensor::from_op(Op::Sum, vec![self.clone()], vec![total], Vec::new())
    }

    /// Mean of all elements, as a scalar tensor.
    pub fn mean(&self) -> Tensor<T> {
        let inv = T::from_f64c(1.0 / self.numel() as f64);
        let total = self.data().iter().copied().sum::<T>() * inv;
        Tensor::from_op(Op::Mean, vec![self.clone()], vec![total], Vec::new())
    }

    /// Binary cross entropy between predicted probabilities and a {0,1}
    /// target of the same shape, averaged over all elements. Predictions are
    /// clamped to `[eps, 1-eps]` before the logs.
    pub fn bce_with(&self, target: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
        if self.shape() != target.shape() {
            return Err(MagnetError::Shape(format!(
                "bce: prediction shape {:?} and target shape {:?} differ",
                self.shape(),
                target.shape()
            )));
        }
        if target.requires_grad() {
            return Err(MagnetError::Contract(
                "bce: targets must not require gradients".into(),
            ));
        }
        let n = self.numel();
        if n == 0 {
            return Err(MagnetError::Shape("bce: empty tensors".into()));
        }
        let loss = {
            let p = self.data();
            let y = target.data();
            for &v in y.iter() {
                if v != T::zero() && v != T::one() {
                    return Err(MagnetError::Contract(format!(
                        "bce: target values must be 0 or 1, found {v}"
                    )));
                }
            }
            let lo = eps;
            let hi = T::one() - eps;
            let mut acc = T::zero();
            for (&pv, &yv) in p.iter().zip(y.iter()) {
                let pc = pv.max(lo).min(hi);
                acc = acc + yv * pc.ln() + (T::one() - yv) * (T::one() - pc).ln();
            }
            -acc * T::from_f64c(1.0 / n as f64)
        };
        Ok(Tensor::from_op(
            Op::BceLoss { eps },
            vec![self.clone(), target.clone()],
            vec![loss],
            Vec::new(),
        ))
    }

    /// Categorical cross entropy between predicted class probabilities
    /// `[b, C]` and one-hot targets `[b, C]`, averaged over the batch.
    pub fn ce_with(&self, target: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
        if self.shape().len() != 2 || self.shape() != target.shape() {
            return Err(MagnetError::Shape(format!(
                "ce: need matching [batch, classes] tensors, got {:?} and {:?}",
                self.shape(),
                target.shape()
            )));
        }
        if target.requires_grad() {
            return Err(MagnetError::Contract(
                "ce: targets must not require gradients".into(),
            ));
        }
        let (b, c) = (self.shape()[0], self.shape()[1]);
        if b == 0 {
            return Err(MagnetError::Shape("ce: empty batch".into()));
        }
        let loss = {
            let p = self.data();
            let t = target.data();
            for row in t.chunks_exact(c) {
                let ones = row.iter().filter(|&&v| v == T::one()).count();
                let zeros = row.iter().filter(|&&v| v == T::zero()).count();
                if ones != 1 || zeros != c - 1 {
                    return Err(MagnetError::Contract(format!(
                        "ce: target row {row:?} is not one-hot"
                    )));
                }
            }
            let lo = eps;
            let hi = T::one() - eps;
            let mut acc = T::zero();
            for (&pv, &tv) in p.iter().zip(t.iter()) {
                if tv == T::one() {
                    let pc = pv.max(lo).min(hi);
                    acc = acc + pc.ln();
                }
            }
            -acc * T::from_f64c(1.0 / b as f64)
        };
        Ok(Tensor::from_op(
            Op::CeLoss { eps },
            vec![self.clone(), target.clone()],
            vec![loss],
            Vec::new(),
        ))
    }
}

pub(crate) fn conv_dims(
    input_shape: &[usize],
    kernel_shape: &[usize],
    padding: Padding,
) -> (usize, usize, usize, usize, usize, usize, usize, usize) {
    // (b, h, w, cin, f, oh, ow, pad) — shapes were validated in forward.
    let (b, h, w, cin) = (
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    );
    let f = kernel_shape[0];
    let (oh, ow, pad) = match padding {
        Padding::Same => (h, w, (f - 1) / 2),
        Padding::Valid => (h - f + 1, w - f + 1, 0),
    };
    (b, h, w, cin, f, oh, ow, pad)
}

pub(crate) fn numel_check<T: Element>(t: &Tensor<T>) -> usize {
    numel_of(t.shape())
}
