//! Reverse-mode differentiation: graph tracing and the per-primitive
//! backward rules.

use std::collections::HashSet;

use super::ops::{conv_dims, Op};
use super::{Element, Tensor};
use crate::error::{MagnetError, Result};

/// Topologically ordered record of the primitive applications reachable from
/// one root tensor: every node's operands precede it in `nodes`.
pub struct Graph<T: Element> {
    nodes: Vec<Tensor<T>>,
}

enum Visit<T: Element> {
    Enter(Tensor<T>),
    Exit(Tensor<T>),
}

impl<T: Element> Graph<T> {
    /// Trace the graph that produced `root`.
    pub fn trace(root: &Tensor<T>) -> Self {
        let mut nodes = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![Visit::Enter(root.clone())];
        while let Some(visit) = stack.pop() {
            match visit {
                Visit::Enter(t) => {
                    if !seen.insert(t.id()) {
                        continue;
                    }
                    stack.push(Visit::Exit(t.clone()));
                    for p in t.parents() {
                        if !seen.contains(&p.id()) {
                            stack.push(Visit::Enter(p.clone()));
                        }
                    }
                }
                Visit::Exit(t) => nodes.push(t),
            }
        }
        Graph { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in topological order (operands before consumers).
    pub fn nodes(&self) -> &[Tensor<T>] {
        &self.nodes
    }
}

/// Run the chain rule from a scalar loss, accumulating into every
/// `requires_grad` tensor in its graph.
pub(crate) fn backward<T: Element>(loss: &Tensor<T>) -> Result<()> {
    if loss.numel() != 1 {
        return Err(MagnetError::Contract(format!(
            "backward requires a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }
    if !loss.requires_grad() {
        // Nothing in the graph tracks gradients.
        return Ok(());
    }
    let graph = Graph::trace(loss);
    loss.accumulate_grad(&[T::one()]);
    for node in graph.nodes().iter().rev() {
        if !node.requires_grad() {
            continue;
        }
        let grad_ref = node.inner.grad.borrow();
        let Some(gout) = grad_ref.as_ref() else {
            continue;
        };
        step_backward(node, gout)?;
    }
    Ok(())
}

fn wants_grad<T: Element>(t: &Tensor<T>) -> bool {
    t.requires_grad()
}

#[allow(clippy::too_many_lines)]
fn step_backward<T: Element>(node: &Tensor<T>, gout: &[T]) -> Result<()> {
    let parents = node.parents();
    match &node.inner.op {
        Op::Leaf => {}
        Op::Add => {
            for p in parents {
                if wants_grad(p) {
                    p.accumulate_grad(gout);
                }
            }
        }
        Op::AddBias => {
            let (x, bias) = (&parents[0], &parents[1]);
            if wants_grad(x) {
                x.accumulate_grad(gout);
            }
            if wants_grad(bias) {
                let c = bias.numel();
                let mut db = vec![T::zero(); c];
                for row in gout.chunks_exact(c) {
                    for (d, &g) in db.iter_mut().zip(row.iter()) {
                        *d = *d + g;
                    }
                }
                bias.accumulate_grad(&db);
            }
        }
        Op::Mul => {
            let (a, b) = (&parents[0], &parents[1]);
            if wants_grad(a) {
                let bd = b.data();
                let da: Vec<T> = gout.iter().zip(bd.iter()).map(|(&g, &v)| g * v).collect();
                drop(bd);
                a.accumulate_grad(&da);
            }
            if wants_grad(b) {
                let ad = a.data();
                let db: Vec<T> = gout.iter().zip(ad.iter()).map(|(&g, &v)| g * v).collect();
                drop(ad);
                b.accumulate_grad(&db);
            }
        }
        Op::MulBroadcastLast => {
            let (a, map) = (&parents[0], &parents[1]);
            let c = *a.shape().last().unwrap();
            if wants_grad(a) {
                let md = map.data();
                let mut da = vec![T::zero(); a.numel()];
                for ((drow, grow), &m) in
                    da.chunks_exact_mut(c).zip(gout.chunks_exact(c)).zip(md.iter())
                {
                    for (d, &g) in drow.iter_mut().zip(grow.iter()) {
                        *d = g * m;
                    }
                }
                drop(md);
                a.accumulate_grad(&da);
            }
            if wants_grad(map) {
                let ad = a.data();
                let mut dm = vec![T::zero(); map.numel()];
                for ((arow, grow), d) in
                    ad.chunks_exact(c).zip(gout.chunks_exact(c)).zip(dm.iter_mut())
                {
                    let mut acc = T::zero();
                    for (&av, &g) in arow.iter().zip(grow.iter()) {
                        acc = acc + av * g;
                    }
                    *d = acc;
                }
                drop(ad);
                map.accumulate_grad(&dm);
            }
        }
        Op::MulScalar(s) => {
            let a = &parents[0];
            if wants_grad(a) {
                let da: Vec<T> = gout.iter().map(|&g| g * *s).collect();
                a.accumulate_grad(&da);
            }
        }
        Op::Matmul => {
            let (a, b) = (&parents[0], &parents[1]);
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            if wants_grad(a) {
                let bd = b.data();
                let mut da = vec![T::zero(); m * k];
                for i in 0..m {
                    let grow = &gout[i * n..(i + 1) * n];
                    let darow = &mut da[i * k..(i + 1) * k];
                    for (p, d) in darow.iter_mut().enumerate() {
                        let brow = &bd[p * n..(p + 1) * n];
                        let mut acc = T::zero();
                        for (&g, &bv) in grow.iter().zip(brow.iter()) {
                            acc = acc + g * bv;
                        }
                        *d = acc;
                    }
                }
                drop(bd);
                a.accumulate_grad(&da);
            }
            if wants_grad(b) {
                let ad = a.data();
                let mut db = vec![T::zero(); k * n];
                for i in 0..m {
                    let arow = &ad[i * k..(i + 1) * k];
                    let grow = &gout[i * n..(i + 1) * n];
                    for (p, &av) in arow.iter().enumerate() {
                        let dbrow = &mut db[p * n..(p + 1) * n];
                        for (d, &g) in dbrow.iter_mut().zip(grow.iter()) {
                            *d = *d + av * g;
                        }
                    }
                }
                drop(ad);
                b.accumulate_grad(&db);
            }
        }
        Op::Relu => {
            let a = &parents[0];
            if wants_grad(a) {
                let ad = a.data();
                let da: Vec<T> = gout
                    .iter()
                    .zip(ad.iter())
                    .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                drop(ad);
                a.accumulate_grad(&da);
            }
        }
        Op::Sigmoid => {
            let a = &parents[0];
            if wants_grad(a) {
                let yd = node.data();
                let da: Vec<T> = gout
                    .iter()
                    .zip(yd.iter())
                    .map(|(&g, &y)| g * y * (T::one() - y))
                    .collect();
                drop(yd);
                a.accumulate_grad(&da);
            }
        }
        Op::Softmax { axis } => {
            let a = &parents[0];
            if wants_grad(a) {
                let shape = node.shape();
                let alen = shape[*axis];
                let inner: usize = shape[*axis + 1..].iter().product();
                let outer: usize = shape[..*axis].iter().product();
                let yd = node.data();
                let mut da = vec![T::zero(); a.numel()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |l: usize| (o * alen + l) * inner + i;
                        let mut dot = T::zero();
                        for l in 0..alen {
                            dot = dot + gout[idx(l)] * yd[idx(l)];
                        }
                        for l in 0..alen {
                            let j = idx(l);
                            da[j] = yd[j] * (gout[j] - dot);
                        }
                    }
                }
                drop(yd);
                a.accumulate_grad(&da);
            }
        }
        Op::Conv2d { padding } => {
            let input = &parents[0];
            let kernel = &parents[1];
            let (b, h, w, cin, f, oh, ow, pad) =
                conv_dims(input.shape(), kernel.shape(), *padding);
            let cout = kernel.shape()[3];
            let need_input = wants_grad(input);
            let need_kernel = wants_grad(kernel);
            if need_input || need_kernel {
                let xd = input.data();
                let kd = kernel.data();
                let mut dx = if need_input {
                    vec![T::zero(); input.numel()]
                } else {
                    Vec::new()
                };
                let mut dk = if need_kernel {
                    vec![T::zero(); kernel.numel()]
                } else {
                    Vec::new()
                };
                for bi in 0..b {
                    for oy in 0..oh {
                        for ky in 0..f {
                            let iy = oy + ky;
                            if iy < pad || iy - pad >= h {
                                continue;
                            }
                            let iy = iy - pad;
                            for ox in 0..ow {
                                let grow = &gout[((bi * oh + oy) * ow + ox) * cout..][..cout];
                                for kx in 0..f {
                                    let ix = ox + kx;
                                    if ix < pad || ix - pad >= w {
                                        continue;
                                    }
                                    let ix = ix - pad;
                                    let xbase = ((bi * h + iy) * w + ix) * cin;
                                    let kbase = ((ky * f + kx) * cin) * cout;
                                    if need_input {
                                        let dxrow = &mut dx[xbase..xbase + cin];
                                        for (ci, d) in dxrow.iter_mut().enumerate() {
                                            let krow = &kd[kbase + ci * cout..][..cout];
                                            let mut acc = T::zero();
                                            for (&g, &kv) in grow.iter().zip(krow.iter()) {
                                                acc = acc + g * kv;
                                            }
                                            *d = *d + acc;
                                        }
                                    }
                                    if need_kernel {
                                        let xrow = &xd[xbase..xbase + cin];
                                        for (ci, &xv) in xrow.iter().enumerate() {
                                            let dkrow = &mut dk[kbase + ci * cout..][..cout];
                                            for (d, &g) in dkrow.iter_mut().zip(grow.iter()) {
                                                *d = *d + xv * g;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                drop(xd);
                drop(kd);
                if need_input {
                    input.accumulate_grad(&dx);
                }
                if need_kernel {
                    kernel.accumulate_grad(&dk);
                }
            }
            if parents.len() == 3 && wants_grad(&parents[2]) {
                let mut db = vec![T::zero(); cout];
                for row in gout.chunks_exact(cout) {
                    for (d, &g) in db.iter_mut().zip(row.iter()) {
                        *d = *d + g;
                    }
                }
                parents[2].accumulate_grad(&db);
            }
        }
        Op::DepthwiseConv2d => {
            let input = &parents[0];
            let kernel = &parents[1];
            let (b, h, w, c) = (
                input.shape()[0],
                input.shape()[1],
                input.shape()[2],
                input.shape()[3],
            );
            let f = kernel.shape()[0];
            let pad = (f - 1) / 2;
            let need_input = wants_grad(input);
            let need_kernel = wants_grad(kernel);
            if need_input || need_kernel {
                let xd = input.data();
                let kd = kernel.data();
                let mut dx = if need_input {
                    vec![T::zero(); input.numel()]
                } else {
                    Vec::new()
                };
                let mut dk = if need_kernel {
                    vec![T::zero(); kernel.numel()]
                } else {
                    Vec::new()
                };
                for bi in 0..b {
                    for oy in 0..h {
                        for ky in 0..f {
                            let iy = oy + ky;
                            if iy < pad || iy - pad >= h {
                                continue;
                            }
                            let iy = iy - pad;
                            for ox in 0..w {
                                let grow = &gout[((bi * h + oy) * w + ox) * c..][..c];
                                for kx in 0..f {
                                    let ix = ox + kx;
                                    if ix < pad || ix - pad >= w {
                                        continue;
                                    }
                                    let ix = ix - pad;
                                    let xbase = ((bi * h + iy) * w + ix) * c;
                                    let krow = &kd[(ky * f + kx) * c..][..c];
                                    if need_input {
                                        let dxrow = &mut dx[xbase..xbase + c];
                                        for ((d, &g), &kv) in
                                            dxrow.iter_mut().zip(grow.iter()).zip(krow.iter())
                                        {
                                            *d = *d + g * kv;
                                        }
                                    }
                                    if need_kernel {
                                        let xrow = &xd[xbase..xbase + c];
                                        let dkrow = &mut dk[(ky * f + kx) * c..][..c];
                                        for ((d, &g), &xv) in
                                            dkrow.iter_mut().zip(grow.iter()).zip(xrow.iter())
                                        {
                                            *d = *d + g * xv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                drop(xd);
                drop(kd);
                if need_input {
                    input.accumulate_grad(&dx);
                }
                if need_kernel {
                    kernel.accumulate_grad(&dk);
                }
            }
        }
        Op::MaxPool2d { argmax } => {
            let a = &parents[0];
            if wants_grad(a) {
                let mut da = vec![T::zero(); a.numel()];
                for (&g, &src) in gout.iter().zip(argmax.iter()) {
                    da[src] = da[src] + g;
                }
                a.accumulate_grad(&da);
            }
        }
        Op::UpsampleNearest2d => {
            let a = &parents[0];
            if wants_grad(a) {
                let (b, h, w, c) = (
                    a.shape()[0],
                    a.shape()[1],
                    a.shape()[2],
                    a.shape()[3],
                );
                let (oh, ow) = (2 * h, 2 * w);
                let mut da = vec![T::zero(); a.numel()];
                for bi in 0..b {
                    for oy in 0..oh {
                        let iy = oy / 2;
                        for ox in 0..ow {
                            let ix = ox / 2;
                            let src = ((bi * h + iy) * w + ix) * c;
                            let dst = ((bi * oh + oy) * ow + ox) * c;
                            for ci in 0..c {
                                da[src + ci] = da[src + ci] + gout[dst + ci];
                            }
                        }
                    }
                }
                a.accumulate_grad(&da);
            }
        }
        Op::ConcatChannels { left_channels } => {
            let (a, b) = (&parents[0], &parents[1]);
            let c1 = *left_channels;
            let ctot = *node.shape().last().unwrap();
            let c2 = ctot - c1;
            if wants_grad(a) {
                let mut da = Vec::with_capacity(a.numel());
                for row in gout.chunks_exact(ctot) {
                    da.extend_from_slice(&row[..c1]);
                }
                a.accumulate_grad(&da);
            }
            if wants_grad(b) {
                let mut db = Vec::with_capacity(b.numel());
                for row in gout.chunks_exact(ctot) {
                    db.extend_from_slice(&row[c1..c1 + c2]);
                }
                b.accumulate_grad(&db);
            }
        }
        Op::GlobalAvgPool => {
            let a = &parents[0];
            if wants_grad(a) {
                let (b, h, w, c) = (
                    a.shape()[0],
                    a.shape()[1],
                    a.shape()[2],
                    a.shape()[3],
                );
                let inv = T::from_f64c(1.0 / (h * w) as f64);
                let mut da = vec![T::zero(); a.numel()];
                for bi in 0..b {
                    let grow = &gout[bi * c..(bi + 1) * c];
                    for row in da[bi * h * w * c..(bi + 1) * h * w * c].chunks_exact_mut(c) {
                        for (d, &g) in row.iter_mut().zip(grow.iter()) {
                            *d = g * inv;
                        }
                    }
                }
                a.accumulate_grad(&da);
            }
        }
        Op::LayerNorm { mean, inv_std } => {
            let (x, gamma, beta) = (&parents[0], &parents[1], &parents[2]);
            let batch = x.shape()[0];
            let c = *x.shape().last().unwrap();
            let n = x.numel() / batch;
            let inv_n = T::from_f64c(1.0 / n as f64);
            let xd = x.data();
            let gd = gamma.data();
            let need_x = wants_grad(x);
            let need_gamma = wants_grad(gamma);
            let need_beta = wants_grad(beta);
            let mut dx = if need_x { vec![T::zero(); x.numel()] } else { Vec::new() };
            let mut dgamma = vec![T::zero(); c];
            let mut dbeta = vec![T::zero(); c];
            for bi in 0..batch {
                let xs = &xd[bi * n..(bi + 1) * n];
                let gs = &gout[bi * n..(bi + 1) * n];
                let mu = mean[bi];
                let is = inv_std[bi];
                if need_gamma || need_beta {
                    for (j, (&g, &xv)) in gs.iter().zip(xs.iter()).enumerate() {
                        let ci = j % c;
                        dbeta[ci] = dbeta[ci] + g;
                        dgamma[ci] = dgamma[ci] + g * (xv - mu) * is;
                    }
                }
                if need_x {
                    // dxhat = g * gamma_c; dx = is*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
                    let mut s1 = T::zero();
                    let mut s2 = T::zero();
                    for (j, (&g, &xv)) in gs.iter().zip(xs.iter()).enumerate() {
                        let dxh = g * gd[j % c];
                        let xh = (xv - mu) * is;
                        s1 = s1 + dxh;
                        s2 = s2 + dxh * xh;
                    }
                    s1 = s1 * inv_n;
                    s2 = s2 * inv_n;
                    let dxs = &mut dx[bi * n..(bi + 1) * n];
                    for (j, (d, (&g, &xv))) in
                        dxs.iter_mut().zip(gs.iter().zip(xs.iter())).enumerate()
                    {
                        let dxh = g * gd[j % c];
                        let xh = (xv - mu) * is;
                        *d = is * (dxh - s1 - xh * s2);
                    }
                }
            }
            drop(xd);
            drop(gd);
            if need_x {
                x.accumulate_grad(&dx);
            }
            if need_gamma {
                gamma.accumulate_grad(&dgamma);
            }
            if need_beta {
                beta.accumulate_grad(&dbeta);
            }
        }
        Op::Sum => {
            let a = &parents[0];
            if wants_grad(a) {
                let da = vec![gout[0]; a.numel()];
                a.accumulate_grad(&da);
            }
        }
        Op::Mean => {
            let a = &parents[0];
            if wants_grad(a) {
                let g = gout[0] * T::from_f64c(1.0 / a.numel() as f64);
                let da = vec![g; a.numel()];
                a.accumulate_grad(&da);
            }
        }
        Op::BceLoss { eps } => {
            let (pred, target) = (&parents[0], &parents[1]);
            if wants_grad(pred) {
                let pd = pred.data();
                let td = target.data();
                let n = pred.numel();
                let scale = gout[0] * T::from_f64c(-1.0 / n as f64);
                let lo = *eps;
                let hi = T::one() - *eps;
                let da: Vec<T> = pd
                    .iter()
                    .zip(td.iter())
                    .map(|(&p, &y)| {
                        if p <= lo || p >= hi {
                            T::zero() // clamp active: flat
                        } else {
                            scale * (y / p - (T::one() - y) / (T::one() - p))
                        }
                    })
                    .collect();
                drop(pd);
                drop(td);
                pred.accumulate_grad(&da);
            }
        }
        Op::CeLoss { eps } => {
            let (pred, target) = (&parents[0], &parents[1]);
            if wants_grad(pred) {
                let pd = pred.data();
                let td = target.data();
                let b = pred.shape()[0];
                let scale = gout[0] * T::from_f64c(-1.0 / b as f64);
                let lo = *eps;
                let hi = T::one() - *eps;
                let da: Vec<T> = pd
                    .iter()
                    .zip(td.iter())
                    .map(|(&p, &t)| {
                        if t == T::one() && p > lo && p < hi {
                            scale / p
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                drop(pd);
                drop(td);
                pred.accumulate_grad(&da);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_orders_operands_before_consumers() {
        let x = Tensor::param(vec![1.0f64, 2.0], &[2]).unwrap();
        let y = x.mul(&x).unwrap();
        let z = y.add(&x).unwrap();
        let loss = z.sum();
        let graph = Graph::trace(&loss);
        let pos: std::collections::HashMap<u64, usize> = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id(), i))
            .collect();
        for node in graph.nodes() {
            for p in node.parents() {
                assert!(pos[&p.id()] < pos[&node.id()], "operand after consumer");
            }
        }
        // x, y, z, loss — each node appears exactly once.
        assert_eq!(graph.len(), 4);
    }
}
