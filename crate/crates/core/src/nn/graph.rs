//! Reverse-mode automatic differentiation over a recorded operation list.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the list in reverse, so node order is already a topological order.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-v).exp()),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Clone, Debug)]
enum Op<T: Scalar> {
    Leaf,
    /// `x [B, in] · wᵀ [in, out] + b [out]`
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Activate {
        x: NodeId,
        act: Activation,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Sum(NodeId),
    Mean(NodeId),
    /// Inner product with a constant of the same length.
    DotConst {
        a: NodeId,
        weights: Vec<T>,
    },
    /// Softmax over consecutive groups of `classes` entries.
    GroupSoftmax {
        a: NodeId,
        classes: usize,
    },
    /// Each group of `table.len()` entries contracted with `table`.
    GroupDot {
        a: NodeId,
        table: Vec<T>,
    },
    /// Rows of a `[K, d]` node picked by index, giving `[B, d]`; `None`
    /// picks a row of zeros.
    GatherRows {
        a: NodeId,
        rows: Vec<Option<usize>>,
    },
    Reshape(NodeId),
    Detach,
    /// Carries an externally supplied value; gradient passes to `a` unchanged.
    StraightThrough(NodeId),
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Recorded computation for one forward pass.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every recorded node.
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` when the node does not influence the loss or does not require grad.
    pub fn get(&self, id: NodeId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// The gradient, or zeros of length `len` when the node is unreachable.
    pub fn get_or_zero(&self, id: NodeId, len: usize) -> Vec<T> {
        self.get(id).map_or_else(|| vec![T::zero(); len], <[T]>::to_vec)
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// A constant input; receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value.detached(), Op::Leaf, false)
    }

    /// A leaf whose gradient is tracked (parameters, differentiable inputs).
    pub fn variable(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value.detached(), Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn same_len(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::Dimension(format!("{what}: lengths {la} vs {lb}")));
        }
        Ok(())
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.shape().len() != 2 {
            return Err(Error::Dimension("weight must be 2-D".into()));
        }
        let (out, inp) = (wv.shape()[0], wv.shape()[1]);
        let width = *xv.shape().last().unwrap_or(&0);
        if width != inp || xv.len() % inp.max(1) != 0 {
            return Err(Error::Dimension(format!(
                "input width {width} does not match layer input {inp}"
            )));
        }
        if bv.len() != out {
            return Err(Error::Dimension(format!(
                "bias length {} does not match layer output {out}",
                bv.len()
            )));
        }
        let rows = xv.len() / inp;
        let (xd, wd, bd) = (xv.data(), wv.data(), bv.data());
        let mut y = Vec::with_capacity(rows * out);
        for r in 0..rows {
            let xr = &xd[r * inp..(r + 1) * inp];
            for o in 0..out {
                let wr = &wd[o * inp..(o + 1) * inp];
                let mut acc = bd[o];
                for (a, b) in xr.iter().zip(wr) {
                    acc += *a * *b;
                }
                y.push(acc);
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        let value = Tensor::new(vec![rows, out], y)?;
        Ok(self.push(value, Op::Linear { x, w, b }, rg))
    }

    pub fn activate(&mut self, x: NodeId, act: Activation) -> NodeId {
        let xv = self.value(x);
        let data = xv.data().iter().map(|v| act.apply(*v)).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Activate { x, act }, rg)
    }

    fn zip_with(&mut self, a: NodeId, b: NodeId, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<NodeId> {
        self.same_len(a, b, "elementwise op")?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: NodeId, k: T) -> NodeId {
        let av = self.value(a);
        let data = av.data().iter().map(|v| *v * k).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, k), rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let n = T::of(av.len().max(1) as f64);
        let s: T = av.data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s / n), Op::Mean(a), rg)
    }

    /// Squared Euclidean norm of `a - b`.
    pub fn squared_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.sum(sq))
    }

    pub fn dot_const(&mut self, a: NodeId, weights: Vec<T>) -> Result<NodeId> {
        let av = self.value(a);
        if av.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "dot with constant: lengths {} vs {}",
                av.len(),
                weights.len()
            )));
        }
        let s = av.data().iter().zip(&weights).map(|(x, w)| *x * *w).sum();
        let rg = self.rg(a);
        Ok(self.push(Tensor::scalar(s), Op::DotConst { a, weights }, rg))
    }

    pub fn group_softmax(&mut self, a: NodeId, classes: usize) -> Result<NodeId> {
        let av = self.value(a);
        if classes == 0 || !av.len().is_multiple_of(classes) {
            return Err(Error::Dimension(format!(
                "length {} is not a multiple of {classes}",
                av.len()
            )));
        }
        let mut data = Vec::with_capacity(av.len());
        for chunk in av.data().chunks(classes) {
            let m = chunk.iter().copied().fold(T::neg_infinity(), T::max);
            let e: Vec<T> = chunk.iter().map(|v| (*v - m).exp()).collect();
            let z: T = e.iter().copied().sum();
            data.extend(e.into_iter().map(|v| v / z));
        }
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::GroupSoftmax { a, classes }, rg))
    }

    /// Contracts each group of `table.len()` trailing entries with `table`.
    /// A `[B, cells * classes]` input becomes `[B, cells]`.
    pub fn group_dot(&mut self, a: NodeId, table: Vec<T>) -> Result<NodeId> {
        let av = self.value(a);
        let k = table.len();
        if k == 0 || !av.len().is_multiple_of(k) {
            return Err(Error::Dimension(format!(
                "length {} is not a multiple of {k}",
                av.len()
            )));
        }
        let data: Vec<T> = av
            .data()
            .chunks(k)
            .map(|c| c.iter().zip(&table).map(|(p, t)| *p * *t).sum())
            .collect();
        let rows = av.rows();
        let shape = if av.shape().len() >= 2 {
            vec![rows, data.len() / rows]
        } else {
            vec![data.len()]
        };
        let value = Tensor::new(shape, data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::GroupDot { a, table }, rg))
    }

    pub fn gather_rows(&mut self, a: NodeId, rows: Vec<usize>) -> Result<NodeId> {
        self.gather_rows_or_zero(a, rows.into_iter().map(Some).collect())
    }

    /// Like [`Graph::gather_rows`], with `None` standing for a zero row
    /// (padding).
    pub fn gather_rows_or_zero(&mut self, a: NodeId, rows: Vec<Option<usize>>) -> Result<NodeId> {
        let av = self.value(a);
        if av.shape().len() != 2 {
            return Err(Error::Dimension("gather needs a 2-D input".into()));
        }
        let (k, d) = (av.shape()[0], av.shape()[1]);
        if let Some(r) = rows.iter().flatten().find(|r| **r >= k) {
            return Err(Error::Dimension(format!("row {r} out of range for {k} rows")));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in &rows {
            match r {
                Some(r) => data.extend_from_slice(&av.data()[r * d..(r + 1) * d]),
                None => data.extend(std::iter::repeat_n(T::zero(), d)),
            }
        }
        let value = Tensor::new(vec![rows.len(), d], data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::GatherRows { a, rows }, rg))
    }

    /// Same data under a new shape.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let value = Tensor::new(shape, self.value(a).data().to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Same value as `a`, cut off from the gradient.
    pub fn detach(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).detached();
        self.push(value, Op::Detach, false)
    }

    /// Forward value `value`, backward identity into `a`.
    pub fn straight_through(&mut self, a: NodeId, value: Tensor<T>) -> Result<NodeId> {
        if value.len() != self.value(a).len() {
            return Err(Error::Dimension("straight-through value length".into()));
        }
        let rg = self.rg(a);
        Ok(self.push(value.detached(), Op::StraightThrough(a), rg))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        fn add_into<T: Scalar>(slot: &mut Option<Vec<T>>, len: usize, f: impl Fn(usize) -> T) {
            let buf = slot.get_or_insert_with(|| vec![T::zero(); len]);
            for (i, b) in buf.iter_mut().enumerate() {
                *b += f(i);
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = Some(g);
                continue;
            }
            match &node.op {
                Op::Leaf | Op::Detach => {}
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (out, inp) = (wv.shape()[0], wv.shape()[1]);
                    let rows = xv.len() / inp;
                    let (xd, wd) = (xv.data(), wv.data());
                    if self.rg(*x) {
                        add_into(&mut grads[x.0], xv.len(), |i| {
                            let (r, c) = (i / inp, i % inp);
                            let mut acc = T::zero();
                            for o in 0..out {
                                acc += g[r * out + o] * wd[o * inp + c];
                            }
                            acc
                        });
                    }
                    if self.rg(*w) {
                        add_into(&mut grads[w.0], wv.len(), |i| {
                            let (o, c) = (i / inp, i % inp);
                            let mut acc = T::zero();
                            for r in 0..rows {
                                acc += g[r * out + o] * xd[r * inp + c];
                            }
                            acc
                        });
                    }
                    if self.rg(*b) {
                        add_into(&mut grads[b.0], out, |o| {
                            let mut acc = T::zero();
                            for r in 0..rows {
                                acc += g[r * out + o];
                            }
                            acc
                        });
                    }
                }
                Op::Activate { x, act } => {
                    let (xd, yd) = (self.value(*x).data(), node.value.data());
                    add_into(&mut grads[x.0], xd.len(), |i| g[i] * act.derivative(xd[i], yd[i]));
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        add_into(&mut grads[a.0], g.len(), |i| g[i]);
                    }
                    if self.rg(*b) {
                        add_into(&mut grads[b.0], g.len(), |i| g[i]);
                    }
                }
                Op::Sub(a, b) => {
                    if self.rg(*a) {
                        add_into(&mut grads[a.0], g.len(), |i| g[i]);
                    }
                    if self.rg(*b) {
                        add_into(&mut grads[b.0], g.len(), |i| -g[i]);
                    }
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                    if self.rg(*a) {
                        add_into(&mut grads[a.0], g.len(), |i| g[i] * bd[i]);
                    }
                    if self.rg(*b) {
                        add_into(&mut grads[b.0], g.len(), |i| g[i] * ad[i]);
                    }
                }
                Op::Scale(a, k) => {
                    add_into(&mut grads[a.0], g.len(), |i| g[i] * *k);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    add_into(&mut grads[a.0], n, |_| g[0]);
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len();
                    let s = g[0] / T::of(n.max(1) as f64);
                    add_into(&mut grads[a.0], n, |_| s);
                }
                Op::DotConst { a, weights } => {
                    add_into(&mut grads[a.0], weights.len(), |i| g[0] * weights[i]);
                }
                Op::GroupSoftmax { a, classes } => {
                    let y = node.value.data();
                    let k = *classes;
                    let mut local = vec![T::zero(); y.len()];
                    for (cell, (yc, gc)) in y.chunks(k).zip(g.chunks(k)).enumerate() {
                        let dot: T = yc.iter().zip(gc).map(|(p, q)| *p * *q).sum();
                        for j in 0..k {
                            local[cell * k + j] = yc[j] * (gc[j] - dot);
                        }
                    }
                    add_into(&mut grads[a.0], local.len(), |i| local[i]);
                }
                Op::GroupDot { a, table } => {
                    let k = table.len();
                    let n = self.value(*a).len();
                    add_into(&mut grads[a.0], n, |i| g[i / k] * table[i % k]);
                }
                Op::GatherRows { a, rows } => {
                    let av = self.value(*a);
                    let d = av.shape()[1];
                    let mut local = vec![T::zero(); av.len()];
                    for (j, r) in rows.iter().enumerate() {
                        let Some(r) = r else { continue };
                        for c in 0..d {
                            local[r * d + c] += g[j * d + c];
                        }
                    }
                    add_into(&mut grads[a.0], local.len(), |i| local[i]);
                }
                Op::Reshape(a) | Op::StraightThrough(a) => {
                    add_into(&mut grads[a.0], g.len(), |i| g[i]);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}
