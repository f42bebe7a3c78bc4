//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records every primitive in execution order, so the tape is
//! topologically sorted by construction. [`Tape::backward`] walks it in
//! reverse and accumulates adjoints; gradients of tensors registered with
//! [`Tape::param`] are returned in a [`GradientSet`].
//!
//! ```
//! use dcam_core::autodiff::{ParamId, Tape};
//! use dcam_core::Tensor;
//!
//! let mut tape = Tape::new();
//! let w = tape.param(ParamId(0), Tensor::vector(vec![1.0, -2.0]).unwrap());
//! let s = tape.sum(w);
//! let grads = tape.backward(s).unwrap();
//! assert_eq!(grads.get(ParamId(0)).unwrap().data(), &[1.0, 1.0]);
//! ```

pub mod gradcheck;
pub mod ops;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{gemm, MatRef, Tensor};

pub use gradcheck::finite_diff_check;

/// Identifies a trainable tensor across tapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Handle to a value slot on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    PairwiseSqDist(Var, Var),
    SoftmaxNegScaled(Var, f64),
    SqErrorSum(Var, Var),
    Scale(Var, f64),
    Add(Var, Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    param: Option<ParamId>,
    requires_grad: bool,
}

/// Ordered record of primitive operations and their values.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// `∂loss/∂param` for every parameter registered on the tape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientSet {
    grads: BTreeMap<ParamId, Tensor>,
}

impl GradientSet {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<ParamId, Tensor> {
        self.grads
    }
}

fn eval<'a>(op: Op, v: impl Fn(Var) -> &'a Tensor) -> Result<Tensor> {
    match op {
        Op::Leaf => unreachable!("leaves carry their own value"),
        Op::MatMul(a, b) => ops::matmul(v(a), v(b)),
        Op::AddBias(a, b) => ops::add_bias(v(a), v(b)),
        Op::Relu(a) => Ok(ops::relu(v(a))),
        Op::PairwiseSqDist(a, b) => ops::pairwise_sq_dist(v(a), v(b)),
        Op::SoftmaxNegScaled(a, beta) => ops::softmax_neg_scaled(v(a), beta),
        Op::SqErrorSum(a, b) => ops::sq_error_sum(v(a), v(b)),
        Op::Scale(a, c) => Ok(ops::scale(v(a), c)),
        Op::Add(a, b) => ops::add(v(a), v(b)),
        Op::Sum(a) => Ok(ops::sum(v(a))),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records a value that takes no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, None, false)
    }

    /// Records a trainable value. Registering the same id twice accumulates
    /// both uses into one gradient.
    pub fn param(&mut self, id: ParamId, value: Tensor) -> Var {
        self.push(value, Op::Leaf, Some(id), true)
    }

    fn push(&mut self, value: Tensor, op: Op, param: Option<ParamId>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            param,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op, inputs: &[Var]) -> Result<Var> {
        let value = eval(op, |x| &self.nodes[x.0].value)?;
        let requires_grad = inputs.iter().any(|x| self.nodes[x.0].requires_grad);
        Ok(self.push(value, op, None, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b), &[a, b])
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.record(Op::AddBias(a, bias), &[a, bias])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.record(Op::Relu(a), &[a]).expect("relu is total")
    }

    pub fn pairwise_sq_dist(&mut self, v: Var, rho: Var) -> Result<Var> {
        self.record(Op::PairwiseSqDist(v, rho), &[v, rho])
    }

    pub fn softmax_neg_scaled(&mut self, d: Var, beta: f64) -> Result<Var> {
        self.record(Op::SoftmaxNegScaled(d, beta), &[d])
    }

    pub fn sq_error_sum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::SqErrorSum(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.record(Op::Scale(a, c), &[a]).expect("scale is total")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b), &[a, b])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.record(Op::Sum(a), &[a]).expect("sum is total")
    }

    /// Recomputes every non-leaf value from the leaves, in tape order.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                op => eval(op, |x| &values[x.0])?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse-mode gradients of a scalar `loss` with respect to every
    /// registered parameter.
    pub fn backward(&self, loss: Var) -> Result<GradientSet> {
        let loss_node = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::Usage(format!("loss slot {} is not on this tape", loss.0)))?;
        if loss_node.value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_node.value.shape()
            )));
        }

        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::full(loss_node.value.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            if let Op::Leaf = node.op {
                adj[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut adj);
        }

        let mut grads = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            let Some(id) = node.param else { continue };
            let g = adj
                .get_mut(idx)
                .and_then(Option::take)
                .unwrap_or_else(|| Tensor::zeros(node.value.shape()));
            match grads.get_mut(&id) {
                None => {
                    grads.insert(id, g);
                }
                Some(acc) => accumulate_into(acc, &g),
            }
        }
        Ok(GradientSet { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (n, p) = (val(a).shape()[0], val(a).shape()[1]);
                let q = val(b).shape()[1];
                let gm = MatRef::of(g.data(), n, q);
                if self.wants(a) {
                    let mut da = vec![0.0; n * p];
                    gemm(1.0, gm, MatRef::of(val(b).data(), p, q).t(), 0.0, &mut da);
                    add_adj(adj, a, Tensor::from_raw(vec![n, p], da));
                }
                if self.wants(b) {
                    let mut db = vec![0.0; p * q];
                    gemm(1.0, MatRef::of(val(a).data(), n, p).t(), gm, 0.0, &mut db);
                    add_adj(adj, b, Tensor::from_raw(vec![p, q], db));
                }
            }
            Op::AddBias(a, b) => {
                if self.wants(a) {
                    add_adj(adj, a, g.clone());
                }
                if self.wants(b) {
                    let p = g.shape()[1];
                    let mut db = vec![0.0; p];
                    for row in g.data().chunks(p.max(1)) {
                        for (d, x) in db.iter_mut().zip(row) {
                            *d += x;
                        }
                    }
                    add_adj(adj, b, Tensor::from_raw(vec![p], db));
                }
            }
            Op::Relu(a) => {
                let x = val(a);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                    .collect();
                add_adj(adj, a, Tensor::from_raw(x.shape().to_vec(), data));
            }
            Op::PairwiseSqDist(v, rho) => {
                let (vt, rt) = (val(v), val(rho));
                let (n, m) = (vt.shape()[0], vt.shape()[1]);
                let k = rt.shape()[0];
                let gd = g.data();
                // d/dv_j = 2 Σ_i g_ji (v_j − ρ_i);  d/dρ_i = −2 Σ_j g_ji (v_j − ρ_i)
                let mut dv = if self.wants(v) { Some(vec![0.0; n * m]) } else { None };
                let mut dr = if self.wants(rho) { Some(vec![0.0; k * m]) } else { None };
                for j in 0..n {
                    let vj = vt.row(j);
                    for i in 0..k {
                        let gji = 2.0 * gd[j * k + i];
                        if gji == 0.0 {
                            continue;
                        }
                        let ri = rt.row(i);
                        for c in 0..m {
                            let diff = gji * (vj[c] - ri[c]);
                            if let Some(dv) = dv.as_mut() {
                                dv[j * m + c] += diff;
                            }
                            if let Some(dr) = dr.as_mut() {
                                dr[i * m + c] -= diff;
                            }
                        }
                    }
                }
                if let Some(dv) = dv {
                    add_adj(adj, v, Tensor::from_raw(vec![n, m], dv));
                }
                if let Some(dr) = dr {
                    add_adj(adj, rho, Tensor::from_raw(vec![k, m], dr));
                }
            }
            Op::SoftmaxNegScaled(d, beta) => {
                // w = softmax(−βd):  ∂/∂d = −β · w ⊙ (g − ⟨g, w⟩_row)
                let w = &node.value;
                let k = w.shape()[1];
                let mut dd = vec![0.0; w.len()];
                for ((wr, gr), out) in w
                    .data()
                    .chunks(k.max(1))
                    .zip(g.data().chunks(k.max(1)))
                    .zip(dd.chunks_mut(k.max(1)))
                {
                    let dot: f64 = wr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &wi), &gi) in out.iter_mut().zip(wr).zip(gr) {
                        *o = -beta * wi * (gi - dot);
                    }
                }
                add_adj(adj, d, Tensor::from_raw(w.shape().to_vec(), dd));
            }
            Op::SqErrorSum(a, b) => {
                let s = g.item();
                let (at, bt) = (val(a), val(b));
                let da: Vec<f64> = at
                    .data()
                    .iter()
                    .zip(bt.data())
                    .map(|(x, y)| 2.0 * s * (x - y))
                    .collect();
                if self.wants(b) {
                    let db = da.iter().map(|x| -x).collect();
                    add_adj(adj, b, Tensor::from_raw(bt.shape().to_vec(), db));
                }
                if self.wants(a) {
                    add_adj(adj, a, Tensor::from_raw(at.shape().to_vec(), da));
                }
            }
            Op::Scale(a, c) => add_adj(adj, a, ops::scale(g, c)),
            Op::Add(a, b) => {
                if self.wants(a) {
                    add_adj(adj, a, g.clone());
                }
                if self.wants(b) {
                    add_adj(adj, b, g.clone());
                }
            }
            Op::Sum(a) => {
                let s = g.item();
                add_adj(adj, a, Tensor::full(val(a).shape(), s));
            }
        }
    }
}

fn add_adj(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        slot @ None => *slot = Some(g),
        Some(acc) => accumulate_into(acc, &g),
    }
}

fn accumulate_into(acc: &mut Tensor, g: &Tensor) {
    debug_assert_eq!(acc.shape(), g.shape());
    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
        *a += b;
    }
}
