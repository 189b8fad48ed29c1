//! Reverse-mode autodiff on a per-step tape.
//!
//! A [`Graph`] owns the tape; [`Var`] is a copyable handle to a node. Ops
//! push a node holding the forward value and, when any input requires
//! gradients, a backward closure producing per-parent contributions. The
//! tape is in creation order, which is already topological, so
//! [`Graph::backward`] is a single reverse sweep.
//!
//! Graphs are rebuilt per training step and never shared across threads;
//! parameters are read-only while a graph references them.

use std::cell::RefCell;
use std::collections::HashMap;

use super::{kernels, Parameter, Tensor};
use crate::error::{Error, Result};

/// Gradients keyed by parameter name. Parameters registered on the graph but
/// unreachable from the loss get explicit zero gradients.
#[derive(Debug, Default)]
pub struct GradientMap {
    grads: HashMap<String, Tensor>,
}

impl GradientMap {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.grads.iter()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Accumulate another map (same keys or new ones), used to sum
    /// per-batch-item gradients in a fixed order.
    pub fn accumulate(&mut self, other: &GradientMap) -> Result<()> {
        for (name, g) in other.grads.iter() {
            match self.grads.get_mut(name) {
                Some(acc) => acc.add_assign(g)?,
                None => {
                    self.grads.insert(name.clone(), g.clone());
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
}

type BackFn = Box<dyn Fn(&Tensor, &[Node]) -> Vec<(usize, Tensor)>>;

struct Node {
    value: Tensor,
    requires_grad: bool,
    param_name: Option<String>,
    back: Option<BackFn>,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, usize>,
}

/// Dynamic computation tape. Single-threaded; rebuilt per step.
#[derive(Default)]
pub struct Graph {
    tape: RefCell<Tape>,
}

/// Handle to a tape node.
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Number of nodes currently on the tape.
    pub fn len(&self) -> usize {
        self.tape.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf holding a non-trainable value.
    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.push(t, false, None, None)
    }

    /// Leaf for a named parameter. Registering the same name twice returns
    /// the same node so gradient contributions accumulate.
    pub fn param(&self, p: &Parameter) -> Var<'_> {
        if let Some(&id) = self.tape.borrow().params.get(&p.name) {
            return Var { graph: self, id };
        }
        let var = self.push(
            p.tensor.clone(),
            p.tensor.requires_grad(),
            Some(p.name.clone()),
            None,
        );
        self.tape.borrow_mut().params.insert(p.name.clone(), var.id);
        var
    }

    fn push(
        &self,
        value: Tensor,
        requires_grad: bool,
        param_name: Option<String>,
        back: Option<BackFn>,
    ) -> Var<'_> {
        let mut tape = self.tape.borrow_mut();
        let id = tape.nodes.len();
        tape.nodes.push(Node {
            value,
            requires_grad,
            param_name,
            back,
        });
        Var { graph: self, id }
    }

    fn with_values<T>(&self, f: impl FnOnce(&[Node]) -> T) -> T {
        f(&self.tape.borrow().nodes)
    }

    /// Reverse sweep from a scalar loss. Returns gradients for every
    /// registered parameter (zero when the loss does not depend on it).
    pub fn backward(&self, loss: Var<'_>) -> Result<GradientMap> {
        self.check_same_graph(loss)?;
        let tape = self.tape.borrow();
        let loss_node = &tape.nodes[loss.id];
        if !loss_node.value.is_scalar() {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss_node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::full(loss_node.value.shape(), 1.0));
        let mut map = GradientMap::default();
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &tape.nodes[id];
            if let Some(back) = &node.back {
                for (pid, contrib) in back(&g, &tape.nodes) {
                    if !tape.nodes[pid].requires_grad {
                        continue;
                    }
                    match &mut grads[pid] {
                        Some(acc) => acc.add_assign(&contrib)?,
                        slot @ None => *slot = Some(contrib),
                    }
                }
            }
            if let Some(name) = &node.param_name {
                map.grads.insert(name.clone(), g);
            }
        }
        for (name, &id) in tape.params.iter() {
            map.grads
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(tape.nodes[id].value.shape()));
        }
        Ok(map)
    }

    fn check_same_graph(&self, v: Var<'_>) -> Result<()> {
        if !std::ptr::eq(self, v.graph) {
            return Err(Error::contract(
                "vars from different graphs cannot be combined",
            ));
        }
        Ok(())
    }
}

/// Lane iteration for axis-wise ops on rank <= 2 tensors: returns
/// (lane_count, lane_len, stride, lane_start_fn).
fn lanes(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    match (shape.len(), axis) {
        (0, 0) => Ok((1, 1, 1)),
        (1, 0) => Ok((1, shape[0], 1)),
        (2, 1) => Ok((shape[0], shape[1], 1)),
        (2, 0) => Ok((shape[1], shape[0], shape[1])),
        _ => Err(Error::dimension(format!(
            "axis {axis} invalid for shape {shape:?}"
        ))),
    }
}

fn lane_start(shape: &[usize], axis: usize, lane: usize) -> usize {
    match (shape.len(), axis) {
        (2, 1) => lane * shape[1],
        (2, 0) => lane,
        _ => 0,
    }
}

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph
            .with_values(|nodes| nodes[self.id].value.shape().to_vec())
    }

    /// Clone the forward value out of the tape.
    pub fn value(&self) -> Tensor {
        self.graph.with_values(|nodes| nodes[self.id].value.clone())
    }

    pub fn item(&self) -> Result<f64> {
        self.graph.with_values(|nodes| nodes[self.id].value.item())
    }

    fn requires_grad(&self) -> bool {
        self.graph
            .with_values(|nodes| nodes[self.id].requires_grad)
    }

    /// `self (m×k) · rhs (k×n)`.
    pub fn matmul(self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.graph.check_same_graph(rhs)?;
        let (out, m, k, n) = self.graph.with_values(|nodes| -> Result<_> {
            let a = &nodes[self.id].value;
            let b = &nodes[rhs.id].value;
            if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(Error::dimension(format!(
                    "matmul {:?} x {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            let data = kernels::matmul(a.data(), b.data(), m, k, n);
            Ok((Tensor::new(vec![m, n], data)?, m, k, n))
        })?;
        let req = self.requires_grad() || rhs.requires_grad();
        let (aid, bid) = (self.id, rhs.id);
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, nodes: &[Node]| {
                let a = &nodes[aid].value;
                let b = &nodes[bid].value;
                let da = kernels::matmul_nt(g.data(), b.data(), m, n, k);
                let db = kernels::matmul_tn(a.data(), g.data(), m, k, n);
                vec![
                    (aid, Tensor::new(vec![m, k], da).unwrap()),
                    (bid, Tensor::new(vec![k, n], db).unwrap()),
                ]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    /// `self (m×k) · rhsᵀ` with `rhs (n×k)`.
    pub fn matmul_nt(self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.graph.check_same_graph(rhs)?;
        let (out, m, k, n) = self.graph.with_values(|nodes| -> Result<_> {
            let a = &nodes[self.id].value;
            let b = &nodes[rhs.id].value;
            if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1] {
                return Err(Error::dimension(format!(
                    "matmul_nt {:?} x {:?}ᵀ",
                    a.shape(),
                    b.shape()
                )));
            }
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[0];
            let data = kernels::matmul_nt(a.data(), b.data(), m, k, n);
            Ok((Tensor::new(vec![m, n], data)?, m, k, n))
        })?;
        let req = self.requires_grad() || rhs.requires_grad();
        let (aid, bid) = (self.id, rhs.id);
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, nodes: &[Node]| {
                let a = &nodes[aid].value;
                let b = &nodes[bid].value;
                let da = kernels::matmul(g.data(), b.data(), m, n, k);
                let db = kernels::matmul_tn(g.data(), a.data(), m, n, k);
                vec![
                    (aid, Tensor::new(vec![m, k], da).unwrap()),
                    (bid, Tensor::new(vec![n, k], db).unwrap()),
                ]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    fn elementwise_binary(
        self,
        rhs: Var<'g>,
        fwd: impl Fn(f64, f64) -> f64,
        back_pair: impl Fn(f64, f64, f64) -> (f64, f64) + 'static,
        name: &str,
    ) -> Result<Var<'g>> {
        self.graph.check_same_graph(rhs)?;
        let out = self.graph.with_values(|nodes| {
            let a = &nodes[self.id].value;
            let b = &nodes[rhs.id].value;
            if a.shape() != b.shape() {
                return Err(Error::dimension(format!(
                    "{name} {:?} vs {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&x, &y)| fwd(x, y))
                .collect();
            Tensor::new(a.shape().to_vec(), data)
        })?;
        let req = self.requires_grad() || rhs.requires_grad();
        let (aid, bid) = (self.id, rhs.id);
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, nodes: &[Node]| {
                let a = &nodes[aid].value;
                let b = &nodes[bid].value;
                let mut da = Vec::with_capacity(g.len());
                let mut db = Vec::with_capacity(g.len());
                for ((&gv, &x), &y) in g.data().iter().zip(a.data()).zip(b.data()) {
                    let (dx, dy) = back_pair(gv, x, y);
                    da.push(dx);
                    db.push(dy);
                }
                vec![
                    (aid, Tensor::new(a.shape().to_vec(), da).unwrap()),
                    (bid, Tensor::new(b.shape().to_vec(), db).unwrap()),
                ]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    pub fn add(self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.elementwise_binary(rhs, |x, y| x + y, |g, _, _| (g, g), "add")
    }

    pub fn sub(self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.elementwise_binary(rhs, |x, y| x - y, |g, _, _| (g, -g), "sub")
    }

    pub fn mul(self, rhs: Var<'g>) -> Result<Var<'g>> {
        self.elementwise_binary(rhs, |x, y| x * y, |g, x, y| (g * y, g * x), "mul")
    }

    /// `self (m×n) + row (n)`: trailing-dimension broadcast.
    pub fn add_row(self, row: Var<'g>) -> Result<Var<'g>> {
        self.graph.check_same_graph(row)?;
        let (out, m, n, row_shape) = self.graph.with_values(|nodes| -> Result<_> {
            let a = &nodes[self.id].value;
            let b = &nodes[row.id].value;
            let (m, n) = a.dims2()?;
            if a.rank() > 2 || b.len() != n || b.rank() > 2 || (b.rank() == 2 && b.shape()[0] != 1)
            {
                return Err(Error::dimension(format!(
                    "add_row {:?} + {:?} (broadcast is trailing-dimension only)",
                    a.shape(),
                    b.shape()
                )));
            }
            let mut data = a.data().to_vec();
            for r in 0..m {
                for (o, &bv) in data[r * n..(r + 1) * n].iter_mut().zip(b.data()) {
                    *o += bv;
                }
            }
            Ok((
                Tensor::new(a.shape().to_vec(), data)?,
                m,
                n,
                b.shape().to_vec(),
            ))
        })?;
        let req = self.requires_grad() || row.requires_grad();
        let (aid, bid) = (self.id, row.id);
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, _: &[Node]| {
                let mut db = vec![0.0; n];
                for r in 0..m {
                    for (acc, &gv) in db.iter_mut().zip(&g.data()[r * n..(r + 1) * n]) {
                        *acc += gv;
                    }
                }
                vec![
                    (aid, g.clone()),
                    (bid, Tensor::new(row_shape.clone(), db).unwrap()),
                ]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    fn elementwise_unary(
        self,
        fwd: impl Fn(f64) -> f64,
        // dx as a function of (grad, x, y)
        back1: impl Fn(f64, f64, f64) -> f64 + 'static,
    ) -> Result<Var<'g>> {
        let out = self.graph.with_values(|nodes| {
            let a = &nodes[self.id].value;
            let data = a.data().iter().map(|&x| fwd(x)).collect();
            Tensor::new(a.shape().to_vec(), data)
        })?;
        let req = self.requires_grad();
        let (aid, oid_pending) = (self.id, ());
        let _ = oid_pending;
        let out_var = self.graph.push(out, req, None, None);
        if req {
            let oid = out_var.id;
            let back: BackFn = Box::new(move |g: &Tensor, nodes: &[Node]| {
                let x = &nodes[aid].value;
                let y = &nodes[oid].value;
                let da = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .zip(y.data())
                    .map(|((&gv, &xv), &yv)| back1(gv, xv, yv))
                    .collect();
                vec![(aid, Tensor::new(x.shape().to_vec(), da).unwrap())]
            });
            self.graph.tape.borrow_mut().nodes[oid].back = Some(back);
        }
        Ok(out_var)
    }

    pub fn exp(self) -> Result<Var<'g>> {
        self.elementwise_unary(f64::exp, |g, _, y| g * y)
    }

    pub fn log(self) -> Result<Var<'g>> {
        self.elementwise_unary(f64::ln, |g, x, _| g / x)
    }

    pub fn sigmoid(self) -> Result<Var<'g>> {
        self.elementwise_unary(sigmoid_scalar, |g, _, y| g * y * (1.0 - y))
    }

    /// GELU with the exact erf definition.
    pub fn gelu(self) -> Result<Var<'g>> {
        self.elementwise_unary(gelu_scalar, |g, x, _| g * gelu_derivative(x))
    }

    pub fn square(self) -> Result<Var<'g>> {
        self.elementwise_unary(|x| x * x, |g, x, _| 2.0 * g * x)
    }

    pub fn scale(self, c: f64) -> Result<Var<'g>> {
        self.elementwise_unary(move |x| x * c, move |g, _, _| g * c)
    }

    pub fn add_scalar(self, c: f64) -> Result<Var<'g>> {
        self.elementwise_unary(move |x| x + c, |g, _, _| g)
    }

    pub fn neg(self) -> Result<Var<'g>> {
        self.scale(-1.0)
    }

    /// Clamp with pass-through gradient strictly inside the interval.
    pub fn clamp(self, lo: f64, hi: f64) -> Result<Var<'g>> {
        self.elementwise_unary(
            move |x| x.clamp(lo, hi),
            move |g, x, _| if x > lo && x < hi { g } else { 0.0 },
        )
    }

    /// Softmax along `axis` (max-subtraction stabilized).
    pub fn softmax(self, axis: usize) -> Result<Var<'g>> {
        let (out, shape) = self.graph.with_values(|nodes| -> Result<_> {
            let x = &nodes[self.id].value;
            let shape = x.shape().to_vec();
            let (count, len, stride) = lanes(&shape, axis)?;
            let mut data = x.data().to_vec();
            for lane in 0..count {
                let s = lane_start(&shape, axis, lane);
                let mut max = f64::NEG_INFINITY;
                for i in 0..len {
                    max = max.max(data[s + i * stride]);
                }
                let mut sum = 0.0;
                for i in 0..len {
                    let e = (data[s + i * stride] - max).exp();
                    data[s + i * stride] = e;
                    sum += e;
                }
                for i in 0..len {
                    data[s + i * stride] /= sum;
                }
            }
            Ok((Tensor::new(shape.clone(), data)?, shape))
        })?;
        let req = self.requires_grad();
        let aid = self.id;
        let out_var = self.graph.push(out, req, None, None);
        if req {
            let oid = out_var.id;
            let back: BackFn = Box::new(move |g: &Tensor, nodes: &[Node]| {
                let y = &nodes[oid].value;
                let (count, len, stride) = lanes(&shape, axis).expect("validated");
                let mut dx = vec![0.0; g.len()];
                for lane in 0..count {
                    let s = lane_start(&shape, axis, lane);
                    let mut dot = 0.0;
                    for i in 0..len {
                        dot += g.data()[s + i * stride] * y.data()[s + i * stride];
                    }
                    for i in 0..len {
                        let idx = s + i * stride;
                        dx[idx] = y.data()[idx] * (g.data()[idx] - dot);
                    }
                }
                vec![(aid, Tensor::new(shape.clone(), dx).unwrap())]
            });
            self.graph.tape.borrow_mut().nodes[oid].back = Some(back);
        }
        Ok(out_var)
    }

    /// Row-wise softmax of a matrix.
    pub fn softmax_rows(self) -> Result<Var<'g>> {
        let rank = self.shape().len();
        self.softmax(rank.saturating_sub(1))
    }

    /// Last-dimension layer normalization with affine parameters.
    /// `gamma` and `beta` are width-n vectors; epsilon guards zero variance.
    pub fn layer_norm(self, gamma: Var<'g>, beta: Var<'g>, eps: f64) -> Result<Var<'g>> {
        self.graph.check_same_graph(gamma)?;
        self.graph.check_same_graph(beta)?;
        let (out, normalized, m, n, inv_std_all) = self.graph.with_values(|nodes| -> Result<_> {
            let x = &nodes[self.id].value;
            let gm = &nodes[gamma.id].value;
            let bt = &nodes[beta.id].value;
            let (m, n) = x.dims2()?;
            if x.rank() > 2 || gm.len() != n || bt.len() != n {
                return Err(Error::dimension(format!(
                    "layer_norm x {:?} gamma {:?} beta {:?}",
                    x.shape(),
                    gm.shape(),
                    bt.shape()
                )));
            }
            let mut normalized = vec![0.0; m * n];
            let mut inv_std_all = vec![0.0; m];
            let mut data = vec![0.0; m * n];
            for r in 0..m {
                let row = &x.data()[r * n..(r + 1) * n];
                let mean = row.iter().sum::<f64>() / n as f64;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                let inv_std = 1.0 / (var + eps).sqrt();
                inv_std_all[r] = inv_std;
                for c in 0..n {
                    let y = (row[c] - mean) * inv_std;
                    normalized[r * n + c] = y;
                    data[r * n + c] = gm.data()[c] * y + bt.data()[c];
                }
            }
            Ok((
                Tensor::new(x.shape().to_vec(), data)?,
                normalized,
                m,
                n,
                inv_std_all,
            ))
        })?;
        let req = self.requires_grad() || gamma.requires_grad() || beta.requires_grad();
        let (xid, gid, bid) = (self.id, gamma.id, beta.id);
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, nodes: &[Node]| {
                let x = &nodes[xid].value;
                let gm = &nodes[gid].value;
                let mut dx = vec![0.0; m * n];
                let mut dgamma = vec![0.0; n];
                let mut dbeta = vec![0.0; n];
                for r in 0..m {
                    let grow = &g.data()[r * n..(r + 1) * n];
                    let yrow = &normalized[r * n..(r + 1) * n];
                    let inv_std = inv_std_all[r];
                    let mut mean_gy = 0.0;
                    let mut mean_gyy = 0.0;
                    for c in 0..n {
                        let gy = grow[c] * gm.data()[c];
                        mean_gy += gy;
                        mean_gyy += gy * yrow[c];
                        dgamma[c] += grow[c] * yrow[c];
                        dbeta[c] += grow[c];
                    }
                    mean_gy /= n as f64;
                    mean_gyy /= n as f64;
                    for c in 0..n {
                        let gy = grow[c] * gm.data()[c];
                        dx[r * n + c] = (gy - mean_gy - yrow[c] * mean_gyy) * inv_std;
                    }
                }
                vec![
                    (xid, Tensor::new(x.shape().to_vec(), dx).unwrap()),
                    (gid, Tensor::new(gm.shape().to_vec(), dgamma).unwrap()),
                    (bid, Tensor::new(vec![n], dbeta).unwrap()),
                ]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    pub fn sum(self) -> Result<Var<'g>> {
        let (total, shape) = self.graph.with_values(|nodes| {
            let x = &nodes[self.id].value;
            (x.data().iter().sum::<f64>(), x.shape().to_vec())
        });
        let req = self.requires_grad();
        let aid = self.id;
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, _: &[Node]| {
                vec![(aid, Tensor::full(&shape, g.data()[0]))]
            }) as BackFn
        });
        Ok(self.graph.push(Tensor::scalar(total), req, None, back))
    }

    pub fn mean(self) -> Result<Var<'g>> {
        let n = self.graph.with_values(|nodes| nodes[self.id].value.len());
        if n == 0 {
            return Err(Error::contract("mean of empty tensor"));
        }
        self.sum()?.scale(1.0 / n as f64)
    }

    /// View with a new shape (same element count).
    pub fn reshape(self, new_shape: Vec<usize>) -> Result<Var<'g>> {
        let out = self.graph.with_values(|nodes| {
            let x = &nodes[self.id].value;
            let expected: usize = new_shape.iter().product();
            if expected != x.len() {
                return Err(Error::dimension(format!(
                    "reshape {:?} -> {:?}",
                    x.shape(),
                    new_shape
                )));
            }
            Tensor::new(new_shape.clone(), x.data().to_vec())
        })?;
        let req = self.requires_grad();
        let aid = self.id;
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, nodes: &[Node]| {
                let x = &nodes[aid].value;
                vec![(
                    aid,
                    Tensor::new(x.shape().to_vec(), g.data().to_vec()).unwrap(),
                )]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    /// Columns `[start, start+len)` of a matrix.
    pub fn slice_cols(self, start: usize, len: usize) -> Result<Var<'g>> {
        let (out, m, n) = self.graph.with_values(|nodes| -> Result<_> {
            let x = &nodes[self.id].value;
            if x.rank() != 2 {
                return Err(Error::dimension(format!(
                    "slice_cols on rank-{} tensor {:?}",
                    x.rank(),
                    x.shape()
                )));
            }
            let (m, n) = (x.shape()[0], x.shape()[1]);
            if start + len > n {
                return Err(Error::dimension(format!(
                    "slice_cols [{start}, {}) out of {:?}",
                    start + len,
                    x.shape()
                )));
            }
            let mut data = Vec::with_capacity(m * len);
            for r in 0..m {
                data.extend_from_slice(&x.data()[r * n + start..r * n + start + len]);
            }
            Ok((Tensor::new(vec![m, len], data)?, m, n))
        })?;
        let req = self.requires_grad();
        let aid = self.id;
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, _: &[Node]| {
                let mut dx = vec![0.0; m * n];
                for r in 0..m {
                    dx[r * n + start..r * n + start + len]
                        .copy_from_slice(&g.data()[r * len..(r + 1) * len]);
                }
                vec![(aid, Tensor::new(vec![m, n], dx).unwrap())]
            }) as BackFn
        });
        Ok(self.graph.push(out, req, None, back))
    }

    /// Scalar-mean binary cross entropy from logits, stable logit form.
    /// Targets are plain values in {0, 1}, never differentiated.
    pub fn bce_with_logits(self, targets: &Tensor) -> Result<Var<'g>> {
        let (loss, n) = self.graph.with_values(|nodes| -> Result<_> {
            let z = &nodes[self.id].value;
            if z.shape() != targets.shape() {
                return Err(Error::dimension(format!(
                    "bce_with_logits logits {:?} vs targets {:?}",
                    z.shape(),
                    targets.shape()
                )));
            }
            if z.is_empty() {
                return Err(Error::contract("bce_with_logits on empty tensors"));
            }
            let mut total = 0.0;
            for (&zv, &yv) in z.data().iter().zip(targets.data()) {
                // max(z,0) - z*y + ln(1 + exp(-|z|))
                total += zv.max(0.0) - zv * yv + (-zv.abs()).exp().ln_1p();
            }
            Ok((total / z.len() as f64, z.len()))
        })?;
        let req = self.requires_grad();
        let aid = self.id;
        let tgt = targets.clone();
        let back: Option<BackFn> = req.then(|| {
            Box::new(move |g: &Tensor, nodes: &[Node]| {
                let z = &nodes[aid].value;
                let scale = g.data()[0] / n as f64;
                let dz = z
                    .data()
                    .iter()
                    .zip(tgt.data())
                    .map(|(&zv, &yv)| scale * (sigmoid_scalar(zv) - yv))
                    .collect();
                vec![(aid, Tensor::new(z.shape().to_vec(), dz).unwrap())]
            }) as BackFn
        });
        Ok(self.graph.push(Tensor::scalar(loss), req, None, back))
    }
}

/// Concatenate matrices with equal row counts along columns.
pub fn concat_cols<'g>(graph: &'g Graph, parts: &[Var<'g>]) -> Result<Var<'g>> {
    if parts.is_empty() {
        return Err(Error::contract("concat_cols of zero parts"));
    }
    for p in parts {
        graph.check_same_graph(*p)?;
    }
    let (out, m, widths) = graph.with_values(|nodes| -> Result<_> {
        let m = nodes[parts[0].id].value.dims2()?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let v = &nodes[p.id].value;
            let (pm, pn) = v.dims2()?;
            if v.rank() != 2 || pm != m {
                return Err(Error::dimension(format!(
                    "concat_cols rows mismatch: {:?} vs {} rows",
                    v.shape(),
                    m
                )));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for (p, &w) in parts.iter().zip(&widths) {
                let v = &nodes[p.id].value;
                data.extend_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
        }
        Ok((Tensor::new(vec![m, total], data)?, m, widths))
    })?;
    let req = parts.iter().any(|p| p.requires_grad());
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    let back: Option<BackFn> = req.then(|| {
        let widths = widths.clone();
        Box::new(move |g: &Tensor, _: &[Node]| {
            let total: usize = widths.iter().sum();
            let mut grads: Vec<Vec<f64>> = widths.iter().map(|&w| vec![0.0; m * w]).collect();
            for r in 0..m {
                let mut offset = 0;
                for (gi, &w) in widths.iter().enumerate() {
                    grads[gi][r * w..(r + 1) * w]
                        .copy_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                    offset += w;
                }
            }
            ids.iter()
                .zip(grads)
                .zip(&widths)
                .map(|((&id, gd), &w)| (id, Tensor::new(vec![m, w], gd).unwrap()))
                .collect()
        }) as BackFn
    });
    Ok(graph.push(out, req, None, back))
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_derivative(x: f64) -> f64 {
    let phi_cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let phi_pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    phi_cdf + x * phi_pdf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(g: &Graph, shape: Vec<usize>, data: Vec<f64>) -> Var<'_> {
        g.constant(Tensor::new(shape, data).unwrap())
    }

    #[test]
    fn matmul_identity_passthrough() {
        let g = Graph::new();
        let eye = constant(&g, vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let b = constant(&g, vec![3, 2], vec![1., 2., 3., 4., 5., 6.]);
        let c = eye.matmul(b).unwrap();
        assert_eq!(c.value().data(), b.value().data());
    }

    #[test]
    fn matmul_scalar_case() {
        let g = Graph::new();
        let a = constant(&g, vec![1, 1], vec![2.0]);
        let b = constant(&g, vec![1, 1], vec![3.0]);
        assert_eq!(a.matmul(b).unwrap().value().data(), &[6.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let g = Graph::new();
        let a = constant(&g, vec![2, 3], vec![0.0; 6]);
        let b = constant(&g, vec![2, 2], vec![0.0; 4]);
        let err = a.matmul(b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn softmax_uniform_and_single() {
        let g = Graph::new();
        let x = constant(&g, vec![3], vec![0.7, 0.7, 0.7]);
        let y = x.softmax(0).unwrap().value();
        for &v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let one = constant(&g, vec![1], vec![42.0]);
        assert_eq!(one.softmax(0).unwrap().value().data(), &[1.0]);
    }

    #[test]
    fn softmax_hand_evaluated() {
        let g = Graph::new();
        let x = constant(&g, vec![2], vec![0.0, 2.0f64.ln()]);
        let y = x.softmax(0).unwrap().value();
        assert!((y.data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((y.data()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_axis0_of_matrix() {
        let g = Graph::new();
        let x = constant(&g, vec![2, 2], vec![0.0, 5.0, 0.0, 5.0]);
        let y = x.softmax(0).unwrap().value();
        // Columns sum to one.
        assert!((y.data()[0] + y.data()[2] - 1.0).abs() < 1e-12);
        assert!((y.data()[1] + y.data()[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_at_zero() {
        let g = Graph::new();
        let x = constant(&g, vec![1], vec![0.0]);
        assert_eq!(x.sigmoid().unwrap().value().data(), &[0.5]);
    }

    #[test]
    fn gelu_at_one_matches_erf_reference() {
        let g = Graph::new();
        let x = constant(&g, vec![1], vec![1.0]);
        let y = x.gelu().unwrap().value().data()[0];
        assert!((y - 0.8413).abs() < 1e-3, "gelu(1) = {y}");
    }

    #[test]
    fn layer_norm_constant_row_is_zero_before_affine() {
        let g = Graph::new();
        let x = constant(&g, vec![1, 4], vec![3.0; 4]);
        let gamma = constant(&g, vec![4], vec![1.0; 4]);
        let beta = constant(&g, vec![4], vec![0.0; 4]);
        let y = x.layer_norm(gamma, beta, 1e-5).unwrap().value();
        for &v in y.data() {
            assert!(v.abs() < 1e-9, "zero-variance row should normalize to 0");
        }
    }

    #[test]
    fn backward_of_sum_of_squares() {
        let g = Graph::new();
        let p = Parameter::new("x", Tensor::new(vec![1], vec![3.0]).unwrap());
        let x = g.param(&p);
        let loss = x.square().unwrap().sum().unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[6.0]);
    }

    #[test]
    fn unreachable_parameter_gets_zero_gradient() {
        let g = Graph::new();
        let p = Parameter::new("used", Tensor::new(vec![1], vec![2.0]).unwrap());
        let q = Parameter::new("unused", Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let x = g.param(&p);
        let _ = g.param(&q);
        let loss = x.square().unwrap().sum().unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get("unused").unwrap().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let g = Graph::new();
        let p = Parameter::new("x", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let x = g.param(&p);
        let err = g.backward(x).unwrap_err().to_string();
        assert!(err.contains("scalar"), "{err}");
    }

    #[test]
    fn shared_parameter_accumulates_gradient() {
        // loss = sum(x) + sum(x) => grad 2 per element
        let g = Graph::new();
        let p = Parameter::new("x", Tensor::new(vec![2], vec![1.0, 1.0]).unwrap());
        let a = g.param(&p);
        let b = g.param(&p);
        let loss = a.sum().unwrap().add(b.sum().unwrap()).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn bce_hand_values() {
        let g = Graph::new();
        // logit 0 -> ln 2 for either label
        let z = constant(&g, vec![2], vec![0.0, 0.0]);
        let y = Tensor::new(vec![2], vec![0.0, 1.0]).unwrap();
        let loss = z.bce_with_logits(&y).unwrap().item().unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);

        // saturated correct logit -> tiny loss
        let z = constant(&g, vec![1], vec![20.0]);
        let y = Tensor::new(vec![1], vec![1.0]).unwrap();
        let loss = z.bce_with_logits(&y).unwrap().item().unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let g = Graph::new();
        let a = constant(&g, vec![2, 2], vec![1., 2., 3., 4.]);
        let b = constant(&g, vec![2, 1], vec![5., 6.]);
        let c = concat_cols(&g, &[a, b]).unwrap();
        assert_eq!(c.value().shape(), &[2, 3]);
        assert_eq!(c.value().data(), &[1., 2., 5., 3., 4., 6.]);
        let s = c.slice_cols(2, 1).unwrap();
        assert_eq!(s.value().data(), &[5., 6.]);
    }
}
