//! Minimal reverse-mode automatic differentiation over a recorded tape.
//!
//! The op set is exactly what the model needs: dense matmul, row-broadcast
//! bias, ReLU, mean-over-neighbors aggregation, row gathering/concatenation
//! for token fusion, the two pairwise head primitives, and the loss
//! reductions. Values are computed eagerly as nodes are recorded; a single
//! backward sweep fills gradients for every parameter reachable from a
//! scalar loss node.

use super::params::ParamStore;
use super::tensor::Tensor;
use std::rc::Rc;

pub type NodeId = usize;

enum Op {
    Const,
    Param(String),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRowBroadcast(NodeId, NodeId),
    Relu(NodeId),
    NeighborMean(NodeId, Rc<Vec<Vec<usize>>>),
    GatherRows(NodeId, Rc<Vec<usize>>),
    ConcatCols(NodeId, NodeId),
    PairDot(NodeId, Rc<Vec<(usize, usize)>>),
    PairHadamard(NodeId, Rc<Vec<(usize, usize)>>),
    ScaleAdd(NodeId, NodeId, NodeId),
    SoftmaxCrossEntropy(NodeId, Rc<Vec<usize>>),
    SquaredError(NodeId, Rc<Vec<f64>>),
    LinComb(NodeId, NodeId, f64, f64),
    MulConst(NodeId, Rc<Vec<f64>>),
    Sum(NodeId),
}

struct TapeNode {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(TapeNode { op, value });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Const, value)
    }

    /// Record a leaf backed by a named parameter; its gradient is
    /// accumulated into the store during [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        let value = store.get(name).value.clone();
        self.push(Op::Param(name.to_string()), value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols));
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect();
        let value = Tensor::new(va.rows, va.cols, data);
        self.push(Op::Add(a, b), value)
    }

    /// Matrix plus a 1 x cols bias added to every row.
    pub fn add_row_broadcast(&mut self, m: NodeId, bias: NodeId) -> NodeId {
        let (vm, vb) = (self.value(m), self.value(bias));
        assert_eq!(vb.rows, 1);
        assert_eq!(vm.cols, vb.cols);
        let mut data = vm.data.clone();
        for r in 0..vm.rows {
            for c in 0..vm.cols {
                data[r * vm.cols + c] += vb.data[c];
            }
        }
        let value = Tensor::new(vm.rows, vm.cols, data);
        self.push(Op::AddRowBroadcast(m, bias), value)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x.max(0.0)).collect();
        let value = Tensor::new(va.rows, va.cols, data);
        self.push(Op::Relu(a), value)
    }

    /// out[u] = mean of rows adj[u]; the zero vector when adj[u] is empty.
    pub fn neighbor_mean(&mut self, a: NodeId, adj: Rc<Vec<Vec<usize>>>) -> NodeId {
        let va = self.value(a);
        assert_eq!(va.rows, adj.len());
        let mut out = Tensor::zeros(va.rows, va.cols);
        for (u, neigh) in adj.iter().enumerate() {
            if neigh.is_empty() {
                continue;
            }
            let inv = 1.0 / neigh.len() as f64;
            for &v in neigh {
                for c in 0..va.cols {
                    out.data[u * va.cols + c] += va.at(v, c) * inv;
                }
            }
        }
        self.push(Op::NeighborMean(a, adj), out)
    }

    /// out[t] = a[index[t]] (row duplication; backward scatter-adds).
    pub fn gather_rows(&mut self, a: NodeId, index: Rc<Vec<usize>>) -> NodeId {
        let va = self.value(a);
        let mut data = Vec::with_capacity(index.len() * va.cols);
        for &i in index.iter() {
            data.extend_from_slice(va.row(i));
        }
        let value = Tensor::new(index.len(), va.cols, data);
        self.push(Op::GatherRows(a, index), value)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rows, vb.rows);
        let cols = va.cols + vb.cols;
        let mut data = Vec::with_capacity(va.rows * cols);
        for r in 0..va.rows {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let value = Tensor::new(va.rows, cols, data);
        self.push(Op::ConcatCols(a, b), value)
    }

    /// out_i = h[u_i] . h[v_i] for each pair, as a P x 1 column.
    pub fn pair_dot(&mut self, h: NodeId, pairs: Rc<Vec<(usize, usize)>>) -> NodeId {
        let vh = self.value(h);
        let data = pairs
            .iter()
            .map(|&(u, v)| {
                vh.row(u)
                    .iter()
                    .zip(vh.row(v))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect();
        let value = Tensor::new(pairs.len(), 1, data);
        self.push(Op::PairDot(h, pairs), value)
    }

    /// out[i] = h[u_i] elementwise-times h[v_i], as a P x D matrix.
    pub fn pair_hadamard(&mut self, h: NodeId, pairs: Rc<Vec<(usize, usize)>>) -> NodeId {
        let vh = self.value(h);
        let mut data = Vec::with_capacity(pairs.len() * vh.cols);
        for &(u, v) in pairs.iter() {
            data.extend(vh.row(u).iter().zip(vh.row(v)).map(|(a, b)| a * b));
        }
        let value = Tensor::new(pairs.len(), vh.cols, data);
        self.push(Op::PairHadamard(h, pairs), value)
    }

    /// out = w * x + b elementwise, with scalar (1 x 1) w and b nodes.
    pub fn scale_add(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(vw.data.len(), 1);
        assert_eq!(vb.data.len(), 1);
        let (w0, b0) = (vw.data[0], vb.data[0]);
        let data = vx.data.iter().map(|x| w0 * x + b0).collect();
        let value = Tensor::new(vx.rows, vx.cols, data);
        self.push(Op::ScaleAdd(x, w, b), value)
    }

    /// Per-row cross entropy -ln softmax(logits_i)[target_i], as P x 1.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: Rc<Vec<usize>>) -> NodeId {
        let vl = self.value(logits);
        assert_eq!(vl.rows, targets.len());
        let data = targets
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let probs = softmax_row(vl.row(i));
                -probs[y].max(f64::MIN_POSITIVE).ln()
            })
            .collect();
        let value = Tensor::new(vl.rows, 1, data);
        self.push(Op::SoftmaxCrossEntropy(logits, targets), value)
    }

    /// out_i = (x_i - t_i)^2 elementwise against a constant target vector.
    pub fn squared_error(&mut self, x: NodeId, targets: Rc<Vec<f64>>) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.data.len(), targets.len());
        let data = vx
            .data
            .iter()
            .zip(targets.iter())
            .map(|(x, t)| (x - t) * (x - t))
            .collect();
        let value = Tensor::new(vx.rows, vx.cols, data);
        self.push(Op::SquaredError(x, targets), value)
    }

    /// alpha * a + beta * b, elementwise, with constant coefficients.
    pub fn lin_comb(&mut self, a: NodeId, b: NodeId, alpha: f64, beta: f64) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols));
        let data = va
            .data
            .iter()
            .zip(&vb.data)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let value = Tensor::new(va.rows, va.cols, data);
        self.push(Op::LinComb(a, b, alpha, beta), value)
    }

    /// Elementwise product with a constant weight vector.
    pub fn mul_const(&mut self, x: NodeId, weights: Rc<Vec<f64>>) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.data.len(), weights.len());
        let data = vx.data.iter().zip(weights.iter()).map(|(x, w)| x * w).collect();
        let value = Tensor::new(vx.rows, vx.cols, data);
        self.push(Op::MulConst(x, weights), value)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).data.iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(total))
    }

    /// Reverse sweep from a scalar `loss` node; parameter gradients are
    /// accumulated (added) into the store.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) {
        let grads = self.gradients(loss);
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Param(name) = &node.op {
                if let Some(g) = &grads[id] {
                    store.accumulate_grad(name, g);
                }
            }
        }
    }

    /// Raw per-node gradients (None where the node is unreachable from the
    /// loss). Exposed for tests.
    pub fn gradients(&self, loss: NodeId) -> Vec<Option<Vec<f64>>> {
        assert_eq!(self.value(loss).data.len(), 1, "loss must be scalar");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        grads
    }

    fn propagate(&self, id: NodeId, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let acc = |grads: &mut [Option<Vec<f64>>], target: NodeId, contrib: Vec<f64>| {
            match &mut grads[target] {
                Some(existing) => {
                    for (a, b) in existing.iter_mut().zip(&contrib) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Const | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let gt = Tensor::new(va.rows, vb.cols, g.to_vec());
                acc(grads, *a, gt.matmul_t(vb).data);
                acc(grads, *b, va.t_matmul(&gt).data);
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.to_vec());
                acc(grads, *b, g.to_vec());
            }
            Op::AddRowBroadcast(m, bias) => {
                let vm = self.value(*m);
                acc(grads, *m, g.to_vec());
                let mut gb = vec![0.0; vm.cols];
                for r in 0..vm.rows {
                    for c in 0..vm.cols {
                        gb[c] += g[r * vm.cols + c];
                    }
                }
                acc(grads, *bias, gb);
            }
            Op::Relu(a) => {
                let out = &node.value;
                let ga = out
                    .data
                    .iter()
                    .zip(g)
                    .map(|(y, gy)| if *y > 0.0 { *gy } else { 0.0 })
                    .collect();
                acc(grads, *a, ga);
            }
            Op::NeighborMean(a, adj) => {
                let va = self.value(*a);
                let mut ga = vec![0.0; va.data.len()];
                for (u, neigh) in adj.iter().enumerate() {
                    if neigh.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / neigh.len() as f64;
                    for &v in neigh {
                        for c in 0..va.cols {
                            ga[v * va.cols + c] += g[u * va.cols + c] * inv;
                        }
                    }
                }
                acc(grads, *a, ga);
            }
            Op::GatherRows(a, index) => {
                let va = self.value(*a);
                let mut ga = vec![0.0; va.data.len()];
                for (t, &i) in index.iter().enumerate() {
                    for c in 0..va.cols {
                        ga[i * va.cols + c] += g[t * va.cols + c];
                    }
                }
                acc(grads, *a, ga);
            }
            Op::ConcatCols(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let cols = va.cols + vb.cols;
                let mut ga = vec![0.0; va.data.len()];
                let mut gb = vec![0.0; vb.data.len()];
                for r in 0..va.rows {
                    ga[r * va.cols..(r + 1) * va.cols]
                        .copy_from_slice(&g[r * cols..r * cols + va.cols]);
                    gb[r * vb.cols..(r + 1) * vb.cols]
                        .copy_from_slice(&g[r * cols + va.cols..(r + 1) * cols]);
                }
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::PairDot(h, pairs) => {
                let vh = self.value(*h);
                let mut gh = vec![0.0; vh.data.len()];
                for (i, &(u, v)) in pairs.iter().enumerate() {
                    let gi = g[i];
                    for c in 0..vh.cols {
                        gh[u * vh.cols + c] += gi * vh.at(v, c);
                        gh[v * vh.cols + c] += gi * vh.at(u, c);
                    }
                }
                acc(grads, *h, gh);
            }
            Op::PairHadamard(h, pairs) => {
                let vh = self.value(*h);
                let mut gh = vec![0.0; vh.data.len()];
                for (i, &(u, v)) in pairs.iter().enumerate() {
                    for c in 0..vh.cols {
                        let gi = g[i * vh.cols + c];
                        gh[u * vh.cols + c] += gi * vh.at(v, c);
                        gh[v * vh.cols + c] += gi * vh.at(u, c);
                    }
                }
                acc(grads, *h, gh);
            }
            Op::ScaleAdd(x, w, b) => {
                let (vx, vw) = (self.value(*x), self.value(*w));
                let w0 = vw.data[0];
                acc(grads, *x, g.iter().map(|gy| gy * w0).collect());
                let gw: f64 = g.iter().zip(&vx.data).map(|(gy, x)| gy * x).sum();
                acc(grads, *w, vec![gw]);
                acc(grads, *b, vec![g.iter().sum()]);
            }
            Op::SoftmaxCrossEntropy(logits, targets) => {
                let vl = self.value(*logits);
                let mut gl = vec![0.0; vl.data.len()];
                for (i, &y) in targets.iter().enumerate() {
                    let probs = softmax_row(vl.row(i));
                    let gi = g[i];
                    for c in 0..vl.cols {
                        let indicator = if c == y { 1.0 } else { 0.0 };
                        gl[i * vl.cols + c] = gi * (probs[c] - indicator);
                    }
                }
                acc(grads, *logits, gl);
            }
            Op::SquaredError(x, targets) => {
                let vx = self.value(*x);
                let gx = vx
                    .data
                    .iter()
                    .zip(targets.iter())
                    .zip(g)
                    .map(|((x, t), gy)| gy * 2.0 * (x - t))
                    .collect();
                acc(grads, *x, gx);
            }
            Op::LinComb(a, b, alpha, beta) => {
                acc(grads, *a, g.iter().map(|gy| gy * alpha).collect());
                acc(grads, *b, g.iter().map(|gy| gy * beta).collect());
            }
            Op::MulConst(x, weights) => {
                acc(
                    grads,
                    *x,
                    g.iter().zip(weights.iter()).map(|(gy, w)| gy * w).collect(),
                );
            }
            Op::Sum(x) => {
                let vx = self.value(*x);
                acc(grads, *x, vec![g[0]; vx.data.len()]);
            }
        }
    }
}

pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
