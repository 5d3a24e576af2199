//! Dynamic computation graph with reverse-mode differentiation.
//!
//! Nodes are appended as operations are applied, so creation order is a topological order
//! and the backward pass walks it in reverse. Parameter tensors are never copied into the
//! graph: `Param` and `Lookup` nodes read straight from the [`ParamStore`], and their
//! gradients land in a [`Gradients`] table keyed by parameter.

use super::{Gradients, NnError, ParamId, ParamStore};

/// Handle to a graph node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Expr(usize);

#[derive(Debug, Clone)]
enum Op {
    Param(ParamId),
    Lookup(ParamId, usize),
    Input,
    MatVec(Expr, Expr),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Concat(Vec<Expr>),
    Slice(Expr, usize),
    Relu(Expr),
    Tanh(Expr),
    Sigmoid(Expr),
    Softmax(Expr),
    LogSoftmax(Expr),
    Gather(Expr, Vec<usize>),
    Pick(Expr, usize),
    Sum(Expr),
    SumAll(Vec<Expr>),
    Neg(Expr),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
    rows: usize,
    cols: usize,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    first_nonfinite: Option<usize>,
    backward_done: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            first_nonfinite: None,
            backward_done: false,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, e: Expr) -> &[f64] {
        let node = &self.nodes[e.0];
        match node.op {
            Op::Param(p) => self.params.value(p).data(),
            Op::Lookup(p, row) => self.params.value(p).row(row),
            _ => &node.value,
        }
    }

    pub fn scalar(&self, e: Expr) -> f64 {
        let v = self.value(e);
        assert_eq!(v.len(), 1, "not a scalar");
        v[0]
    }

    /// Number of entries of a vector node (rows × cols for matrices).
    pub fn dim(&self, e: Expr) -> usize {
        let n = &self.nodes[e.0];
        n.rows * n.cols
    }

    fn push(&mut self, op: Op, value: Vec<f64>, rows: usize, cols: usize) -> Expr {
        if self.first_nonfinite.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.first_nonfinite = Some(self.nodes.len());
        }
        self.nodes.push(Node {
            op,
            value,
            rows,
            cols,
        });
        Expr(self.nodes.len() - 1)
    }

    fn vec_len(&self, e: Expr) -> usize {
        let n = &self.nodes[e.0];
        assert_eq!(
            n.cols, 1,
            "expected a vector, found a {}x{} matrix",
            n.rows, n.cols
        );
        n.rows
    }

    /// A whole parameter tensor (matrix or vector).
    pub fn param(&mut self, id: ParamId) -> Expr {
        let t = self.params.value(id);
        let (rows, cols) = (t.rows(), t.cols());
        self.push(Op::Param(id), Vec::new(), rows, cols)
    }

    /// One row of a parameter matrix, as a vector.
    pub fn lookup(&mut self, id: ParamId, row: usize) -> Expr {
        let t = self.params.value(id);
        assert!(row < t.rows(), "lookup row {row} out of {}", t.rows());
        let cols = t.cols();
        self.push(Op::Lookup(id, row), Vec::new(), cols, 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> Expr {
        let n = value.len();
        self.push(Op::Input, value, n, 1)
    }

    pub fn matvec(&mut self, w: Expr, x: Expr) -> Expr {
        let (rows, cols) = (self.nodes[w.0].rows, self.nodes[w.0].cols);
        assert_eq!(cols, self.vec_len(x), "matvec dimension mismatch");
        let wv = self.value(w);
        let xv = self.value(x);
        let out = wv
            .chunks_exact(cols)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(Op::MatVec(w, x), out, rows, 1)
    }

    pub fn add(&mut self, a: Expr, b: Expr) -> Expr {
        let n = self.vec_len(a);
        assert_eq!(n, self.vec_len(b), "add dimension mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        self.push(Op::Add(a, b), out, n, 1)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Expr, b: Expr) -> Expr {
        let n = self.vec_len(a);
        assert_eq!(n, self.vec_len(b), "mul dimension mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        self.push(Op::Mul(a, b), out, n, 1)
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: Expr, x: Expr, b: Expr) -> Expr {
        let wx = self.matvec(w, x);
        self.add(wx, b)
    }

    pub fn concat(&mut self, parts: &[Expr]) -> Expr {
        let mut out = Vec::with_capacity(parts.iter().map(|&p| self.vec_len(p)).sum());
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        self.push(Op::Concat(parts.to_vec()), out, n, 1)
    }

    pub fn slice(&mut self, x: Expr, start: usize, len: usize) -> Expr {
        assert!(start + len <= self.vec_len(x), "slice out of range");
        let out = self.value(x)[start..start + len].to_vec();
        self.push(Op::Slice(x, start), out, len, 1)
    }

    fn map(&mut self, x: Expr, op: Op, f: impl Fn(f64) -> f64) -> Expr {
        let n = self.vec_len(x);
        let out = self.value(x).iter().map(|&v| f(v)).collect();
        self.push(op, out, n, 1)
    }

    pub fn relu(&mut self, x: Expr) -> Expr {
        self.map(x, Op::Relu(x), |v| v.max(0.0))
    }

    pub fn tanh(&mut self, x: Expr) -> Expr {
        self.map(x, Op::Tanh(x), f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Expr) -> Expr {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn neg(&mut self, x: Expr) -> Expr {
        self.map(x, Op::Neg(x), |v| -v)
    }

    pub fn softmax(&mut self, x: Expr) -> Expr {
        let n = self.vec_len(x);
        let lse = log_sum_exp(self.value(x));
        let out = self.value(x).iter().map(|v| (v - lse).exp()).collect();
        self.push(Op::Softmax(x), out, n, 1)
    }

    pub fn log_softmax(&mut self, x: Expr) -> Expr {
        let n = self.vec_len(x);
        let lse = log_sum_exp(self.value(x));
        let out = self.value(x).iter().map(|v| v - lse).collect();
        self.push(Op::LogSoftmax(x), out, n, 1)
    }

    /// The entries at `indices`, in that order.
    pub fn gather(&mut self, x: Expr, indices: &[usize]) -> Expr {
        let v = self.value(x);
        let out = indices.iter().map(|&i| v[i]).collect();
        self.push(Op::Gather(x, indices.to_vec()), out, indices.len(), 1)
    }

    /// Entry `i` as a scalar.
    pub fn pick(&mut self, x: Expr, i: usize) -> Expr {
        let out = vec![self.value(x)[i]];
        self.push(Op::Pick(x, i), out, 1, 1)
    }

    /// Sum of a vector's entries, as a scalar.
    pub fn sum(&mut self, x: Expr) -> Expr {
        let out = vec![self.value(x).iter().sum()];
        self.push(Op::Sum(x), out, 1, 1)
    }

    /// Elementwise sum of equally sized vectors.
    pub fn sum_all(&mut self, xs: &[Expr]) -> Expr {
        assert!(!xs.is_empty(), "sum of nothing");
        let n = self.vec_len(xs[0]);
        let mut out = vec![0.0; n];
        for &x in xs {
            assert_eq!(self.vec_len(x), n, "sum_all dimension mismatch");
            for (o, v) in out.iter_mut().zip(self.value(x)) {
                *o += v;
            }
        }
        self.push(Op::SumAll(xs.to_vec()), out, n, 1)
    }

    pub fn check_finite(&self) -> Result<(), NnError> {
        match self.first_nonfinite {
            Some(i) => Err(NnError::NonFinite(format!(
                "forward value of node {i} ({:?})",
                self.nodes[i].op
            ))),
            None => Ok(()),
        }
    }

    /// Gradients of scalar `loss` with respect to every trainable parameter.
    pub fn backward(&mut self, loss: Expr) -> Result<Gradients, NnError> {
        if self.backward_done {
            return Err(NnError::BackwardTwice);
        }
        self.check_finite()?;
        assert_eq!(self.dim(loss), 1, "loss must be a scalar");
        self.backward_done = true;

        let params = self.params;
        let mut grads = Gradients::new(params.len());
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        node_grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            let mut acc = Accumulator {
                graph: self,
                node_grads: &mut node_grads,
                grads: &mut grads,
            };
            match &node.op {
                Op::Param(p) => {
                    if params.get(*p).trainable {
                        add_into(grads.slot(*p, g.len()), &g);
                    }
                }
                Op::Lookup(p, row) => {
                    if params.get(*p).trainable {
                        let t = params.value(*p);
                        let cols = t.cols();
                        let slot = grads.slot(*p, t.len());
                        add_into(&mut slot[row * cols..(row + 1) * cols], &g);
                    }
                }
                Op::Input => {}
                Op::MatVec(w, x) => acc.matvec(*w, *x, &g),
                Op::Add(a, b) => {
                    acc.add(*a, &g);
                    acc.add(*b, &g);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> = g.iter().zip(self.value(*b)).map(|(g, y)| g * y).collect();
                    let db: Vec<f64> = g.iter().zip(self.value(*a)).map(|(g, x)| g * x).collect();
                    acc.add(*a, &da);
                    acc.add(*b, &db);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.dim(p);
                        acc.add(p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Slice(x, start) => {
                    let mut dx = vec![0.0; self.dim(*x)];
                    dx[*start..start + g.len()].copy_from_slice(&g);
                    acc.add(*x, &dx);
                }
                Op::Relu(x) => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(g, y)| if *y > 0.0 { *g } else { 0.0 })
                        .collect();
                    acc.add(*x, &dx);
                }
                Op::Tanh(x) => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    acc.add(*x, &dx);
                }
                Op::Sigmoid(x) => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    acc.add(*x, &dx);
                }
                Op::Softmax(x) => {
                    let dot: f64 = g.iter().zip(&node.value).map(|(g, y)| g * y).sum();
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(g, y)| y * (g - dot))
                        .collect();
                    acc.add(*x, &dx);
                }
                Op::LogSoftmax(x) => {
                    let total: f64 = g.iter().sum();
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(g, y)| g - y.exp() * total)
                        .collect();
                    acc.add(*x, &dx);
                }
                Op::Gather(x, indices) => {
                    let mut dx = vec![0.0; self.dim(*x)];
                    for (&i, g) in indices.iter().zip(&g) {
                        dx[i] += g;
                    }
                    acc.add(*x, &dx);
                }
                Op::Pick(x, i) => {
                    let mut dx = vec![0.0; self.dim(*x)];
                    dx[*i] = g[0];
                    acc.add(*x, &dx);
                }
                Op::Sum(x) => {
                    let dx = vec![g[0]; self.dim(*x)];
                    acc.add(*x, &dx);
                }
                Op::SumAll(xs) => {
                    for &x in xs {
                        acc.add(x, &g);
                    }
                }
                Op::Neg(x) => {
                    let dx: Vec<f64> = g.iter().map(|v| -v).collect();
                    acc.add(*x, &dx);
                }
            }
        }

        for (id, g) in grads.grads.iter().enumerate() {
            if let Some(g) = g {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(NnError::NonFinite(format!(
                        "gradient of {}",
                        params.get(ParamId(id)).name
                    )));
                }
            }
        }
        Ok(grads)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

struct Accumulator<'a, 'g, 'p> {
    graph: &'g Graph<'p>,
    node_grads: &'a mut Vec<Option<Vec<f64>>>,
    grads: &'a mut Gradients,
}

impl Accumulator<'_, '_, '_> {
    fn add(&mut self, target: Expr, g: &[f64]) {
        match self.graph.nodes[target.0].op {
            // Parameters are handled directly so their gradients are not materialized per node.
            Op::Param(p) => {
                if self.graph.params.get(p).trainable {
                    add_into(self.grads.slot(p, g.len()), g);
                }
            }
            Op::Lookup(p, row) => {
                if self.graph.params.get(p).trainable {
                    let t = self.graph.params.value(p);
                    let cols = t.cols();
                    let slot = self.grads.slot(p, t.len());
                    add_into(&mut slot[row * cols..(row + 1) * cols], g);
                }
            }
            Op::Input => {}
            _ => match &mut self.node_grads[target.0] {
                Some(existing) => add_into(existing, g),
                slot @ None => *slot = Some(g.to_vec()),
            },
        }
    }

    fn matvec(&mut self, w: Expr, x: Expr, g: &[f64]) {
        let cols = self.graph.nodes[w.0].cols;
        let wv = self.graph.value(w);
        let xv = self.graph.value(x);

        let mut dx = vec![0.0; cols];
        for (row, gr) in wv.chunks_exact(cols).zip(g) {
            if *gr != 0.0 {
                for (d, wrc) in dx.iter_mut().zip(row) {
                    *d += gr * wrc;
                }
            }
        }
        self.add(x, &dx);

        match self.graph.nodes[w.0].op {
            Op::Param(p) => {
                if self.graph.params.get(p).trainable {
                    let slot = self.grads.slot(p, wv.len());
                    for (drow, gr) in slot.chunks_exact_mut(cols).zip(g) {
                        if *gr != 0.0 {
                            for (d, xc) in drow.iter_mut().zip(xv) {
                                *d += gr * xc;
                            }
                        }
                    }
                }
            }
            _ => {
                let mut dw = vec![0.0; wv.len()];
                for (drow, gr) in dw.chunks_exact_mut(cols).zip(g) {
                    for (d, xc) in drow.iter_mut().zip(xv) {
                        *d = gr * xc;
                    }
                }
                self.add(w, &dw);
            }
        }
    }
}
