//! Tape-based reverse-mode differentiation over vectors.
//!
//! Every operation is evaluated eagerly when it is recorded; [`Graph::backward`]
//! walks the tape in reverse and accumulates parameter gradients.

use super::tensor::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

/// A value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Row { table: ParamId, row: usize },
    MatVec { w: ParamId, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Dot(Var, Var),
    Sum(Vec<Var>),
    Mean(Vec<Var>),
    Stack(Vec<Var>),
    SoftmaxCe { logits: Var, target: usize, probs: Vec<f64> },
    Bce { probs: Var, targets: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Probabilities are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn input(&mut self, data: Vec<f64>) -> Var {
        self.push(data, Op::Input)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![0.0; n])
    }

    /// The whole parameter tensor as a flat vector.
    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id).data.clone();
        self.push(value, Op::Param(id))
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, table: ParamId, row: usize) -> Result<Var> {
        let t = self.store.get(table);
        if row >= t.rows() {
            return Err(Error::shape(format!(
                "row {row} out of range for table {} with {} rows",
                self.store.name(table),
                t.rows()
            )));
        }
        let cols = t.cols();
        let value = t.data[row * cols..(row + 1) * cols].to_vec();
        Ok(self.push(value, Op::Row { table, row }))
    }

    pub fn matvec(&mut self, w: ParamId, x: Var) -> Result<Var> {
        let t = self.store.get(w);
        let (rows, cols) = (t.rows(), t.cols());
        let xv = &self.nodes[x.0].value;
        if xv.len() != cols {
            return Err(Error::shape(format!(
                "{} is {rows}x{cols} but input has length {}",
                self.store.name(w),
                xv.len()
            )));
        }
        let value = t
            .data
            .chunks_exact(cols.max(1))
            .take(rows)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(value, Op::MatVec { w, x }))
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (la, lb) = (self.len_of(a), self.len_of(b));
        if la != lb {
            return Err(Error::shape(format!("{what}: lengths {la} and {lb}")));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect()
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.value(a).iter().map(|x| f(*x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "add")?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "sub")?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "mul")?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.map(a, |x| x * k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| 1.0 - x);
        self.push(v, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let v = parts
            .iter()
            .flat_map(|p| self.value(*p).iter().copied())
            .collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.len_of(x);
        if start + len > n {
            return Err(Error::shape(format!(
                "slice {start}..{} of length {n}",
                start + len
            )));
        }
        let v = self.value(x)[start..start + len].to_vec();
        Ok(self.push(v, Op::Slice { x, start }))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "dot")?;
        let d = self.zip_with(a, b, |x, y| x * y).iter().sum();
        Ok(self.push(vec![d], Op::Dot(a, b)))
    }

    fn check_parts(&self, parts: &[Var], what: &str) -> Result<usize> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape(format!("{what} of nothing")))?;
        let n = self.len_of(*first);
        if parts.iter().any(|p| self.len_of(*p) != n) {
            return Err(Error::shape(format!("{what}: ragged inputs")));
        }
        Ok(n)
    }

    /// Element-wise sum of equal-length vectors.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.check_parts(parts, "sum")?;
        let mut v = vec![0.0; n];
        for p in parts {
            for (acc, x) in v.iter_mut().zip(self.value(*p)) {
                *acc += x;
            }
        }
        Ok(self.push(v, Op::Sum(parts.to_vec())))
    }

    /// Element-wise mean of equal-length vectors.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.check_parts(parts, "mean")?;
        let k = parts.len() as f64;
        let mut v = vec![0.0; n];
        for p in parts {
            for (acc, x) in v.iter_mut().zip(self.value(*p)) {
                *acc += x;
            }
        }
        for x in &mut v {
            *x /= k;
        }
        Ok(self.push(v, Op::Mean(parts.to_vec())))
    }

    /// Gather scalars into one vector.
    pub fn stack(&mut self, scalars: &[Var]) -> Result<Var> {
        if scalars.iter().any(|s| self.len_of(*s) != 1) {
            return Err(Error::shape("stack expects scalars"));
        }
        let v = scalars.iter().map(|s| self.scalar(*s)).collect();
        Ok(self.push(v, Op::Stack(scalars.to_vec())))
    }

    /// `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lv = self.value(logits);
        if target >= lv.len() {
            return Err(Error::Range(format!(
                "target {target} with {} classes",
                lv.len()
            )));
        }
        let loss = log_sum_exp(lv) - lv[target];
        let probs = softmax(lv);
        Ok(self.push(
            vec![loss],
            Op::SoftmaxCe {
                logits,
                target,
                probs,
            },
        ))
    }

    /// Mean binary cross-entropy of probabilities against 0/1 targets.
    pub fn binary_cross_entropy(&mut self, probs: Var, targets: &[f64]) -> Result<Var> {
        let p = self.value(probs);
        if p.len() != targets.len() {
            return Err(Error::shape(format!(
                "bce: {} probabilities, {} targets",
                p.len(),
                targets.len()
            )));
        }
        let loss = bce_value(p, targets);
        Ok(self.push(
            vec![loss],
            Op::Bce {
                probs,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every parameter it touches.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut out = Gradients::zeros_like(self.store);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0; self.len_of(loss)]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, f: impl Fn(usize) -> f64, n: usize) {
            let g = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
            for (i, gi) in g.iter_mut().enumerate() {
                *gi += f(i);
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let buf = out.buffer(*id, g.len());
                    for (b, x) in buf.iter_mut().zip(&g) {
                        *b += x;
                    }
                }
                Op::Row { table, row } => {
                    let t = self.store.get(*table);
                    let cols = t.cols();
                    let buf = out.buffer(*table, t.len());
                    for (b, x) in buf[row * cols..(row + 1) * cols].iter_mut().zip(&g) {
                        *b += x;
                    }
                }
                Op::MatVec { w, x } => {
                    let t = self.store.get(*w);
                    let cols = t.cols();
                    let xv = self.value(*x);
                    let buf = out.buffer(*w, t.len());
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for (b, xc) in buf[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                            *b += gr * xc;
                        }
                    }
                    let data = &t.data;
                    acc(
                        &mut grads,
                        *x,
                        |c| g.iter().enumerate().map(|(r, gr)| gr * data[r * cols + c]).sum(),
                        cols,
                    );
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, |i| g[i], g.len());
                    acc(&mut grads, *b, |i| g[i], g.len());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, |i| g[i], g.len());
                    acc(&mut grads, *b, |i| -g[i], g.len());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, |i| g[i] * bv[i], g.len());
                    acc(&mut grads, *b, |i| g[i] * av[i], g.len());
                }
                Op::Scale(a, k) => acc(&mut grads, *a, |i| g[i] * k, g.len()),
                Op::OneMinus(a) => acc(&mut grads, *a, |i| -g[i], g.len()),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(&mut grads, *a, |i| g[i] * y[i] * (1.0 - y[i]), g.len());
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    acc(&mut grads, *a, |i| g[i] * (1.0 - y[i] * y[i]), g.len());
                }
                Op::Relu(a) => {
                    let xv = self.value(*a);
                    acc(
                        &mut grads,
                        *a,
                        |i| if xv[i] > 0.0 { g[i] } else { 0.0 },
                        g.len(),
                    );
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    acc(&mut grads, *a, |i| y[i] * (g[i] - gy), g.len());
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.len_of(*p);
                        acc(&mut grads, *p, |i| g[off + i], n);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.len_of(*x);
                    let (s, len) = (*start, g.len());
                    acc(
                        &mut grads,
                        *x,
                        |i| if i >= s && i < s + len { g[i - s] } else { 0.0 },
                        n,
                    );
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, |i| g[0] * bv[i], av.len());
                    acc(&mut grads, *b, |i| g[0] * av[i], bv.len());
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(&mut grads, *p, |i| g[i], g.len());
                    }
                }
                Op::Mean(parts) => {
                    let k = parts.len() as f64;
                    for p in parts {
                        acc(&mut grads, *p, |i| g[i] / k, g.len());
                    }
                }
                Op::Stack(scalars) => {
                    for (i, s) in scalars.iter().enumerate() {
                        acc(&mut grads, *s, |_| g[i], 1);
                    }
                }
                Op::SoftmaxCe {
                    logits,
                    target,
                    probs,
                } => {
                    let t = *target;
                    acc(
                        &mut grads,
                        *logits,
                        |i| g[0] * (probs[i] - if i == t { 1.0 } else { 0.0 }),
                        probs.len(),
                    );
                }
                Op::Bce { probs, targets } => {
                    let pv = self.value(*probs);
                    let dp = bce_grad(pv, targets);
                    acc(&mut grads, *probs, |i| g[0] * dp[i], pv.len());
                }
            }
        }
        out
    }
}

pub(crate) fn bce_value(probs: &[f64], targets: &[f64]) -> f64 {
    let k = probs.len() as f64;
    probs
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / k
}

pub(crate) fn bce_grad(probs: &[f64], targets: &[f64]) -> Vec<f64> {
    let k = probs.len() as f64;
    probs
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            if *p < BCE_CLAMP || *p > 1.0 - BCE_CLAMP {
                0.0
            } else {
                (-t / p + (1.0 - t) / (1.0 - p)) / k
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;

    fn store_with(w: Vec<f64>, rows: usize, cols: usize) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::from_vec(&[rows, cols], w).unwrap()).unwrap();
        (s, id)
    }

    #[test]
    fn matvec_forward_and_backward() {
        let (s, w) = store_with(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3);
        let mut g = Graph::new(&s);
        let x = g.input(vec![1.0, 0.0, -1.0]);
        let y = g.matvec(w, x).unwrap();
        assert_eq!(g.value(y), &[-2.0, -2.0]);
        let ones = g.input(vec![1.0, 1.0]);
        let loss = g.dot(y, ones).unwrap();
        let grads = g.backward(loss);
        assert_eq!(grads.get(w).unwrap(), &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let (s, w) = store_with(vec![0.0; 6], 2, 3);
        let mut g = Graph::new(&s);
        let x = g.input(vec![1.0, 2.0]);
        assert!(matches!(g.matvec(w, x), Err(Error::Shape(_))));
        let y = g.input(vec![1.0]);
        assert!(g.add(x, y).is_err());
        assert!(g.row(w, 2).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, -3.0, 2.5, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
