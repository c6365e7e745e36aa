//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every value together with the op that produced it;
//! [`Tape::backward`] walks the record in reverse and accumulates gradients.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::operators::SparseMatrix;
use crate::par::Execution;

/// Floor applied to row norms in [`Tape::row_l2_normalize`].
pub const L2_EPS: f64 = 1e-12;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A sparse propagation matrix together with its transpose, which the
/// reverse rule needs.
#[derive(Debug, Clone)]
pub struct Propagation {
    fwd: Arc<SparseMatrix>,
    bwd: Arc<SparseMatrix>,
}

impl Propagation {
    pub fn new(m: SparseMatrix) -> Self {
        let t = m.transpose();
        Self {
            fwd: Arc::new(m),
            bwd: Arc::new(t),
        }
    }

    /// The same pair with roles swapped, i.e. propagation by `Mᵀ`.
    pub fn transposed(&self) -> Self {
        Self {
            fwd: Arc::clone(&self.bwd),
            bwd: Arc::clone(&self.fwd),
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.fwd
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    RowL2Normalize(Var, Vec<f64>),
    MaxPool(Vec<Var>, Vec<u32>),
    ConcatCols(Vec<Var>),
    Dropout(Var, Array2<f64>),
    AddBias(Var, Var),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Array2<f64>,
        rows: Vec<usize>,
        labels: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    exec: Execution,
}

/// Gradients of the leaves, produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of leaf `v`; zeros when `v` did not influence the loss.
    pub fn get(&self, v: Var) -> Array2<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Array2::zeros(self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Array2<f64> {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Array2::zeros(self.shapes[v.0]))
    }
}

fn check_finite(value: &Array2<f64>, op: &'static str) -> Result<()> {
    // Branch-free inner loop so the scan vectorizes.
    let finite = match value.as_slice_memory_order() {
        Some(s) => s
            .chunks(64)
            .all(|c| c.iter().fold(true, |ok, v| ok & v.is_finite())),
        None => value.iter().all(|v| v.is_finite()),
    };
    if finite {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new(Execution::default())
    }
}

impl Tape {
    pub fn new(exec: Execution) -> Self {
        Self {
            nodes: Vec::new(),
            exec,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1×1` node such as a loss.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, name: &'static str) -> Result<Var> {
        check_finite(&value, name)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ca != rb {
            return Err(Error::shape(format!("matmul {ra}x{ca} by {rb}x{cb}")));
        }
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn spmm(&mut self, s: &Propagation, x: Var) -> Result<Var> {
        let out = s.fwd.matmul_dense_with(self.value(x).view(), self.exec)?;
        self.push(out, Op::SpMM(Arc::clone(&s.bwd), x), "spmm")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!(
                "add {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(a), "relu")
    }

    /// Divide each row by `max(‖row‖₂, L2_EPS)`.
    pub fn row_l2_normalize(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let norms: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt().max(L2_EPS))
            .collect();
        let mut out = x.clone();
        for (mut row, &nrm) in out.rows_mut().into_iter().zip(&norms) {
            row /= nrm;
        }
        self.push(out, Op::RowL2Normalize(a, norms), "row_l2_normalize")
    }

    /// Elementwise maximum over same-shaped inputs; ties go to the earliest.
    pub fn max_pool(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::shape("max_pool over an empty list"))?;
        let shape = self.shape(first);
        if inputs.iter().any(|&v| self.shape(v) != shape) {
            return Err(Error::shape("max_pool inputs differ in shape"));
        }
        let mut out = self.value(first).clone();
        let mut arg = vec![0u32; out.len()];
        for (k, &v) in inputs.iter().enumerate().skip(1) {
            let x = self.value(v);
            for ((o, a), &xv) in out.iter_mut().zip(arg.iter_mut()).zip(x.iter()) {
                if xv > *o {
                    *o = xv;
                    *a = k as u32;
                }
            }
        }
        self.push(out, Op::MaxPool(inputs.to_vec(), arg), "max_pool")
    }

    pub fn concat_cols(&mut self, inputs: &[Var]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::shape("concat over an empty list"));
        }
        let rows = self.shape(inputs[0]).0;
        if inputs.iter().any(|&v| self.shape(v).0 != rows) {
            return Err(Error::shape("concat inputs differ in row count"));
        }
        let views: Vec<_> = inputs.iter().map(|&v| self.value(v).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::shape(e.to_string()))?;
        self.push(out, Op::ConcatCols(inputs.to_vec()), "concat_cols")
    }

    /// Inverted dropout: zero each entry with probability `rate` and scale
    /// survivors by `1/(1-rate)`.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = Array2::from_shape_simple_fn(self.shape(a), || {
            if rng.gen::<f64>() < rate {
                0.0
            } else {
                keep
            }
        });
        let out = self.value(a) * &mask;
        self.push(out, Op::Dropout(a, mask), "dropout")
    }

    /// Add a `1×d` row vector to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, c) = self.shape(a);
        if self.shape(bias) != (1, c) {
            return Err(Error::shape(format!(
                "bias {:?} for width {c}",
                self.shape(bias)
            )));
        }
        let out = self.value(a) + self.value(bias);
        self.push(out, Op::AddBias(a, bias), "add_bias")
    }

    /// Mean cross-entropy of `softmax(logits)` over the given rows.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        rows: &[usize],
    ) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Contract(
                "cross-entropy over an empty index set".into(),
            ));
        }
        let x = self.value(logits);
        let (n, c) = x.dim();
        if labels.len() != n {
            return Err(Error::shape(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        let mut probs = Array2::zeros((rows.len(), c));
        let mut loss = 0.0;
        let mut sub_labels = Vec::with_capacity(rows.len());
        for (k, &i) in rows.iter().enumerate() {
            let y = labels[i];
            if i >= n || y >= c {
                return Err(Error::shape(format!("row {i} or label {y} out of range")));
            }
            let row = x.row(i);
            let mx = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut z = 0.0;
            for (p, &v) in probs.row_mut(k).iter_mut().zip(row.iter()) {
                *p = (v - mx).exp();
                z += *p;
            }
            probs.row_mut(k).mapv_inplace(|p| p / z);
            loss += z.ln() + mx - row[y];
            sub_labels.push(y);
        }
        let out = Array2::from_elem((1, 1), loss / rows.len() as f64);
        self.push(
            out,
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                rows: rows.to_vec(),
                labels: sub_labels,
            },
            "softmax_cross_entropy",
        )
    }

    /// Signature of every piecewise choice (ReLU masks, max-pool winners)
    /// on the tape. Two evaluations with equal signatures lie on the same
    /// smooth piece.
    pub fn kink_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(a) => out.extend(self.value(*a).iter().map(|&v| u32::from(v > 0.0))),
                Op::MaxPool(_, arg) => out.extend_from_slice(arg),
                _ => {}
            }
        }
        out
    }

    /// Gradients of the `1×1` node `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("backward needs a 1x1 loss"));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(mut g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => grads[idx] = Some(g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::SpMM(t, x) => {
                    let gx = t.matmul_dense_with(g.view(), self.exec)?;
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::Scale(a, c) => {
                    g *= *c;
                    accumulate(&mut grads[a.0], g);
                }
                Op::Relu(a) => {
                    Zip::from(&mut g).and(self.value(*a)).for_each(|gv, &x| {
                        if x <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    accumulate(&mut grads[a.0], g);
                }
                Op::RowL2Normalize(a, norms) => {
                    let y = &node.value;
                    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
                        let nrm = norms[i];
                        if nrm > L2_EPS {
                            let yr = y.row(i);
                            let proj = yr.dot(&row);
                            row.zip_mut_with(&yr, |gv, &yv| *gv -= yv * proj);
                        }
                        row /= nrm;
                    }
                    accumulate(&mut grads[a.0], g);
                }
                Op::MaxPool(inputs, arg) => {
                    for (k, v) in inputs.iter().enumerate() {
                        let mut gk = g.clone();
                        for (gv, &w) in gk.iter_mut().zip(arg.iter()) {
                            if w as usize != k {
                                *gv = 0.0;
                            }
                        }
                        accumulate(&mut grads[v.0], gk);
                    }
                }
                Op::ConcatCols(inputs) => {
                    let mut start = 0;
                    for v in inputs {
                        let w = self.shape(*v).1;
                        let part = g.slice(ndarray::s![.., start..start + w]).to_owned();
                        accumulate(&mut grads[v.0], part);
                        start += w;
                    }
                }
                Op::Dropout(a, mask) => {
                    g *= mask;
                    accumulate(&mut grads[a.0], g);
                }
                Op::AddBias(a, bias) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[a.0], g);
                    accumulate(&mut grads[bias.0], gb);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    rows,
                    labels,
                } => {
                    let scale = g[[0, 0]] / rows.len() as f64;
                    let mut gl = Array2::zeros(self.shape(*logits));
                    for (k, (&i, &y)) in rows.iter().zip(labels).enumerate() {
                        let mut r = gl.row_mut(i);
                        r.scaled_add(scale, &probs.row(k));
                        r[y] -= scale;
                    }
                    accumulate(&mut grads[logits.0], gl);
                }
            }
        }
        for g in grads.iter().flatten() {
            check_finite(g, "backward")?;
        }
        let shapes = self.nodes.iter().map(|n| n.value.dim()).collect();
        Ok(Gradients { grads, shapes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn relu_forward_and_mask() {
        let mut t = Tape::default();
        let x = t.leaf(array![[-1.0, 2.0]]).unwrap();
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y), &array![[0.0, 2.0]]);
        let w = t.leaf(array![[1.0], [1.0]]).unwrap();
        let s = t.matmul(y, w).unwrap();
        let l = t.softmax_cross_entropy(s, &[0], &[0]).unwrap();
        let g = t.backward(l).unwrap();
        // single-class softmax has zero loss and zero gradient
        assert_eq!(t.scalar(l), 0.0);
        assert_eq!(g.get(x), array![[0.0, 0.0]]);
    }

    #[test]
    fn identity_spmm_passes_values_and_gradients() {
        let p = Propagation::new(SparseMatrix::identity(2));
        let mut t = Tape::default();
        let x = t.leaf(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let y = t.spmm(&p, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let l = t.softmax_cross_entropy(y, &[0, 1], &[0, 1]).unwrap();
        let g = t.backward(l).unwrap();
        let mut t2 = Tape::default();
        let x2 = t2.leaf(t.value(x).clone()).unwrap();
        let l2 = t2.softmax_cross_entropy(x2, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(g.get(x), t2.backward(l2).unwrap().get(x2));
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let mut t = Tape::default();
        let x = t.leaf(array![[0.0, 0.0]]).unwrap();
        let l = t.softmax_cross_entropy(x, &[0], &[0]).unwrap();
        assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x), array![[-0.5, 0.5]]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut t = Tape::default();
        let x = t.leaf(array![[1e308]]).unwrap();
        assert!(matches!(
            t.scale(x, 10.0),
            Err(Error::NonFinite { op: "scale" })
        ));
        assert!(t.leaf(array![[f64::NAN]]).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::default();
        let a = t.leaf(Array2::zeros((2, 3))).unwrap();
        let b = t.leaf(Array2::zeros((2, 3))).unwrap();
        assert!(matches!(t.matmul(a, b), Err(Error::Shape(_))));
        let c = t.leaf(Array2::zeros((3, 2))).unwrap();
        assert!(t.add(a, c).is_err());
        assert!(t.max_pool(&[a, c]).is_err());
        assert!(t.concat_cols(&[a, c]).is_err());
        assert!(t.softmax_cross_entropy(a, &[0, 0], &[]).is_err());
    }

    #[test]
    fn max_pool_and_concat_route_gradients() {
        let mut t = Tape::default();
        let a = t.leaf(array![[1.0, 5.0]]).unwrap();
        let b = t.leaf(array![[3.0, 5.0]]).unwrap();
        let m = t.max_pool(&[a, b]).unwrap();
        assert_eq!(t.value(m), &array![[3.0, 5.0]]);
        let c = t.concat_cols(&[m, a]).unwrap();
        assert_eq!(t.value(c), &array![[3.0, 5.0, 1.0, 5.0]]);
        let w = t.leaf(array![[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let s = t.matmul(c, w).unwrap();
        let z = t.leaf(array![[0.0]]).unwrap();
        let s2 = t.concat_cols(&[s, z]).unwrap();
        let l = t.softmax_cross_entropy(s2, &[1], &[0]).unwrap();
        let g = t.backward(l).unwrap();
        // d loss / d s is the softmax weight of the first logit
        let gs = 1.0 / (1.0 + (-t.scalar(s)).exp());
        // a gets the ties plus its direct path, b only its winning entry
        let close = |u: Array2<f64>, v: Array2<f64>| (u - v).iter().all(|d| d.abs() < 1e-15);
        assert!(close(g.get(b), array![[gs, 0.0]]));
        assert!(close(g.get(a), array![[3.0 * gs, 6.0 * gs]]));
    }

    #[test]
    fn zero_row_normalization_is_finite() {
        let mut t = Tape::default();
        let x = t.leaf(array![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let y = t.row_l2_normalize(x).unwrap();
        assert_eq!(t.value(y), &array![[0.0, 0.0], [0.6, 0.8]]);
    }
}
