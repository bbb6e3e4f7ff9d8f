//! Tape-based reverse-mode differentiation over dense matrices, the Adam
//! optimizer, and a finite-difference gradient checker.
//!
//! A [`Tape`] records primitive operations in topological order during the
//! forward pass; [`Tape::backward`] replays them once in reverse, accumulating
//! gradients additively. Leaves may be bound to entries of a [`ParamSet`],
//! and [`Tape::copy_grads`] moves leaf gradients into the trainable
//! parameters only, so frozen parameters never accumulate gradient.

use std::rc::Rc;

use crate::dense::{matmul_nt_acc, matmul_tn_acc, DenseMatrix};
use crate::sparse::SparseRealMatrix;
use crate::{Result, SgptError};

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: DenseMatrix, trainable: bool) -> ParamId {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = 0.0;
            }
        }
    }
}

/// Bias-corrected Adam. Moment state is keyed by parameter position, so the
/// same optimizer instance must always see the same [`ParamSet`] layout.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u32,
    m: Vec<Option<DenseMatrix>>,
    v: Vec<Option<DenseMatrix>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        if self.m.len() < params.len() {
            self.m.resize(params.len(), None);
            self.v.resize(params.len(), None);
        }
        for (i, p) in params.params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let m = self.m[i]
                .get_or_insert_with(|| DenseMatrix::zeros(p.value.rows(), p.value.cols()));
            let v = self.v[i]
                .get_or_insert_with(|| DenseMatrix::zeros(p.value.rows(), p.value.cols()));
            for (((x, &g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *x -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul {
        a: usize,
        b: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Scale {
        a: usize,
        factor: f64,
    },
    Relu {
        a: usize,
    },
    ConcatCols {
        parts: Vec<usize>,
    },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: DenseMatrix,
        inv_std: Vec<f64>,
    },
    CosineRows {
        a: usize,
        b: usize,
        norm_a: Vec<f64>,
        norm_b: Vec<f64>,
    },
    CosineCross {
        x: usize,
        p: usize,
        norm_x: Vec<f64>,
        norm_p: Vec<f64>,
    },
    SoftmaxRows {
        x: usize,
    },
    SoftmaxCrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        probs: DenseMatrix,
    },
    RowWeightedSum {
        mats: Vec<usize>,
        weights: usize,
    },
    GatherRows {
        x: usize,
        rows: Vec<usize>,
    },
    Spmm {
        adj: Rc<SparseRealMatrix>,
        x: usize,
    },
}

#[derive(Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<DenseMatrix>,
    grads: Vec<Option<DenseMatrix>>,
    bindings: Vec<(usize, usize)>,
}

fn row_norms(m: &DenseMatrix, context: &'static str) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let n = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(SgptError::InvalidInput(format!(
                "{context}: row {i} has zero norm"
            )));
        }
        norms.push(n);
    }
    Ok(norms)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, value: DenseMatrix) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        NodeId(self.ops.len() - 1)
    }

    /// Constant leaf.
    pub fn input(&mut self, value: DenseMatrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Leaf bound to a parameter; its gradient flows back through
    /// [`Tape::copy_grads`] when the parameter is trainable.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        let node = self.push(Op::Leaf, params.get(id).value.clone());
        self.bindings.push((node.0, id.0));
        node
    }

    pub fn value(&self, n: NodeId) -> &DenseMatrix {
        &self.values[n.0]
    }

    /// Gradient w.r.t. a leaf after [`Tape::backward`]; interior gradients
    /// are released during the reverse sweep.
    pub fn grad(&self, n: NodeId) -> Option<&DenseMatrix> {
        self.grads.get(n.0).and_then(|g| g.as_ref())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.values[a.0].matmul(&self.values[b.0])?;
        Ok(self.push(Op::Matmul { a: a.0, b: b.0 }, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.values[a.0].add(&self.values[b.0])?;
        Ok(self.push(Op::Add { a: a.0, b: b.0 }, value))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.values[a.0].scale(factor);
        self.push(Op::Scale { a: a.0, factor }, value)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut value = self.values[a.0].clone();
        for v in value.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(Op::Relu { a: a.0 }, value)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(SgptError::InvalidInput("concat_cols of zero parts".into()));
        }
        let rows = self.values[parts[0].0].rows();
        let mut cols = 0;
        for p in parts {
            let m = &self.values[p.0];
            if m.rows() != rows {
                return Err(SgptError::ShapeMismatch {
                    context: "concat_cols",
                    details: format!("row counts {} vs {}", rows, m.rows()),
                });
            }
            cols += m.cols();
        }
        let mut value = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            let out = value.row_mut(i);
            let mut off = 0;
            for p in parts {
                let src = self.values[p.0].row(i);
                out[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        Ok(self.push(
            Op::ConcatCols {
                parts: parts.iter().map(|p| p.0).collect(),
            },
            value,
        ))
    }

    /// Normalize each column over the row batch with eps 1e-5, then apply the
    /// learnable affine `gamma * xhat + beta` (both 1 x d).
    pub fn batchnorm_rows(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let (n, d) = (self.values[x.0].rows(), self.values[x.0].cols());
        if n < 2 {
            return Err(SgptError::InvalidInput(format!(
                "batch of size {n} is too small for batch normalization"
            )));
        }
        for (name, node) in [("gamma", gamma), ("beta", beta)] {
            let m = &self.values[node.0];
            if m.rows() != 1 || m.cols() != d {
                return Err(SgptError::ShapeMismatch {
                    context: "batchnorm_rows",
                    details: format!("{name} is {}x{}, want 1x{d}", m.rows(), m.cols()),
                });
            }
        }
        let xv = &self.values[x.0];
        let mut xhat = DenseMatrix::zeros(n, d);
        let mut inv_std = vec![0.0; d];
        for j in 0..d {
            let mean = (0..n).map(|i| xv.get(i, j)).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| {
                    let c = xv.get(i, j) - mean;
                    c * c
                })
                .sum::<f64>()
                / n as f64;
            let s = 1.0 / (var + BN_EPS).sqrt();
            inv_std[j] = s;
            for i in 0..n {
                xhat.set(i, j, (xv.get(i, j) - mean) * s);
            }
        }
        let gv = &self.values[gamma.0];
        let bv = &self.values[beta.0];
        let mut value = DenseMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                value.set(i, j, gv.get(0, j) * xhat.get(i, j) + bv.get(0, j));
            }
        }
        Ok(self.push(
            Op::BatchNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                inv_std,
            },
            value,
        ))
    }

    /// Row-wise cosine similarity between matching rows of `a` and `b`;
    /// output is n x 1.
    pub fn cosine_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        if !av.same_shape(bv) {
            return Err(SgptError::ShapeMismatch {
                context: "cosine_rows",
                details: format!(
                    "{}x{} vs {}x{}",
                    av.rows(),
                    av.cols(),
                    bv.rows(),
                    bv.cols()
                ),
            });
        }
        let norm_a = row_norms(av, "cosine_rows")?;
        let norm_b = row_norms(bv, "cosine_rows")?;
        let mut value = DenseMatrix::zeros(av.rows(), 1);
        for i in 0..av.rows() {
            let dot: f64 = av.row(i).iter().zip(bv.row(i)).map(|(x, y)| x * y).sum();
            value.set(i, 0, dot / (norm_a[i] * norm_b[i]));
        }
        Ok(self.push(
            Op::CosineRows {
                a: a.0,
                b: b.0,
                norm_a,
                norm_b,
            },
            value,
        ))
    }

    /// Cosine similarity of every row of `x` against every row of `p`;
    /// output is n x m.
    pub fn cosine_cross(&mut self, x: NodeId, p: NodeId) -> Result<NodeId> {
        let (xv, pv) = (&self.values[x.0], &self.values[p.0]);
        if xv.cols() != pv.cols() {
            return Err(SgptError::ShapeMismatch {
                context: "cosine_cross",
                details: format!("widths {} vs {}", xv.cols(), pv.cols()),
            });
        }
        let norm_x = row_norms(xv, "cosine_cross")?;
        let norm_p = row_norms(pv, "cosine_cross")?;
        let mut value = DenseMatrix::zeros(xv.rows(), pv.rows());
        for i in 0..xv.rows() {
            for j in 0..pv.rows() {
                let dot: f64 = xv.row(i).iter().zip(pv.row(j)).map(|(a, b)| a * b).sum();
                value.set(i, j, dot / (norm_x[i] * norm_p[j]));
            }
        }
        Ok(self.push(
            Op::CosineCross {
                x: x.0,
                p: p.0,
                norm_x,
                norm_p,
            },
            value,
        ))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let xv = &self.values[x.0];
        let mut value = DenseMatrix::zeros(xv.rows(), xv.cols());
        for i in 0..xv.rows() {
            let row = xv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                value.set(i, j, e);
                sum += e;
            }
            for j in 0..xv.cols() {
                value.set(i, j, value.get(i, j) / sum);
            }
        }
        self.push(Op::SoftmaxRows { x: x.0 }, value)
    }

    /// Mean over rows of the cross-entropy between row softmax and the
    /// per-row target index; output is 1 x 1.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let lv = &self.values[logits.0];
        let (n, m) = (lv.rows(), lv.cols());
        if n == 0 {
            return Err(SgptError::InvalidInput("cross-entropy over empty batch".into()));
        }
        if targets.len() != n {
            return Err(SgptError::ShapeMismatch {
                context: "softmax_cross_entropy",
                details: format!("{n} logit rows but {} targets", targets.len()),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= m) {
            return Err(SgptError::ShapeMismatch {
                context: "softmax_cross_entropy",
                details: format!("target {bad} out of range for {m} classes"),
            });
        }
        let mut probs = DenseMatrix::zeros(n, m);
        let mut total = 0.0;
        for i in 0..n {
            let row = lv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs.set(i, j, e);
                sum += e;
            }
            for j in 0..m {
                probs.set(i, j, probs.get(i, j) / sum);
            }
            total += max + sum.ln() - row[targets[i]];
        }
        let value = DenseMatrix::from_vec(1, 1, vec![total / n as f64])?;
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits: logits.0,
                targets: targets.to_vec(),
                probs,
            },
            value,
        ))
    }

    /// Weighted sum of equally shaped matrices; `weights` is 1 x k.
    pub fn row_weighted_sum(&mut self, mats: &[NodeId], weights: NodeId) -> Result<NodeId> {
        if mats.is_empty() {
            return Err(SgptError::InvalidInput("weighted sum of zero matrices".into()));
        }
        let wv = &self.values[weights.0];
        if wv.rows() != 1 || wv.cols() != mats.len() {
            return Err(SgptError::ShapeMismatch {
                context: "row_weighted_sum",
                details: format!(
                    "weights are {}x{}, want 1x{}",
                    wv.rows(),
                    wv.cols(),
                    mats.len()
                ),
            });
        }
        let shape = (self.values[mats[0].0].rows(), self.values[mats[0].0].cols());
        for m in mats {
            let v = &self.values[m.0];
            if (v.rows(), v.cols()) != shape {
                return Err(SgptError::ShapeMismatch {
                    context: "row_weighted_sum",
                    details: format!("{}x{} vs {}x{}", v.rows(), v.cols(), shape.0, shape.1),
                });
            }
        }
        let mut value = DenseMatrix::zeros(shape.0, shape.1);
        for (j, m) in mats.iter().enumerate() {
            let w = self.values[weights.0].get(0, j);
            value.axpy(w, &self.values[m.0]);
        }
        Ok(self.push(
            Op::RowWeightedSum {
                mats: mats.iter().map(|m| m.0).collect(),
                weights: weights.0,
            },
            value,
        ))
    }

    pub fn gather_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let xv = &self.values[x.0];
        if let Some(&bad) = rows.iter().find(|&&r| r >= xv.rows()) {
            return Err(SgptError::ShapeMismatch {
                context: "gather_rows",
                details: format!("row {bad} out of range for {} rows", xv.rows()),
            });
        }
        let mut value = DenseMatrix::zeros(rows.len(), xv.cols());
        for (t, &r) in rows.iter().enumerate() {
            value.row_mut(t).copy_from_slice(xv.row(r));
        }
        Ok(self.push(
            Op::GatherRows {
                x: x.0,
                rows: rows.to_vec(),
            },
            value,
        ))
    }

    /// Product of a constant sparse operator with a tape value.
    pub fn spmm(&mut self, adj: Rc<SparseRealMatrix>, x: NodeId) -> Result<NodeId> {
        let value = adj.spmm(&self.values[x.0])?;
        Ok(self.push(Op::Spmm { adj, x: x.0 }, value))
    }

    /// Reverse sweep from a scalar loss node. Gradients of leaves survive in
    /// the tape; interior gradients are dropped as soon as they are consumed.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let lv = &self.values[loss.0];
        if lv.rows() != 1 || lv.cols() != 1 {
            return Err(SgptError::ShapeMismatch {
                context: "backward",
                details: format!("loss is {}x{}, want 1x1", lv.rows(), lv.cols()),
            });
        }
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; self.ops.len()];
        grads[loss.0] = Some(DenseMatrix::filled(1, 1, 1.0));
        for i in (0..=loss.0).rev() {
            if matches!(self.ops[i], Op::Leaf) {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let contribs = self.input_grads(i, &g)?;
            for (node, c) in contribs {
                match &mut grads[node] {
                    Some(d) => d.axpy(1.0, &c),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        self.grads = grads;
        Ok(())
    }

    /// Gradient contributions of op `i` to each of its inputs, given the
    /// upstream gradient `g` of its output.
    fn input_grads(&self, i: usize, g: &DenseMatrix) -> Result<Vec<(usize, DenseMatrix)>> {
        let mut out = Vec::new();
        match &self.ops[i] {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (av, bv) = (&self.values[*a], &self.values[*b]);
                let mut da = DenseMatrix::zeros(av.rows(), av.cols());
                matmul_nt_acc(g, bv, &mut da);
                out.push((*a, da));
                let mut db = DenseMatrix::zeros(bv.rows(), bv.cols());
                matmul_tn_acc(av, g, &mut db);
                out.push((*b, db));
            }
            Op::Add { a, b } => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Scale { a, factor } => {
                out.push((*a, g.scale(*factor)));
            }
            Op::Relu { a } => {
                let av = &self.values[*a];
                let mut da = DenseMatrix::zeros(av.rows(), av.cols());
                for ((dv, &gv), &xv) in da.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                    if xv > 0.0 {
                        *dv = gv;
                    }
                }
                out.push((*a, da));
            }
            Op::ConcatCols { parts } => {
                let mut off = 0;
                for &p in parts {
                    let pv = &self.values[p];
                    let w = pv.cols();
                    let mut dp = DenseMatrix::zeros(pv.rows(), w);
                    for r in 0..pv.rows() {
                        dp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                    }
                    out.push((p, dp));
                    off += w;
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (n, d) = (xhat.rows(), xhat.cols());
                let gv = &self.values[*gamma];
                let mut dbeta = DenseMatrix::zeros(1, d);
                let mut dgamma = DenseMatrix::zeros(1, d);
                let mut dx = DenseMatrix::zeros(n, d);
                for j in 0..d {
                    let mut sum_g = 0.0;
                    let mut sum_gx = 0.0;
                    for r in 0..n {
                        sum_g += g.get(r, j);
                        sum_gx += g.get(r, j) * xhat.get(r, j);
                    }
                    dbeta.set(0, j, sum_g);
                    dgamma.set(0, j, sum_gx);
                    let gj = gv.get(0, j);
                    let sum1 = sum_g * gj;
                    let sum2 = sum_gx * gj;
                    let scale = inv_std[j] / n as f64;
                    for r in 0..n {
                        let dxh = g.get(r, j) * gj;
                        dx.set(
                            r,
                            j,
                            scale * (n as f64 * dxh - sum1 - xhat.get(r, j) * sum2),
                        );
                    }
                }
                out.push((*x, dx));
                out.push((*gamma, dgamma));
                out.push((*beta, dbeta));
            }
            Op::CosineRows {
                a,
                b,
                norm_a,
                norm_b,
            } => {
                let (av, bv) = (&self.values[*a], &self.values[*b]);
                let cv = &self.values[i];
                let mut da = DenseMatrix::zeros(av.rows(), av.cols());
                let mut db = DenseMatrix::zeros(bv.rows(), bv.cols());
                for r in 0..av.rows() {
                    let gr = g.get(r, 0);
                    if gr == 0.0 {
                        continue;
                    }
                    let c = cv.get(r, 0);
                    let (na, nb) = (norm_a[r], norm_b[r]);
                    for (t, (&a_v, &b_v)) in av.row(r).iter().zip(bv.row(r)).enumerate() {
                        da.row_mut(r)[t] = gr * (b_v / (na * nb) - c * a_v / (na * na));
                        db.row_mut(r)[t] = gr * (a_v / (na * nb) - c * b_v / (nb * nb));
                    }
                }
                out.push((*a, da));
                out.push((*b, db));
            }
            Op::CosineCross {
                x,
                p,
                norm_x,
                norm_p,
            } => {
                let (xv, pv) = (&self.values[*x], &self.values[*p]);
                let cv = &self.values[i];
                let mut dx = DenseMatrix::zeros(xv.rows(), xv.cols());
                let mut dp = DenseMatrix::zeros(pv.rows(), pv.cols());
                for r in 0..xv.rows() {
                    for c in 0..pv.rows() {
                        let gv = g.get(r, c);
                        if gv == 0.0 {
                            continue;
                        }
                        let cos = cv.get(r, c);
                        let (nx, np) = (norm_x[r], norm_p[c]);
                        for (t, (&x_v, &p_v)) in xv.row(r).iter().zip(pv.row(c)).enumerate() {
                            dx.row_mut(r)[t] += gv * (p_v / (nx * np) - cos * x_v / (nx * nx));
                            dp.row_mut(c)[t] += gv * (x_v / (nx * np) - cos * p_v / (np * np));
                        }
                    }
                }
                out.push((*x, dx));
                out.push((*p, dp));
            }
            Op::SoftmaxRows { x } => {
                let sv = &self.values[i];
                let mut dx = DenseMatrix::zeros(sv.rows(), sv.cols());
                for r in 0..sv.rows() {
                    let dot: f64 = g.row(r).iter().zip(sv.row(r)).map(|(a, b)| a * b).sum();
                    for (dv, (&gv, &s)) in dx
                        .row_mut(r)
                        .iter_mut()
                        .zip(g.row(r).iter().zip(sv.row(r)))
                    {
                        *dv = s * (gv - dot);
                    }
                }
                out.push((*x, dx));
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let gs = g.get(0, 0) / probs.rows() as f64;
                let mut dl = DenseMatrix::zeros(probs.rows(), probs.cols());
                for r in 0..probs.rows() {
                    for c in 0..probs.cols() {
                        let ind = if c == targets[r] { 1.0 } else { 0.0 };
                        dl.set(r, c, gs * (probs.get(r, c) - ind));
                    }
                }
                out.push((*logits, dl));
            }
            Op::RowWeightedSum { mats, weights } => {
                let wv = &self.values[*weights];
                let mut dw = DenseMatrix::zeros(1, mats.len());
                for (j, &m) in mats.iter().enumerate() {
                    let dot: f64 = g
                        .data()
                        .iter()
                        .zip(self.values[m].data())
                        .map(|(a, b)| a * b)
                        .sum();
                    dw.set(0, j, dot);
                    out.push((m, g.scale(wv.get(0, j))));
                }
                out.push((*weights, dw));
            }
            Op::GatherRows { x, rows } => {
                let xv = &self.values[*x];
                let mut dx = DenseMatrix::zeros(xv.rows(), xv.cols());
                for (t, &r) in rows.iter().enumerate() {
                    for (dv, &gv) in dx.row_mut(r).iter_mut().zip(g.row(t)) {
                        *dv += gv;
                    }
                }
                out.push((*x, dx));
            }
            Op::Spmm { adj, x } => {
                out.push((*x, adj.spmm_transposed(g)?));
            }
        }
        Ok(out)
    }

    /// Accumulate leaf gradients into their bound trainable parameters.
    pub fn copy_grads(&self, params: &mut ParamSet) {
        for &(node, pidx) in &self.bindings {
            if let Some(Some(g)) = self.grads.get(node) {
                let p = &mut params.params[pidx];
                if p.trainable {
                    p.grad.axpy(1.0, g);
                }
            }
        }
    }
}

/// Compare analytic gradients with central finite differences. The closure
/// evaluates the loss at the current parameter values; when its second
/// argument is true it must also accumulate gradients into the set. Returns
/// the maximum elementwise relative error over all trainable parameters.
pub fn grad_check<F>(mut f: F, params: &mut ParamSet, eps: f64) -> Result<f64>
where
    F: FnMut(&mut ParamSet, bool) -> Result<f64>,
{
    params.zero_grads();
    let base = f(params, true)?;
    if !base.is_finite() {
        return Err(SgptError::NonFiniteLoss {
            step: 0,
            value: base,
        });
    }
    let analytic: Vec<(ParamId, DenseMatrix)> = params
        .ids()
        .filter(|&id| params.get(id).trainable)
        .map(|id| (id, params.get(id).grad.clone()))
        .collect();
    let mut max_rel = 0.0f64;
    for (id, grad) in analytic {
        for idx in 0..grad.data().len() {
            let original = params.get(id).value.data()[idx];
            params.get_mut(id).value.data_mut()[idx] = original + eps;
            let plus = f(params, false)?;
            params.get_mut(id).value.data_mut()[idx] = original - eps;
            let minus = f(params, false)?;
            params.get_mut(id).value.data_mut()[idx] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(SgptError::NonFiniteLoss {
                    step: 0,
                    value: if plus.is_finite() { minus } else { plus },
                });
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[idx];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((a - numeric).abs() / denom);
        }
    }
    Ok(max_rel)
}
