//! Balance-theory channel construction and prototype-based prediction.
//!
//! A signed graph is compiled into k positive and k negative hop channels
//! plus one sign-blind topological channel. Hop 1 is the raw positive and
//! negative adjacency; hop h extends hop h-1 by one edge, sending walks with
//! an even number of negative edges to the positive channel and odd counts
//! to the negative one. Each emitted hop matrix has its diagonal zeroed,
//! since a node's relation to itself carries no sign semantics and the
//! normalization step adds its own clean self-loop. Prediction compares a
//! query embedding with per-class prototype rows under temperature-scaled
//! cosine similarity.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::graph::SignedGraph;
use crate::sparse::SparseBinaryMatrix;
use crate::{Result, SgptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Nc,
    Lsp,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Nc => "nc",
            TaskKind::Lsp => "lsp",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = SgptError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nc" => Ok(TaskKind::Nc),
            "lsp" => Ok(TaskKind::Lsp),
            other => Err(SgptError::InvalidInput(format!(
                "unknown task kind {other:?}, expected nc or lsp"
            ))),
        }
    }
}

/// The compiled channel views of one signed graph: `pos[i]` and `neg[i]`
/// hold hop i+1, `topo` is the unsigned union.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSet {
    pos: Vec<SparseBinaryMatrix>,
    neg: Vec<SparseBinaryMatrix>,
    topo: SparseBinaryMatrix,
    k: usize,
}

impl ChannelSet {
    pub fn hops(&self) -> usize {
        self.k
    }

    pub fn num_nodes(&self) -> usize {
        self.topo.rows()
    }

    pub fn pos(&self) -> &[SparseBinaryMatrix] {
        &self.pos
    }

    pub fn neg(&self) -> &[SparseBinaryMatrix] {
        &self.neg
    }

    pub fn topo(&self) -> &SparseBinaryMatrix {
        &self.topo
    }
}

/// Wall-clock seconds and combined nonzero count for one constructed hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopStats {
    pub hop: usize,
    pub seconds: f64,
    pub nnz: usize,
}

/// Compile the graph into k hop channels plus the topological union.
pub fn build_channels(g: &SignedGraph, k: usize) -> Result<ChannelSet> {
    Ok(build_channels_timed(g, k)?.0)
}

/// Same as [`build_channels`] but reports per-hop construction stats.
pub fn build_channels_timed(g: &SignedGraph, k: usize) -> Result<(ChannelSet, Vec<HopStats>)> {
    if k == 0 {
        return Err(SgptError::InvalidInput("hop count must be at least 1".into()));
    }
    let mut stats = Vec::with_capacity(k);
    let start = Instant::now();
    let a1_p = g.pos_adjacency();
    let a1_n = g.neg_adjacency();
    let topo = g.unsigned_view();
    let mut pos = vec![a1_p.clone()];
    let mut neg = vec![a1_n.clone()];
    stats.push(HopStats {
        hop: 1,
        seconds: start.elapsed().as_secs_f64(),
        nnz: pos[0].nnz() + neg[0].nnz(),
    });
    let mut walk_p = a1_p.clone();
    let mut walk_n = a1_n.clone();
    for hop in 2..=k {
        let start = Instant::now();
        let next_p = walk_p
            .bool_matmul(&a1_p)?
            .bool_add(&walk_n.bool_matmul(&a1_n)?)?;
        let next_n = walk_p
            .bool_matmul(&a1_n)?
            .bool_add(&walk_n.bool_matmul(&a1_p)?)?;
        let out_p = next_p.zero_diagonal()?;
        let out_n = next_n.zero_diagonal()?;
        let nnz = out_p.nnz() + out_n.nnz();
        pos.push(out_p);
        neg.push(out_n);
        walk_p = next_p;
        walk_n = next_n;
        stats.push(HopStats {
            hop,
            seconds: start.elapsed().as_secs_f64(),
            nnz,
        });
    }
    Ok((ChannelSet { pos, neg, topo, k }, stats))
}

/// Sign-blind ablation channels: both signed slots carry the unsigned
/// adjacency's hop powers, so hop structure survives but edge signs do not.
pub fn build_sign_blind_channels(g: &SignedGraph, k: usize) -> Result<ChannelSet> {
    if k == 0 {
        return Err(SgptError::InvalidInput("hop count must be at least 1".into()));
    }
    let u1 = g.unsigned_view();
    let mut hops = vec![u1.clone()];
    let mut walk = u1.clone();
    for _ in 2..=k {
        let next = walk.bool_matmul(&u1)?;
        hops.push(next.zero_diagonal()?);
        walk = next;
    }
    Ok(ChannelSet {
        pos: hops.clone(),
        neg: hops,
        topo: u1,
        k,
    })
}

/// Concatenate the embeddings of a node pair in the given order.
pub fn link_embedding(h: &DenseMatrix, u: usize, v: usize) -> Result<Vec<f64>> {
    if u == v {
        return Err(SgptError::InvalidInput(format!(
            "link embedding needs two distinct nodes, got {u} twice"
        )));
    }
    let n = h.rows();
    if u >= n || v >= n {
        return Err(SgptError::InvalidInput(format!(
            "node pair ({u},{v}) out of range for {n} embeddings"
        )));
    }
    let mut out = Vec::with_capacity(2 * h.cols());
    out.extend_from_slice(h.row(u));
    out.extend_from_slice(h.row(v));
    Ok(out)
}

/// One learnable embedding row per class; prediction picks the most similar.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    kind: TaskKind,
    embeddings: DenseMatrix,
    class_names: Vec<String>,
}

impl PrototypeSet {
    pub fn new(kind: TaskKind, embeddings: DenseMatrix, class_names: Vec<String>) -> Result<Self> {
        if embeddings.rows() != class_names.len() {
            return Err(SgptError::ShapeMismatch {
                context: "prototypes",
                details: format!(
                    "{} embedding rows for {} class names",
                    embeddings.rows(),
                    class_names.len()
                ),
            });
        }
        Ok(Self {
            kind,
            embeddings,
            class_names,
        })
    }

    /// Placeholder with zero classes, to be filled in once support
    /// embeddings exist.
    pub fn empty(kind: TaskKind, width: usize) -> Self {
        Self {
            kind,
            embeddings: DenseMatrix::zeros(0, width),
            class_names: Vec::new(),
        }
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn embeddings(&self) -> &DenseMatrix {
        &self.embeddings
    }

    pub fn num_classes(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn width(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }
}

/// Per-class mean of the support embeddings.
pub fn init_prototypes(
    kind: TaskKind,
    support: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
) -> Result<PrototypeSet> {
    if num_classes == 0 {
        return Err(SgptError::InvalidInput("prototypes need at least one class".into()));
    }
    if kind == TaskKind::Lsp && num_classes != 2 {
        return Err(SgptError::InvalidInput(format!(
            "link-sign prediction has exactly two classes, got {num_classes}"
        )));
    }
    if labels.len() != support.rows() {
        return Err(SgptError::ShapeMismatch {
            context: "init_prototypes",
            details: format!("{} embeddings for {} labels", support.rows(), labels.len()),
        });
    }
    let mut sums = DenseMatrix::zeros(num_classes, support.cols());
    let mut counts = vec![0usize; num_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= num_classes {
            return Err(SgptError::InvalidInput(format!(
                "label {c} out of range for {num_classes} classes"
            )));
        }
        counts[c] += 1;
        let row = support.row(i);
        let dst = sums.row_mut(c);
        for (d, s) in dst.iter_mut().zip(row) {
            *d += s;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(SgptError::EmptyClass { class: c });
        }
        let inv = 1.0 / count as f64;
        for v in sums.row_mut(c) {
            *v *= inv;
        }
    }
    let class_names = match kind {
        TaskKind::Lsp => vec!["positive".to_string(), "negative".to_string()],
        TaskKind::Nc => (0..num_classes).map(|c| format!("{c}")).collect(),
    };
    PrototypeSet::new(kind, sums, class_names)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let norm = na.sqrt() * nb.sqrt();
    if norm == 0.0 {
        0.0
    } else {
        dot / norm
    }
}

/// Temperature-scaled cosine scores against every prototype row; the class
/// is the argmax, ties going to the lowest index. A zero query or zero
/// prototype row scores 0.
pub fn predict(protos: &PrototypeSet, query: &[f64], tau: f64) -> Result<(usize, Vec<f64>)> {
    if protos.num_classes() == 0 {
        return Err(SgptError::InvalidInput("prototype set has no classes".into()));
    }
    if query.len() != protos.width() {
        return Err(SgptError::ShapeMismatch {
            context: "predict",
            details: format!(
                "query width {} does not match prototype width {}",
                query.len(),
                protos.width()
            ),
        });
    }
    if !(tau > 0.0) {
        return Err(SgptError::InvalidInput(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let scores: Vec<f64> = (0..protos.num_classes())
        .map(|c| cosine(query, protos.embeddings.row(c)) / tau)
        .collect();
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    Ok((best, scores))
}
