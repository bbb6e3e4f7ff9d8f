//! Self-supervised link-prediction pre-training for the GCN backbone.
//!
//! A fraction of the edges is masked out of the message-passing graph and
//! kept as prediction targets. Each target edge yields triplets (anchor,
//! linked node, sampled non-neighbor); the loss asks the anchor embedding to
//! be more similar to the linked node than to the non-neighbor under a
//! temperature-scaled cosine softmax. Masking, negative sampling, and weight
//! initialization draw from separate streams derived from one seed, so a run
//! is reproducible bit for bit.

use std::collections::BTreeSet;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, NodeId, ParamId, ParamSet, Tape};
use crate::dense::DenseMatrix;
use crate::gcn::{encode_tape, init_weights, Checkpoint, GcnConfig};
use crate::seed::{derive_seed, rng_from};
use crate::sparse::{SparseBinaryMatrix, SparseRealMatrix};
use crate::{Result, SgptError};

const MAX_NEGATIVE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub mask_fraction: f64,
    pub epochs: usize,
    pub lr: f64,
    pub tau: f64,
    pub per_edge: usize,
    pub seed: u64,
}

impl PretrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            mask_fraction: 0.15,
            epochs: 200,
            lr: 1e-3,
            tau: 0.1,
            per_edge: 1,
            seed,
        }
    }

    pub fn canonical_text(&self) -> String {
        format!(
            "mask_fraction={},epochs={},lr={},tau={},per_edge={}",
            self.mask_fraction, self.epochs, self.lr, self.tau, self.per_edge
        )
    }
}

/// One training instance: the anchor should score its linked partner above
/// the sampled non-neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub pos: usize,
    pub neg: usize,
}

/// Pick `max(1, floor(fraction * edges))` undirected edges as prediction
/// targets and return them (sorted) together with the adjacency that remains
/// for message passing.
pub fn mask_links(
    adj: &SparseBinaryMatrix,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, SparseBinaryMatrix)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SgptError::InvalidInput(format!(
            "mask fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    if adj.rows() != adj.cols() || !adj.is_symmetric() {
        return Err(SgptError::ShapeMismatch {
            context: "mask_links",
            details: format!("adjacency {}x{} must be square and symmetric", adj.rows(), adj.cols()),
        });
    }
    let mut edges: Vec<(usize, usize)> = adj.iter_entries().filter(|&(r, c)| r < c).collect();
    if edges.is_empty() {
        return Err(SgptError::InvalidInput("graph has no edges to mask".into()));
    }
    let count = ((fraction * edges.len() as f64).floor() as usize).max(1);
    let mut rng = rng_from(seed);
    edges.shuffle(&mut rng);
    let mut masked = edges[..count].to_vec();
    masked.sort_unstable();
    let dropped: BTreeSet<(usize, usize)> = masked.iter().copied().collect();
    let remaining = adj.iter_entries().filter(|&(r, c)| {
        let key = if r < c { (r, c) } else { (c, r) };
        !dropped.contains(&key)
    });
    let message = SparseBinaryMatrix::from_entries(adj.rows(), adj.cols(), remaining)?;
    Ok((masked, message))
}

/// Form `per_edge` triplets for every target edge. The non-neighbor is drawn
/// uniformly over all nodes, rejecting the anchor and anything adjacent to it
/// in the full graph; a node whose rejections exhaust the attempt budget
/// reports a sampling failure.
pub fn sample_triplets(
    edges: &[(usize, usize)],
    adj: &SparseBinaryMatrix,
    per_edge: usize,
    seed: u64,
) -> Result<Vec<Triplet>> {
    if per_edge == 0 {
        return Err(SgptError::InvalidInput("per_edge must be at least 1".into()));
    }
    if edges.is_empty() {
        return Err(SgptError::InvalidInput("no target edges to sample from".into()));
    }
    let n = adj.rows();
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(edges.len() * per_edge);
    for &(u, v) in edges {
        for _ in 0..per_edge {
            let mut found = None;
            for _ in 0..MAX_NEGATIVE_ATTEMPTS {
                let cand = rng.gen_range(0..n);
                if cand != u && !adj.contains(u, cand) {
                    found = Some(cand);
                    break;
                }
            }
            let neg = found.ok_or(SgptError::SamplingFailed {
                node: u,
                attempts: MAX_NEGATIVE_ATTEMPTS,
            })?;
            out.push(Triplet { anchor: u, pos: v, neg });
        }
    }
    Ok(out)
}

/// Tape version of the pre-training loss: mean over triplets of the
/// cross-entropy of picking the linked node among {linked, non-neighbor}
/// from temperature-scaled cosine similarities.
pub fn pretrain_loss_tape(
    tape: &mut Tape,
    h: NodeId,
    triplets: &[Triplet],
    tau: f64,
) -> Result<NodeId> {
    if triplets.is_empty() {
        return Err(SgptError::InvalidInput("loss needs at least one triplet".into()));
    }
    if !(tau > 0.0) {
        return Err(SgptError::InvalidInput(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let anchors: Vec<usize> = triplets.iter().map(|t| t.anchor).collect();
    let pos: Vec<usize> = triplets.iter().map(|t| t.pos).collect();
    let neg: Vec<usize> = triplets.iter().map(|t| t.neg).collect();
    let hv = tape.gather_rows(h, &anchors)?;
    let ha = tape.gather_rows(h, &pos)?;
    let hb = tape.gather_rows(h, &neg)?;
    let sim_pos = tape.cosine_rows(hv, ha)?;
    let sim_neg = tape.cosine_rows(hv, hb)?;
    let logits = tape.concat_cols(&[sim_pos, sim_neg])?;
    let scaled = tape.scale(logits, 1.0 / tau);
    let targets = vec![0usize; triplets.len()];
    tape.softmax_cross_entropy(scaled, &targets)
}

/// The same loss evaluated directly on an embedding matrix.
pub fn pretrain_loss(h: &DenseMatrix, triplets: &[Triplet], tau: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let hn = tape.input(h.clone());
    let loss = pretrain_loss_tape(&mut tape, hn, triplets, tau)?;
    Ok(tape.value(loss).get(0, 0))
}

/// Run the pre-training loop and return the frozen checkpoint together with
/// the per-epoch loss curve. The log callback observes every epoch.
pub fn run_pretrain(
    adj: &SparseBinaryMatrix,
    features: &DenseMatrix,
    gcn_config: &GcnConfig,
    config: &PretrainConfig,
    mut log: impl FnMut(usize, f64),
) -> Result<(Checkpoint, Vec<f64>)> {
    if adj.rows() != features.rows() {
        return Err(SgptError::ShapeMismatch {
            context: "run_pretrain",
            details: format!(
                "adjacency has {} rows but features have {}",
                adj.rows(),
                features.rows()
            ),
        });
    }
    if features.cols() != gcn_config.d_in() {
        return Err(SgptError::ShapeMismatch {
            context: "run_pretrain",
            details: format!(
                "features have width {} but the encoder expects {}",
                features.cols(),
                gcn_config.d_in()
            ),
        });
    }
    let mask_seed = derive_seed(config.seed, 0);
    let triplet_seed = derive_seed(config.seed, 1);
    let weight_seed = derive_seed(config.seed, 2);

    let (masked, message_adj) = mask_links(adj, config.mask_fraction, mask_seed)?;
    let norm_adj = Rc::new(SparseRealMatrix::gcn_normalize(&message_adj)?);
    let triplets = sample_triplets(&masked, adj, config.per_edge, triplet_seed)?;

    let mut params = ParamSet::new();
    let ids: Vec<ParamId> = init_weights(gcn_config, weight_seed)
        .into_iter()
        .enumerate()
        .map(|(l, w)| params.add(format!("w{l}"), w, true))
        .collect();
    let mut adam = Adam::new(config.lr);
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        params.zero_grads();
        let mut tape = Tape::new();
        let x = tape.input(features.clone());
        let h = encode_tape(&mut tape, &params, &ids, &norm_adj, x)?;
        let loss_node = pretrain_loss_tape(&mut tape, h, &triplets, config.tau)?;
        let loss = tape.value(loss_node).get(0, 0);
        if !loss.is_finite() {
            return Err(SgptError::NonFiniteLoss { step: epoch, value: loss });
        }
        tape.backward(loss_node)?;
        tape.copy_grads(&mut params);
        adam.step(&mut params);
        losses.push(loss);
        log(epoch, loss);
    }

    let weights: Vec<DenseMatrix> = ids.iter().map(|&id| params.get(id).value.clone()).collect();
    let ckpt = Checkpoint::new(
        gcn_config.clone(),
        weights,
        config.seed,
        config.canonical_text(),
    )?;
    Ok((ckpt, losses))
}
