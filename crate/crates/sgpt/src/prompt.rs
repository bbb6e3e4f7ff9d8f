//! Tunable prompt parameters for downstream adaptation.
//!
//! The backbone stays frozen; everything trainable lives here. Each channel
//! owns a feature prompt (r basis vectors plus r projection heads) whose
//! per-node softmax attention shifts the input features before encoding.
//! Hop-wise weights fuse the positive and negative hop embeddings, and a
//! bottleneck adapter with a residual on the topological embedding produces
//! the final node embedding E = H_T + BN(W_up(ReLU(W_down([H_T, H_P, H_N])))).
//! The up projection starts at zero, so E equals H_T before any tuning step.

use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, ParamId, ParamSet, Tape};
use crate::container::{read_container, write_container};
use crate::dense::DenseMatrix;
use crate::gcn::{encode_tape, Checkpoint};
use crate::seed::rng_from;
use crate::sparse::SparseRealMatrix;
use crate::template::{ChannelSet, PrototypeSet, TaskKind};
use crate::{Result, SgptError, VERSION};

const PROMPT_MAGIC: &[u8; 8] = b"SGPTPRM1";
const INIT_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Pos,
    Neg,
    Topo,
}

/// Basis vectors (r x d_in) and projection heads (d_in x r) of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPrompt {
    pub bases: DenseMatrix,
    pub heads: DenseMatrix,
}

/// One feature prompt per channel, shared across that channel's hops.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePrompt {
    pub pos: ChannelPrompt,
    pub neg: ChannelPrompt,
    pub topo: ChannelPrompt,
}

impl FeaturePrompt {
    pub fn channel(&self, c: Channel) -> &ChannelPrompt {
        match c {
            Channel::Pos => &self.pos,
            Channel::Neg => &self.neg,
            Channel::Topo => &self.topo,
        }
    }
}

/// Free per-hop fusion coefficients for the signed channels, 1 x k each.
#[derive(Debug, Clone, PartialEq)]
pub struct HopWeights {
    pub w_pos: DenseMatrix,
    pub w_neg: DenseMatrix,
}

/// Bottleneck adapter: down projection, up projection, batchnorm affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Adapter {
    pub w_down: DenseMatrix,
    pub w_up: DenseMatrix,
    pub gamma: DenseMatrix,
    pub beta: DenseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDims {
    pub d_in: usize,
    pub d_out: usize,
    pub hops: usize,
    pub basis: usize,
    pub d_mid: usize,
}

impl PromptDims {
    pub fn new(d_in: usize, d_out: usize, hops: usize, basis: usize, d_mid: usize) -> Result<Self> {
        if d_in == 0 || d_out == 0 || hops == 0 || d_mid == 0 {
            return Err(SgptError::InvalidInput(
                "prompt dimensions must all be at least 1".into(),
            ));
        }
        if basis == 0 {
            return Err(SgptError::InvalidInput(
                "feature prompts need at least one basis vector".into(),
            ));
        }
        if d_mid >= d_out {
            return Err(SgptError::InvalidInput(format!(
                "adapter bottleneck {d_mid} must be narrower than the output width {d_out}"
            )));
        }
        Ok(Self {
            d_in,
            d_out,
            hops,
            basis,
            d_mid,
        })
    }
}

/// Every trainable downstream parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    dims: PromptDims,
    pub feature: FeaturePrompt,
    pub hops: HopWeights,
    pub adapter: Adapter,
    pub prototypes: PrototypeSet,
}

/// Parameter-set handles for one bound [`PromptState`], in binding order.
#[derive(Debug, Clone)]
pub struct PromptParams {
    pub bases: [ParamId; 3],
    pub heads: [ParamId; 3],
    pub w_pos: ParamId,
    pub w_neg: ParamId,
    pub w_down: ParamId,
    pub w_up: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub prototypes: ParamId,
}

/// Seeded initialization: small Gaussian bases and heads (channel order
/// positive, negative, topological; bases before heads), uniform 1/k hop
/// weights, Glorot down projection, zero up projection, identity batchnorm
/// affine, and an empty prototype set awaiting support embeddings.
pub fn init_prompt_state(dims: &PromptDims, kind: TaskKind, seed: u64) -> PromptState {
    let mut rng = rng_from(seed);
    let mut channel = || ChannelPrompt {
        bases: DenseMatrix::gaussian(dims.basis, dims.d_in, INIT_SIGMA, &mut rng),
        heads: DenseMatrix::gaussian(dims.d_in, dims.basis, INIT_SIGMA, &mut rng),
    };
    let pos = channel();
    let neg = channel();
    let topo = channel();
    let uniform = 1.0 / dims.hops as f64;
    let proto_width = match kind {
        TaskKind::Nc => dims.d_out,
        TaskKind::Lsp => 2 * dims.d_out,
    };
    PromptState {
        dims: *dims,
        feature: FeaturePrompt { pos, neg, topo },
        hops: HopWeights {
            w_pos: DenseMatrix::filled(1, dims.hops, uniform),
            w_neg: DenseMatrix::filled(1, dims.hops, uniform),
        },
        adapter: Adapter {
            w_down: DenseMatrix::glorot_uniform(3 * dims.d_out, dims.d_mid, &mut rng),
            w_up: DenseMatrix::zeros(dims.d_mid, dims.d_out),
            gamma: DenseMatrix::filled(1, dims.d_out, 1.0),
            beta: DenseMatrix::zeros(1, dims.d_out),
        },
        prototypes: PrototypeSet::empty(kind, proto_width),
    }
}

impl PromptState {
    pub fn dims(&self) -> &PromptDims {
        &self.dims
    }

    pub fn kind(&self) -> TaskKind {
        self.prototypes.kind()
    }

    /// Register every tensor as a trainable parameter.
    pub fn bind(&self, params: &mut ParamSet) -> PromptParams {
        let mut ch = |name: &str, p: &ChannelPrompt| {
            (
                params.add(format!("prompt.bases.{name}"), p.bases.clone(), true),
                params.add(format!("prompt.heads.{name}"), p.heads.clone(), true),
            )
        };
        let (bp, hp) = ch("pos", &self.feature.pos);
        let (bn, hn) = ch("neg", &self.feature.neg);
        let (bt, ht) = ch("topo", &self.feature.topo);
        PromptParams {
            bases: [bp, bn, bt],
            heads: [hp, hn, ht],
            w_pos: params.add("prompt.w_pos", self.hops.w_pos.clone(), true),
            w_neg: params.add("prompt.w_neg", self.hops.w_neg.clone(), true),
            w_down: params.add("prompt.w_down", self.adapter.w_down.clone(), true),
            w_up: params.add("prompt.w_up", self.adapter.w_up.clone(), true),
            gamma: params.add("prompt.gamma", self.adapter.gamma.clone(), true),
            beta: params.add("prompt.beta", self.adapter.beta.clone(), true),
            prototypes: params.add(
                "prompt.prototypes",
                self.prototypes.embeddings().clone(),
                true,
            ),
        }
    }

    /// Copy optimized values back from a bound parameter set.
    pub fn update_from(&mut self, params: &ParamSet, ids: &PromptParams) -> Result<()> {
        self.feature.pos.bases = params.get(ids.bases[0]).value.clone();
        self.feature.neg.bases = params.get(ids.bases[1]).value.clone();
        self.feature.topo.bases = params.get(ids.bases[2]).value.clone();
        self.feature.pos.heads = params.get(ids.heads[0]).value.clone();
        self.feature.neg.heads = params.get(ids.heads[1]).value.clone();
        self.feature.topo.heads = params.get(ids.heads[2]).value.clone();
        self.hops.w_pos = params.get(ids.w_pos).value.clone();
        self.hops.w_neg = params.get(ids.w_neg).value.clone();
        self.adapter.w_down = params.get(ids.w_down).value.clone();
        self.adapter.w_up = params.get(ids.w_up).value.clone();
        self.adapter.gamma = params.get(ids.gamma).value.clone();
        self.adapter.beta = params.get(ids.beta).value.clone();
        self.prototypes = PrototypeSet::new(
            self.prototypes.kind(),
            params.get(ids.prototypes).value.clone(),
            self.prototypes.class_names().to_vec(),
        )?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = PromptMeta {
            tool_version: VERSION.to_string(),
            kind: self.kind(),
            dims: self.dims,
            class_names: self.prototypes.class_names().to_vec(),
        };
        let meta_text =
            serde_json::to_string(&meta).map_err(|e| SgptError::InvalidInput(e.to_string()))?;
        let tensors = vec![
            ("bases_pos".to_string(), self.feature.pos.bases.clone()),
            ("heads_pos".to_string(), self.feature.pos.heads.clone()),
            ("bases_neg".to_string(), self.feature.neg.bases.clone()),
            ("heads_neg".to_string(), self.feature.neg.heads.clone()),
            ("bases_topo".to_string(), self.feature.topo.bases.clone()),
            ("heads_topo".to_string(), self.feature.topo.heads.clone()),
            ("w_pos".to_string(), self.hops.w_pos.clone()),
            ("w_neg".to_string(), self.hops.w_neg.clone()),
            ("w_down".to_string(), self.adapter.w_down.clone()),
            ("w_up".to_string(), self.adapter.w_up.clone()),
            ("gamma".to_string(), self.adapter.gamma.clone()),
            ("beta".to_string(), self.adapter.beta.clone()),
            ("prototypes".to_string(), self.prototypes.embeddings().clone()),
        ];
        write_container(path, PROMPT_MAGIC, &meta_text, &tensors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let container = read_container(path, PROMPT_MAGIC)?;
        let meta: PromptMeta = serde_json::from_str(&container.meta)
            .map_err(|e| SgptError::Corrupt(format!("bad metadata: {e}")))?;
        let get = |name: &str| {
            container
                .tensor(name)
                .cloned()
                .ok_or_else(|| SgptError::Corrupt(format!("missing tensor {name}")))
        };
        let state = PromptState {
            dims: meta.dims,
            feature: FeaturePrompt {
                pos: ChannelPrompt { bases: get("bases_pos")?, heads: get("heads_pos")? },
                neg: ChannelPrompt { bases: get("bases_neg")?, heads: get("heads_neg")? },
                topo: ChannelPrompt { bases: get("bases_topo")?, heads: get("heads_topo")? },
            },
            hops: HopWeights { w_pos: get("w_pos")?, w_neg: get("w_neg")? },
            adapter: Adapter {
                w_down: get("w_down")?,
                w_up: get("w_up")?,
                gamma: get("gamma")?,
                beta: get("beta")?,
            },
            prototypes: PrototypeSet::new(meta.kind, get("prototypes")?, meta.class_names)
                .map_err(|e| SgptError::Corrupt(e.to_string()))?,
        };
        state.check_shapes().map_err(|e| SgptError::Corrupt(e.to_string()))?;
        Ok(state)
    }

    fn check_shapes(&self) -> Result<()> {
        let d = &self.dims;
        let want = [
            ("bases", self.feature.pos.bases.rows() == d.basis
                && self.feature.pos.bases.cols() == d.d_in
                && self.feature.neg.bases.rows() == d.basis
                && self.feature.neg.bases.cols() == d.d_in
                && self.feature.topo.bases.rows() == d.basis
                && self.feature.topo.bases.cols() == d.d_in),
            ("heads", self.feature.pos.heads.rows() == d.d_in
                && self.feature.pos.heads.cols() == d.basis
                && self.feature.neg.heads.rows() == d.d_in
                && self.feature.neg.heads.cols() == d.basis
                && self.feature.topo.heads.rows() == d.d_in
                && self.feature.topo.heads.cols() == d.basis),
            ("hop weights", self.hops.w_pos.rows() == 1
                && self.hops.w_pos.cols() == d.hops
                && self.hops.w_neg.rows() == 1
                && self.hops.w_neg.cols() == d.hops),
            ("adapter", self.adapter.w_down.rows() == 3 * d.d_out
                && self.adapter.w_down.cols() == d.d_mid
                && self.adapter.w_up.rows() == d.d_mid
                && self.adapter.w_up.cols() == d.d_out
                && self.adapter.gamma.cols() == d.d_out
                && self.adapter.beta.cols() == d.d_out),
        ];
        for (name, ok) in want {
            if !ok {
                return Err(SgptError::ShapeMismatch {
                    context: "prompt state",
                    details: format!("{name} tensors disagree with the declared dimensions"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PromptMeta {
    tool_version: String,
    kind: TaskKind,
    dims: PromptDims,
    class_names: Vec<String>,
}

/// Normalized propagation matrices for every channel hop, computed once and
/// shared across tuning epochs and tasks.
#[derive(Debug, Clone)]
pub struct NormalizedChannels {
    pub pos: Vec<Rc<SparseRealMatrix>>,
    pub neg: Vec<Rc<SparseRealMatrix>>,
    pub topo: Rc<SparseRealMatrix>,
}

pub fn normalize_channels(ch: &ChannelSet) -> Result<NormalizedChannels> {
    let norm = |m| SparseRealMatrix::gcn_normalize(m).map(Rc::new);
    Ok(NormalizedChannels {
        pos: ch.pos().iter().map(norm).collect::<Result<_>>()?,
        neg: ch.neg().iter().map(norm).collect::<Result<_>>()?,
        topo: norm(ch.topo())?,
    })
}

/// Shift features by softmax-attended basis vectors: x + softmax(x q) p.
pub fn apply_feature_prompt_tape(
    tape: &mut Tape,
    x: NodeId,
    bases: NodeId,
    heads: NodeId,
) -> Result<NodeId> {
    let scores = tape.matmul(x, heads)?;
    let alpha = tape.softmax_rows(scores);
    let shift = tape.matmul(alpha, bases)?;
    tape.add(x, shift)
}

/// Value-level feature prompting.
pub fn apply_feature_prompt(x: &DenseMatrix, prompt: &ChannelPrompt) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let xn = tape.input(x.clone());
    let b = tape.input(prompt.bases.clone());
    let h = tape.input(prompt.heads.clone());
    let out = apply_feature_prompt_tape(&mut tape, xn, b, h)?;
    Ok(tape.value(out).clone())
}

/// Per-node attention over a channel's bases; rows are distributions.
pub fn attention_weights(x: &DenseMatrix, prompt: &ChannelPrompt) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let xn = tape.input(x.clone());
    let h = tape.input(prompt.heads.clone());
    let scores = tape.matmul(xn, h)?;
    let alpha = tape.softmax_rows(scores);
    Ok(tape.value(alpha).clone())
}

/// Weighted sum of same-shaped hop embeddings.
pub fn fuse_hops(hs: &[DenseMatrix], w: &DenseMatrix) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let nodes: Vec<NodeId> = hs.iter().map(|h| tape.input(h.clone())).collect();
    let wn = tape.input(w.clone());
    let out = tape.row_weighted_sum(&nodes, wn)?;
    Ok(tape.value(out).clone())
}

/// Adapter forward on plain matrices.
pub fn apply_adapter(
    h_t: &DenseMatrix,
    h_p: &DenseMatrix,
    h_n: &DenseMatrix,
    adapter: &Adapter,
) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let t = tape.input(h_t.clone());
    let p = tape.input(h_p.clone());
    let n = tape.input(h_n.clone());
    let w_down = tape.input(adapter.w_down.clone());
    let w_up = tape.input(adapter.w_up.clone());
    let gamma = tape.input(adapter.gamma.clone());
    let beta = tape.input(adapter.beta.clone());
    let e = adapter_tape(&mut tape, t, p, n, w_down, w_up, gamma, beta)?;
    Ok(tape.value(e).clone())
}

#[allow(clippy::too_many_arguments)]
fn adapter_tape(
    tape: &mut Tape,
    h_t: NodeId,
    h_p: NodeId,
    h_n: NodeId,
    w_down: NodeId,
    w_up: NodeId,
    gamma: NodeId,
    beta: NodeId,
) -> Result<NodeId> {
    let cat = tape.concat_cols(&[h_t, h_p, h_n])?;
    let down = tape.matmul(cat, w_down)?;
    let act = tape.relu(down);
    let up = tape.matmul(act, w_up)?;
    let bn = tape.batchnorm_rows(up, gamma, beta)?;
    tape.add(h_t, bn)
}

/// Encode every channel hop with its channel's prompted features. Returns
/// the per-hop positive and negative embeddings and the topological one.
pub fn channel_embeddings(
    ckpt: &Checkpoint,
    channels: &ChannelSet,
    x: &DenseMatrix,
    prompt: &FeaturePrompt,
) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>, DenseMatrix)> {
    let norm = normalize_channels(channels)?;
    let xp = apply_feature_prompt(x, &prompt.pos)?;
    let xn = apply_feature_prompt(x, &prompt.neg)?;
    let xt = apply_feature_prompt(x, &prompt.topo)?;
    let h_pos = norm
        .pos
        .iter()
        .map(|adj| ckpt.encode(adj, &xp))
        .collect::<Result<Vec<_>>>()?;
    let h_neg = norm
        .neg
        .iter()
        .map(|adj| ckpt.encode(adj, &xn))
        .collect::<Result<Vec<_>>>()?;
    let h_topo = ckpt.encode(&norm.topo, &xt)?;
    Ok((h_pos, h_neg, h_topo))
}

/// Full differentiable forward from input features to the adapted embedding.
pub fn embed_tape(
    tape: &mut Tape,
    params: &ParamSet,
    ids: &PromptParams,
    backbone: &[ParamId],
    norm: &NormalizedChannels,
    x: NodeId,
) -> Result<NodeId> {
    let prompt_for = |tape: &mut Tape, slot: usize| -> (NodeId, NodeId) {
        (
            tape.param(params, ids.bases[slot]),
            tape.param(params, ids.heads[slot]),
        )
    };
    let (bp, hp) = prompt_for(tape, 0);
    let xp = apply_feature_prompt_tape(tape, x, bp, hp)?;
    let (bn, hn) = prompt_for(tape, 1);
    let xn = apply_feature_prompt_tape(tape, x, bn, hn)?;
    let (bt, ht) = prompt_for(tape, 2);
    let xt = apply_feature_prompt_tape(tape, x, bt, ht)?;

    let mut h_pos = Vec::with_capacity(norm.pos.len());
    for adj in &norm.pos {
        h_pos.push(encode_tape(tape, params, backbone, adj, xp)?);
    }
    let mut h_neg = Vec::with_capacity(norm.neg.len());
    for adj in &norm.neg {
        h_neg.push(encode_tape(tape, params, backbone, adj, xn)?);
    }
    let h_topo = encode_tape(tape, params, backbone, &norm.topo, xt)?;

    let w_pos = tape.param(params, ids.w_pos);
    let w_neg = tape.param(params, ids.w_neg);
    let fused_p = tape.row_weighted_sum(&h_pos, w_pos)?;
    let fused_n = tape.row_weighted_sum(&h_neg, w_neg)?;

    let w_down = tape.param(params, ids.w_down);
    let w_up = tape.param(params, ids.w_up);
    let gamma = tape.param(params, ids.gamma);
    let beta = tape.param(params, ids.beta);
    adapter_tape(tape, h_topo, fused_p, fused_n, w_down, w_up, gamma, beta)
}

/// Register the checkpoint's layer weights as frozen parameters.
pub fn bind_backbone(params: &mut ParamSet, ckpt: &Checkpoint) -> Vec<ParamId> {
    ckpt.weights()
        .iter()
        .enumerate()
        .map(|(l, w)| params.add(format!("backbone.w{l}"), w.clone(), false))
        .collect()
}

/// Value-level forward: bind state and backbone, run [`embed_tape`].
pub fn embed(
    state: &PromptState,
    ckpt: &Checkpoint,
    norm: &NormalizedChannels,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    let mut params = ParamSet::new();
    let ids = state.bind(&mut params);
    let backbone = bind_backbone(&mut params, ckpt);
    let mut tape = Tape::new();
    let xn = tape.input(x.clone());
    let e = embed_tape(&mut tape, &params, &ids, &backbone, norm, xn)?;
    Ok(tape.value(e).clone())
}
