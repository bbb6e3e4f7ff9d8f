//! The multi-layer GCN encoder and its frozen checkpoint.
//!
//! Each layer computes `H = ReLU(A_hat H W)` on the normalized adjacency;
//! the last layer stays linear and no layer carries a bias, so a zero input
//! maps to a zero embedding. Checkpoints keep the layer weights together
//! with a hash over the architecture and pre-training hyperparameters, which
//! downstream phases verify before trusting the weights.

use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, ParamId, ParamSet, Tape};
use crate::container::{read_container, sha256_hex, write_container};
use crate::dense::DenseMatrix;
use crate::seed::rng_from;
use crate::sparse::SparseRealMatrix;
use crate::{Result, SgptError, VERSION};

const CHECKPOINT_MAGIC: &[u8; 8] = b"SGPTGCN1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcnConfig {
    layer_dims: Vec<usize>,
}

impl GcnConfig {
    pub fn new(layer_dims: Vec<usize>) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(SgptError::InvalidInput(
                "layer dims must list at least an input and an output width".into(),
            ));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(SgptError::InvalidInput("layer widths must be at least 1".into()));
        }
        Ok(Self { layer_dims })
    }

    /// The default three-layer stack: input width, then 32, 64, 64.
    pub fn default_dims(d_in: usize) -> Result<Self> {
        Self::new(vec![d_in, 32, 64, 64])
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn d_in(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn d_out(&self) -> usize {
        *self.layer_dims.last().expect("at least two dims")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn canonical_text(&self) -> String {
        let dims: Vec<String> = self.layer_dims.iter().map(|d| d.to_string()).collect();
        format!("layer_dims={}", dims.join(","))
    }
}

pub fn compute_config_hash(config: &GcnConfig, hyper: &str) -> String {
    sha256_hex(&format!("{}\n{hyper}", config.canonical_text()))
}

/// Glorot-uniform layer weights, deterministic under the seed.
pub fn init_weights(config: &GcnConfig, seed: u64) -> Vec<DenseMatrix> {
    let mut rng = rng_from(seed);
    config
        .layer_dims
        .windows(2)
        .map(|w| DenseMatrix::glorot_uniform(w[0], w[1], &mut rng))
        .collect()
}

fn check_encode_shapes(
    weights: &[DenseMatrix],
    adj: &SparseRealMatrix,
    x: &DenseMatrix,
) -> Result<()> {
    if weights.is_empty() {
        return Err(SgptError::InvalidInput("encoder has no layers".into()));
    }
    if adj.rows() != adj.cols() || adj.rows() != x.rows() {
        return Err(SgptError::ShapeMismatch {
            context: "encode",
            details: format!(
                "adjacency {}x{} over {} feature rows",
                adj.rows(),
                adj.cols(),
                x.rows()
            ),
        });
    }
    if weights[0].rows() != x.cols() {
        return Err(SgptError::ShapeMismatch {
            context: "encode",
            details: format!(
                "features have width {} but the first layer expects {}",
                x.cols(),
                weights[0].rows()
            ),
        });
    }
    Ok(())
}

/// Forward pass without a tape: aggregate, project, activate per layer.
pub fn encode(
    weights: &[DenseMatrix],
    adj: &SparseRealMatrix,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_encode_shapes(weights, adj, x)?;
    let mut h = x.clone();
    for (l, w) in weights.iter().enumerate() {
        let agg = adj.spmm(&h)?;
        h = agg.matmul(w)?;
        if l + 1 < weights.len() {
            for v in h.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    Ok(h)
}

/// Forward pass on a tape, with the layer weights bound as parameters so the
/// same routine serves pre-training (trainable) and prompt tuning (frozen).
pub fn encode_tape(
    tape: &mut Tape,
    params: &ParamSet,
    weight_ids: &[ParamId],
    adj: &Rc<SparseRealMatrix>,
    x: NodeId,
) -> Result<NodeId> {
    if weight_ids.is_empty() {
        return Err(SgptError::InvalidInput("encoder has no layers".into()));
    }
    let mut h = x;
    for (l, &wid) in weight_ids.iter().enumerate() {
        let w = tape.param(params, wid);
        let agg = tape.spmm(Rc::clone(adj), h)?;
        h = tape.matmul(agg, w)?;
        if l + 1 < weight_ids.len() {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    tool_version: String,
    config: GcnConfig,
    seed: u64,
    hyper: String,
    config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    config: GcnConfig,
    weights: Vec<DenseMatrix>,
    seed: u64,
    hyper: String,
    config_hash: String,
}

impl Checkpoint {
    /// Bundle weights with their architecture and the canonical text of the
    /// pre-training hyperparameters they were produced under.
    pub fn new(
        config: GcnConfig,
        weights: Vec<DenseMatrix>,
        seed: u64,
        hyper: String,
    ) -> Result<Self> {
        if weights.len() != config.num_layers() {
            return Err(SgptError::ShapeMismatch {
                context: "checkpoint",
                details: format!(
                    "{} weight matrices for {} layers",
                    weights.len(),
                    config.num_layers()
                ),
            });
        }
        for (l, w) in weights.iter().enumerate() {
            let want = (config.layer_dims[l], config.layer_dims[l + 1]);
            if (w.rows(), w.cols()) != want {
                return Err(SgptError::ShapeMismatch {
                    context: "checkpoint",
                    details: format!(
                        "layer {l} is {}x{}, want {}x{}",
                        w.rows(),
                        w.cols(),
                        want.0,
                        want.1
                    ),
                });
            }
        }
        let config_hash = compute_config_hash(&config, &hyper);
        Ok(Self {
            config,
            weights,
            seed,
            hyper,
            config_hash,
        })
    }

    pub fn config(&self) -> &GcnConfig {
        &self.config
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hyper(&self) -> &str {
        &self.hyper
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn encode(&self, adj: &SparseRealMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        encode(&self.weights, adj, x)
    }

    /// Error unless this checkpoint was produced under exactly the given
    /// architecture and hyperparameter text.
    pub fn verify(&self, config: &GcnConfig, hyper: &str) -> Result<()> {
        let expected = compute_config_hash(config, hyper);
        if expected != self.config_hash {
            return Err(SgptError::HashMismatch {
                stored: self.config_hash.clone(),
                expected,
            });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = CheckpointMeta {
            tool_version: VERSION.to_string(),
            config: self.config.clone(),
            seed: self.seed,
            hyper: self.hyper.clone(),
            config_hash: self.config_hash.clone(),
        };
        let meta_text =
            serde_json::to_string(&meta).map_err(|e| SgptError::InvalidInput(e.to_string()))?;
        let tensors: Vec<(String, DenseMatrix)> = self
            .weights
            .iter()
            .enumerate()
            .map(|(l, w)| (format!("w{l}"), w.clone()))
            .collect();
        write_container(path, CHECKPOINT_MAGIC, &meta_text, &tensors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let container = read_container(path, CHECKPOINT_MAGIC)?;
        let meta: CheckpointMeta = serde_json::from_str(&container.meta)
            .map_err(|e| SgptError::Corrupt(format!("bad metadata: {e}")))?;
        let mut weights = Vec::with_capacity(meta.config.num_layers());
        for l in 0..meta.config.num_layers() {
            let name = format!("w{l}");
            let w = container
                .tensor(&name)
                .ok_or_else(|| SgptError::Corrupt(format!("missing tensor {name}")))?;
            weights.push(w.clone());
        }
        let ckpt = Self::new(meta.config, weights, meta.seed, meta.hyper)?;
        if ckpt.config_hash != meta.config_hash {
            return Err(SgptError::Corrupt(
                "stored config hash disagrees with stored config".into(),
            ));
        }
        Ok(ckpt)
    }
}
