//! Synthetic signed-graph generators for tests and demos.
//!
//! Two generators are provided. The two-community model places positive
//! edges inside communities and negative edges between them, then flips
//! each created edge's sign with a noise probability; community ids double
//! as node-classification labels. The trust model produces a large sparse
//! graph with exact positive and negative edge counts, concentrating
//! positive degree on high-trust nodes and negative edges on low-trust
//! pairs, which mimics the shape of rating-network benchmarks.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::graph::SignedGraph;
use crate::seed::rng_from;
use crate::{Result, SgptError};

/// Parameters of the two-community generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_nodes: usize,
    pub num_communities: usize,
    pub intra_pos_prob: f64,
    pub inter_neg_prob: f64,
    pub noise_flip_prob: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(num_nodes: usize, seed: u64) -> Self {
        Self {
            num_nodes,
            num_communities: 2,
            intra_pos_prob: 0.2,
            inter_neg_prob: 0.2,
            noise_flip_prob: 0.05,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_nodes < 2 {
            return Err(SgptError::InvalidInput(
                "synthetic graph needs at least 2 nodes".into(),
            ));
        }
        if self.num_communities != 2 {
            return Err(SgptError::InvalidInput(format!(
                "only 2 communities are supported, got {}",
                self.num_communities
            )));
        }
        for (name, p) in [
            ("intra_pos_prob", self.intra_pos_prob),
            ("inter_neg_prob", self.inter_neg_prob),
            ("noise_flip_prob", self.noise_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SgptError::InvalidInput(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Sample a two-community signed graph and its community labels.
///
/// Nodes 0..ceil(n/2) form community 0, the rest community 1. Each
/// intra-community pair becomes a positive edge with `intra_pos_prob`,
/// each inter-community pair a negative edge with `inter_neg_prob`, and
/// every created edge's sign is flipped with `noise_flip_prob`. The flip
/// draw is consumed only for created edges, so the same seed yields the
/// same edge set at every noise level.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SignedGraph, Vec<usize>)> {
    spec.validate()?;
    let n = spec.num_nodes;
    let half = n.div_ceil(2);
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= half)).collect();
    let mut rng = rng_from(spec.seed);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let intra = labels[i] == labels[j];
            let create_prob = if intra {
                spec.intra_pos_prob
            } else {
                spec.inter_neg_prob
            };
            if rng.gen::<f64>() >= create_prob {
                continue;
            }
            let mut positive = intra;
            if rng.gen::<f64>() < spec.noise_flip_prob {
                positive = !positive;
            }
            if positive {
                pos.push((i, j));
            } else {
                neg.push((i, j));
            }
        }
    }
    let g = SignedGraph::from_edges(n, pos, neg)?;
    Ok((g, labels))
}

/// Sample a trust-style signed graph with exact edge counts.
///
/// Each node gets a latent trust score t ~ N(0, 1). Positive edges pick
/// both endpoints with probability proportional to exp(0.8 t), so
/// high-trust nodes accumulate positive degree. Negative edges are the
/// `num_neg` lowest-scoring pairs from a uniform candidate pool, scored by
/// t_u + t_v plus mild noise, so they cluster on low-trust nodes.
pub fn trust_network(
    num_nodes: usize,
    num_pos: usize,
    num_neg: usize,
    seed: u64,
) -> Result<SignedGraph> {
    if num_nodes < 2 {
        return Err(SgptError::InvalidInput(
            "trust network needs at least 2 nodes".into(),
        ));
    }
    let max_pairs = num_nodes * (num_nodes - 1) / 2;
    if num_pos + num_neg > max_pairs {
        return Err(SgptError::InvalidInput(format!(
            "{num_pos} positive + {num_neg} negative edges exceed {max_pairs} possible pairs"
        )));
    }
    let mut rng = rng_from(seed);
    let trust: Vec<f64> = (0..num_nodes)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let weights: Vec<f64> = trust.iter().map(|t| (0.8 * t).exp()).collect();
    let endpoint =
        WeightedIndex::new(&weights).map_err(|e| SgptError::InvalidInput(e.to_string()))?;

    let mut pos: BTreeSet<(usize, usize)> = BTreeSet::new();
    while pos.len() < num_pos {
        let u = endpoint.sample(&mut rng);
        let v = endpoint.sample(&mut rng);
        if u == v {
            continue;
        }
        pos.insert((u.min(v), u.max(v)));
    }

    let pool_size = (num_neg * 5).min(max_pairs - num_pos);
    let mut candidates: BTreeSet<(usize, usize)> = BTreeSet::new();
    while candidates.len() < pool_size {
        let u = rng.gen_range(0..num_nodes);
        let v = rng.gen_range(0..num_nodes);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if !pos.contains(&key) {
            candidates.insert(key);
        }
    }
    let mut scored: Vec<((usize, usize), f64)> = candidates
        .into_iter()
        .map(|(u, v)| {
            let noise: f64 = rng.sample(StandardNormal);
            ((u, v), trust[u] + trust[v] + 0.5 * noise)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("trust scores are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    let neg: Vec<(usize, usize)> = scored.into_iter().take(num_neg).map(|(p, _)| p).collect();
    SignedGraph::from_edges(num_nodes, pos, neg)
}
