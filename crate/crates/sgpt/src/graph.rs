//! Signed-graph ingestion, validation, and few-shot task sampling.
//!
//! The canonical edge-list file is UTF-8 text with one `src,dst,sign` record
//! per line, sign in {+1,-1} or a nonzero integer rating mapped through its
//! sign. An optional `#nodes=<n>` header fixes the node count; other `#`
//! lines are comments. Edges are undirected and stored min-id first.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::seed::{derive_seed, rng_from};
use crate::sparse::SparseBinaryMatrix;
use crate::{Result, SgptError};

#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    num_nodes: usize,
    pos_edges: Vec<(usize, usize)>,
    neg_edges: Vec<(usize, usize)>,
    features: DenseMatrix,
}

impl SignedGraph {
    /// Build from explicit edge lists; pairs are canonicalized min-id first,
    /// deduplicated, and checked against the no-conflict and no-self-loop
    /// invariants.
    pub fn from_edges(
        num_nodes: usize,
        pos: impl IntoIterator<Item = (usize, usize)>,
        neg: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut signs: BTreeMap<(usize, usize), i8> = BTreeMap::new();
        for (sign, edges) in [(1i8, pos.into_iter().collect::<Vec<_>>()), (-1, neg.into_iter().collect())] {
            for (a, b) in edges {
                if a == b {
                    return Err(SgptError::InvalidInput(format!("self-loop at node {a}")));
                }
                if a >= num_nodes || b >= num_nodes {
                    return Err(SgptError::InvalidInput(format!(
                        "edge ({a},{b}) exceeds node count {num_nodes}"
                    )));
                }
                let key = (a.min(b), a.max(b));
                match signs.insert(key, sign) {
                    Some(prev) if prev != sign => {
                        return Err(SgptError::ConflictingSign { u: key.0, v: key.1 })
                    }
                    _ => {}
                }
            }
        }
        let mut pos_edges = Vec::new();
        let mut neg_edges = Vec::new();
        for ((u, v), s) in signs {
            if s > 0 {
                pos_edges.push((u, v));
            } else {
                neg_edges.push((u, v));
            }
        }
        Ok(Self {
            num_nodes,
            pos_edges,
            neg_edges,
            features: DenseMatrix::zeros(num_nodes, 0),
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn pos_edges(&self) -> &[(usize, usize)] {
        &self.pos_edges
    }

    #[inline]
    pub fn neg_edges(&self) -> &[(usize, usize)] {
        &self.neg_edges
    }

    #[inline]
    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    /// All edges as (u, v, sign) with u < v, sorted by pair.
    pub fn all_edges(&self) -> Vec<(usize, usize, i8)> {
        let mut out: Vec<(usize, usize, i8)> = self
            .pos_edges
            .iter()
            .map(|&(u, v)| (u, v, 1))
            .chain(self.neg_edges.iter().map(|&(u, v)| (u, v, -1)))
            .collect();
        out.sort_unstable();
        out
    }

    fn adjacency_of(&self, edges: &[(usize, usize)]) -> SparseBinaryMatrix {
        SparseBinaryMatrix::from_entries(
            self.num_nodes,
            self.num_nodes,
            edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]),
        )
        .expect("edge indices validated at construction")
    }

    /// Symmetric binary adjacency over positive edges only.
    pub fn pos_adjacency(&self) -> SparseBinaryMatrix {
        self.adjacency_of(&self.pos_edges)
    }

    /// Symmetric binary adjacency over negative edges only.
    pub fn neg_adjacency(&self) -> SparseBinaryMatrix {
        self.adjacency_of(&self.neg_edges)
    }

    /// Sign-blind union adjacency.
    pub fn unsigned_view(&self) -> SparseBinaryMatrix {
        let all: Vec<(usize, usize)> = self
            .pos_edges
            .iter()
            .chain(self.neg_edges.iter())
            .copied()
            .collect();
        self.adjacency_of(&all)
    }

    /// Replace features with seeded standard-Gaussian values.
    pub fn init_features(mut self, d_in: usize, seed: u64) -> Result<Self> {
        if d_in == 0 {
            return Err(SgptError::InvalidInput("feature width must be at least 1".into()));
        }
        let mut rng = rng_from(seed);
        self.features = DenseMatrix::gaussian(self.num_nodes, d_in, 1.0, &mut rng);
        Ok(self)
    }

    /// Keep only the given edges, preserving node count and features.
    pub fn restrict_to(&self, edges: &[(usize, usize, i8)]) -> Result<Self> {
        let mut g = Self::from_edges(
            self.num_nodes,
            edges.iter().filter(|e| e.2 > 0).map(|&(u, v, _)| (u, v)),
            edges.iter().filter(|e| e.2 < 0).map(|&(u, v, _)| (u, v)),
        )?;
        g.features = self.features.clone();
        Ok(g)
    }
}

/// Parse the canonical edge-list file. With `expected_stats` the resulting
/// (nodes, positive, negative) counts must match exactly.
pub fn load_signed_graph(
    path: impl AsRef<Path>,
    expected_stats: Option<(usize, usize, usize)>,
) -> Result<SignedGraph> {
    let text = fs::read_to_string(path)?;
    let mut declared_nodes: Option<usize> = None;
    let mut signs: BTreeMap<(usize, usize), i8> = BTreeMap::new();
    let mut max_id: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#nodes=") {
            let n: usize = rest.trim().parse().map_err(|_| SgptError::Parse {
                line: line_no,
                message: format!("invalid node count {rest:?}"),
            })?;
            if declared_nodes.replace(n).is_some() {
                return Err(SgptError::Parse {
                    line: line_no,
                    message: "duplicate #nodes= header".into(),
                });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(SgptError::Parse {
                line: line_no,
                message: format!("expected 3 comma-separated fields, found {}", fields.len()),
            });
        }
        let parse_id = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| SgptError::Parse {
                line: line_no,
                message: format!("invalid node id {s:?}"),
            })
        };
        let src = parse_id(fields[0])?;
        let dst = parse_id(fields[1])?;
        let rating: i64 = fields[2].parse().map_err(|_| SgptError::Parse {
            line: line_no,
            message: format!("invalid sign or rating {:?}", fields[2]),
        })?;
        if rating == 0 {
            return Err(SgptError::Parse {
                line: line_no,
                message: "rating must be nonzero".into(),
            });
        }
        if src == dst {
            return Err(SgptError::Parse {
                line: line_no,
                message: format!("self-loop at node {src}"),
            });
        }
        let sign = if rating > 0 { 1i8 } else { -1 };
        let key = (src.min(dst), src.max(dst));
        max_id = Some(max_id.map_or(key.1, |m| m.max(key.1)));
        match signs.get(&key) {
            None => {
                signs.insert(key, sign);
            }
            Some(&prev) if prev != sign => {
                return Err(SgptError::ConflictingSign { u: key.0, v: key.1 })
            }
            Some(_) => {}
        }
    }
    let min_nodes = max_id.map_or(0, |m| m + 1);
    let num_nodes = match declared_nodes {
        Some(n) if n < min_nodes => {
            return Err(SgptError::InvalidInput(format!(
                "header declares {n} nodes but edges reference node {}",
                min_nodes - 1
            )))
        }
        Some(n) => n,
        None => min_nodes,
    };
    let g = SignedGraph::from_edges(
        num_nodes,
        signs.iter().filter(|(_, &s)| s > 0).map(|(&k, _)| k),
        signs.iter().filter(|(_, &s)| s < 0).map(|(&k, _)| k),
    )?;
    if let Some((n, p, m)) = expected_stats {
        if g.num_nodes != n || g.pos_edges.len() != p || g.neg_edges.len() != m {
            return Err(SgptError::StatsMismatch {
                found_nodes: g.num_nodes,
                found_pos: g.pos_edges.len(),
                found_neg: g.neg_edges.len(),
                expected_nodes: n,
                expected_pos: p,
                expected_neg: m,
            });
        }
    }
    Ok(g)
}

/// Write a graph back out in the canonical edge-list format.
pub fn save_signed_graph(g: &SignedGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut text = format!("#nodes={}\n", g.num_nodes());
    for (u, v, s) in g.all_edges() {
        text.push_str(&format!("{u},{v},{s:+}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Parse a `node,class` label sidecar file.
pub fn load_node_labels(path: impl AsRef<Path>) -> Result<BTreeMap<usize, usize>> {
    let text = fs::read_to_string(path)?;
    let mut labels = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(SgptError::Parse {
                line: line_no,
                message: format!("expected 2 comma-separated fields, found {}", fields.len()),
            });
        }
        let node: usize = fields[0].parse().map_err(|_| SgptError::Parse {
            line: line_no,
            message: format!("invalid node id {:?}", fields[0]),
        })?;
        let class: usize = fields[1].parse().map_err(|_| SgptError::Parse {
            line: line_no,
            message: format!("invalid class {:?}", fields[1]),
        })?;
        if let Some(&prev) = labels.get(&node) {
            if prev != class {
                return Err(SgptError::Parse {
                    line: line_no,
                    message: format!("node {node} relabeled from {prev} to {class}"),
                });
            }
        } else {
            labels.insert(node, class);
        }
    }
    Ok(labels)
}

/// How the link-sign support budget is distributed over the two classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportBalance {
    /// Ceil(shots/2) positive and floor(shots/2) negative, spilling to the
    /// other class when one runs out.
    PerClass,
    /// First `shots` supervision edges regardless of sign.
    Total,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LspSplit {
    #[serde(rename = "mp")]
    pub mp_edges: Vec<(usize, usize, i8)>,
    pub support: Vec<(usize, usize, i8)>,
    pub test: Vec<(usize, usize, i8)>,
    pub seed: u64,
}

impl LspSplit {
    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| SgptError::InvalidInput(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SgptError::Corrupt(e.to_string()))
    }
}

/// Split edges into message-passing, support, and test parts: 30% of all
/// edges (floor) feed message passing only, `shots` of the rest are labeled
/// support, everything else is test.
pub fn make_lsp_split(g: &SignedGraph, shots: usize, seed: u64) -> Result<LspSplit> {
    make_lsp_split_with(g, shots, SupportBalance::PerClass, seed)
}

pub fn make_lsp_split_with(
    g: &SignedGraph,
    shots: usize,
    balance: SupportBalance,
    seed: u64,
) -> Result<LspSplit> {
    if shots == 0 {
        return Err(SgptError::InvalidInput("shot count must be at least 1".into()));
    }
    if g.pos_edges().is_empty() {
        return Err(SgptError::EmptyClass { class: 0 });
    }
    if g.neg_edges().is_empty() {
        return Err(SgptError::EmptyClass { class: 1 });
    }
    let mut edges = g.all_edges();
    let total = edges.len();
    let mp_count = total * 3 / 10;
    let available = total - mp_count;
    if shots > available {
        return Err(SgptError::InsufficientEdges {
            requested: shots,
            available,
        });
    }
    let mut rng = rng_from(seed);
    edges.shuffle(&mut rng);
    let rest = edges.split_off(mp_count);
    let mut mp_edges = edges;

    let (mut support, mut test) = take_support(rest, shots, balance);
    mp_edges.sort_unstable();
    support.sort_unstable();
    test.sort_unstable();
    Ok(LspSplit {
        mp_edges,
        support,
        test,
        seed,
    })
}

fn take_support(
    rest: Vec<(usize, usize, i8)>,
    shots: usize,
    balance: SupportBalance,
) -> (Vec<(usize, usize, i8)>, Vec<(usize, usize, i8)>) {
    let mut support = Vec::with_capacity(shots);
    let mut test = Vec::new();
    match balance {
        SupportBalance::Total => {
            support.extend_from_slice(&rest[..shots]);
            test.extend_from_slice(&rest[shots..]);
        }
        SupportBalance::PerClass => {
            let pos_avail = rest.iter().filter(|e| e.2 > 0).count();
            let neg_avail = rest.len() - pos_avail;
            let mut pos_quota = shots.div_ceil(2);
            let mut neg_quota = shots / 2;
            if pos_avail < pos_quota {
                neg_quota += pos_quota - pos_avail;
                pos_quota = pos_avail;
            } else if neg_avail < neg_quota {
                pos_quota += neg_quota - neg_avail;
                neg_quota = neg_avail;
            }
            let (mut took_pos, mut took_neg) = (0usize, 0usize);
            for e in rest {
                let take = if e.2 > 0 {
                    took_pos < pos_quota && {
                        took_pos += 1;
                        true
                    }
                } else {
                    took_neg < neg_quota && {
                        took_neg += 1;
                        true
                    }
                };
                if take {
                    support.push(e);
                } else {
                    test.push(e);
                }
            }
        }
    }
    (support, test)
}

/// Re-draw a class-balanced support set and matching test set from a fixed
/// pool of sign-labeled edges. Used when many tasks share one
/// message-passing split and only the labeled sets vary.
pub fn split_support_test(
    pool: &[(usize, usize, i8)],
    shots: usize,
    balance: SupportBalance,
    seed: u64,
) -> Result<(Vec<(usize, usize, i8)>, Vec<(usize, usize, i8)>)> {
    if shots == 0 {
        return Err(SgptError::InvalidInput("shot count must be at least 1".into()));
    }
    if shots > pool.len() {
        return Err(SgptError::InsufficientEdges {
            requested: shots,
            available: pool.len(),
        });
    }
    let mut edges = pool.to_vec();
    let mut rng = rng_from(seed);
    edges.shuffle(&mut rng);
    let (mut support, mut test) = take_support(edges, shots, balance);
    support.sort_unstable();
    test.sort_unstable();
    Ok((support, test))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcTask {
    pub support: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
    pub num_classes: usize,
}

/// Draw `num_tasks` independent node-classification episodes: each task takes
/// exactly `shots` support nodes per class, the remaining labeled nodes form
/// the test pool. Class values are remapped to 0..m-1 in ascending order of
/// the original labels.
pub fn sample_nc_tasks(
    g: &SignedGraph,
    labels: &BTreeMap<usize, usize>,
    shots: usize,
    num_tasks: usize,
    seed: u64,
) -> Result<Vec<NcTask>> {
    if shots == 0 {
        return Err(SgptError::InvalidInput("shot count must be at least 1".into()));
    }
    for (&node, _) in labels {
        if node >= g.num_nodes() {
            return Err(SgptError::InvalidInput(format!(
                "labeled node {node} exceeds node count {}",
                g.num_nodes()
            )));
        }
    }
    let classes: Vec<usize> = labels
        .values()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (&node, &class) in labels {
        let c = classes.binary_search(&class).expect("class collected above");
        members[c].push(node);
    }
    for (c, nodes) in members.iter().enumerate() {
        if nodes.len() < shots {
            return Err(SgptError::ClassTooSmall {
                class: classes[c],
                available: nodes.len(),
                needed: shots,
            });
        }
    }
    let mut tasks = Vec::with_capacity(num_tasks);
    for t in 0..num_tasks {
        let mut rng = rng_from(derive_seed(seed, t as u64));
        let mut support = Vec::with_capacity(shots * classes.len());
        let mut test = Vec::new();
        for (c, nodes) in members.iter().enumerate() {
            let mut pool = nodes.clone();
            pool.shuffle(&mut rng);
            for &node in &pool[..shots] {
                support.push((node, c));
            }
            for &node in &pool[shots..] {
                test.push((node, c));
            }
        }
        support.sort_unstable();
        test.sort_unstable();
        tasks.push(NcTask {
            support,
            test,
            num_classes: classes.len(),
        });
    }
    Ok(tasks)
}
