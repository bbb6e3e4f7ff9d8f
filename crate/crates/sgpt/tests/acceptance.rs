//! Acceptance suite: one numbered criterion per test, each ending in a
//! single pass/fail line (run with `--nocapture` to see the lines for
//! passing criteria too).

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use sgpt::autodiff::{grad_check, Adam, NodeId, ParamId, ParamSet, Tape};
use sgpt::dense::DenseMatrix;
use sgpt::gcn::{init_weights, Checkpoint, GcnConfig};
use sgpt::graph::{make_lsp_split, SignedGraph};
use sgpt::pretrain::{run_pretrain, PretrainConfig};
use sgpt::prompt::{
    apply_feature_prompt, bind_backbone, embed, embed_tape, init_prompt_state,
    normalize_channels, Channel, NormalizedChannels, PromptDims,
};
use sgpt::seed::{derive_seed, rng_from};
use sgpt::sparse::{SparseBinaryMatrix, SparseRealMatrix};
use sgpt::synth::{generate_synthetic, trust_network, SyntheticSpec};
use sgpt::template::{build_channels, build_channels_timed, init_prototypes, TaskKind};
use sgpt::tune::{
    auc, item_matrix, run_eval, sweep, tune_prepared, EvalReport, Item, PreparedTask, SweepAxis,
    TuneConfig,
};

fn verdict(name: &str, ok: bool, details: &str) {
    println!(
        "criterion {name}: {} [{details}]",
        if ok { "pass" } else { "FAIL" }
    );
    assert!(ok, "criterion {name} failed: {details}");
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|v| v.to_bits()).collect()
}

fn entries(m: &SparseBinaryMatrix) -> BTreeSet<(usize, usize)> {
    m.iter_entries().collect()
}

fn walk_sets(
    g: &SignedGraph,
    k: usize,
) -> (Vec<BTreeSet<(usize, usize)>>, Vec<BTreeSet<(usize, usize)>>) {
    let n = g.num_nodes();
    let mut signed: Vec<Vec<(usize, i8)>> = vec![Vec::new(); n];
    for (u, v, s) in g.all_edges() {
        signed[u].push((v, s));
        signed[v].push((u, s));
    }
    let mut pos = vec![BTreeSet::new(); k];
    let mut neg = vec![BTreeSet::new(); k];
    for start in 0..n {
        let mut frontier: Vec<(usize, usize)> = vec![(start, 0)];
        for hop in 0..k {
            let mut next = Vec::new();
            for &(node, parity) in &frontier {
                for &(to, s) in &signed[node] {
                    next.push((to, (parity + usize::from(s < 0)) % 2));
                }
            }
            next.sort_unstable();
            next.dedup();
            for &(node, parity) in &next {
                if node == start {
                    continue;
                }
                if parity == 0 {
                    pos[hop].insert((start, node));
                } else {
                    neg[hop].insert((start, node));
                }
            }
            frontier = next;
        }
    }
    (pos, neg)
}

#[test]
fn criterion_01_channels_match_parity_walk_enumeration() {
    let t0 = Instant::now();
    let mut rng = rng_from(0xC1);
    let mut mismatch = None;
    for case in 0..200 {
        let n = rng.gen_range(2..=30usize);
        let density = rng.gen_range(0.0..0.3);
        let mut pos_edges = Vec::new();
        let mut neg_edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < density {
                    if rng.gen::<bool>() {
                        pos_edges.push((u, v));
                    } else {
                        neg_edges.push((u, v));
                    }
                }
            }
        }
        let g = SignedGraph::from_edges(n, pos_edges, neg_edges).unwrap();
        let mut union = BTreeSet::new();
        for (u, v, _) in g.all_edges() {
            union.insert((u, v));
            union.insert((v, u));
        }
        for k in 1..=3usize {
            let ch = build_channels(&g, k).unwrap();
            let (want_pos, want_neg) = walk_sets(&g, k);
            for hop in 0..k {
                if entries(&ch.pos()[hop]) != want_pos[hop] {
                    mismatch.get_or_insert(format!("case {case} hop {} positive", hop + 1));
                }
                if entries(&ch.neg()[hop]) != want_neg[hop] {
                    mismatch.get_or_insert(format!("case {case} hop {} negative", hop + 1));
                }
            }
            if entries(ch.topo()) != union {
                mismatch.get_or_insert(format!("case {case} k {k} topological union"));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = mismatch.is_none() && secs < 60.0;
    let details = match &mismatch {
        None => format!("200 graphs, k 1..3, {secs:.1}s"),
        Some(m) => format!("first mismatch at {m}"),
    };
    verdict("01 channel-enumeration-oracle", ok, &details);
}

fn offset_gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_from(seed);
    let mut m = DenseMatrix::gaussian(rows, cols, 1.0, &mut rng);
    for v in m.data_mut() {
        if v.abs() < 0.1 {
            *v += 0.25_f64.copysign(*v + 0.5);
        }
    }
    m
}

fn contract(tape: &mut Tape, node: NodeId, seed: u64) -> sgpt::Result<NodeId> {
    let (rows, cols) = (tape.value(node).rows(), tape.value(node).cols());
    let mut rng = rng_from(seed);
    let left = tape.input(DenseMatrix::gaussian(1, rows, 1.0, &mut rng));
    let right = tape.input(DenseMatrix::gaussian(cols, 1, 1.0, &mut rng));
    let lm = tape.matmul(left, node)?;
    tape.matmul(lm, right)
}

fn primitive_error<F>(inits: Vec<DenseMatrix>, build: F) -> f64
where
    F: Fn(&mut Tape, &[NodeId]) -> sgpt::Result<NodeId>,
{
    let mut params = ParamSet::new();
    let ids: Vec<ParamId> = inits
        .into_iter()
        .enumerate()
        .map(|(i, v)| params.add(format!("p{i}"), v, true))
        .collect();
    grad_check(
        |ps, want| {
            let mut tape = Tape::new();
            let leaves: Vec<NodeId> = ids.iter().map(|&id| tape.param(ps, id)).collect();
            let loss = build(&mut tape, &leaves)?;
            let v = tape.value(loss).get(0, 0);
            if want {
                tape.backward(loss)?;
                tape.copy_grads(ps);
            }
            Ok(v)
        },
        &mut params,
        1e-5,
    )
    .unwrap()
}

fn primitive_errors() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    out.push((
        "matmul",
        primitive_error(
            vec![offset_gaussian(3, 4, 1), offset_gaussian(4, 2, 2)],
            |t, p| {
                let m = t.matmul(p[0], p[1])?;
                contract(t, m, 3)
            },
        ),
    ));
    out.push((
        "add",
        primitive_error(
            vec![offset_gaussian(3, 4, 4), offset_gaussian(3, 4, 5)],
            |t, p| {
                let m = t.add(p[0], p[1])?;
                contract(t, m, 6)
            },
        ),
    ));
    out.push((
        "scale",
        primitive_error(vec![offset_gaussian(3, 4, 7)], |t, p| {
            let m = t.scale(p[0], -1.7);
            contract(t, m, 8)
        }),
    ));
    out.push((
        "relu",
        primitive_error(vec![offset_gaussian(3, 4, 9)], |t, p| {
            let m = t.relu(p[0]);
            contract(t, m, 10)
        }),
    ));
    out.push((
        "concat_cols",
        primitive_error(
            vec![offset_gaussian(3, 2, 11), offset_gaussian(3, 3, 12)],
            |t, p| {
                let m = t.concat_cols(&[p[0], p[1]])?;
                contract(t, m, 13)
            },
        ),
    ));
    out.push((
        "batchnorm_rows",
        primitive_error(
            vec![
                offset_gaussian(5, 4, 14),
                offset_gaussian(1, 4, 15),
                offset_gaussian(1, 4, 16),
            ],
            |t, p| {
                let m = t.batchnorm_rows(p[0], p[1], p[2])?;
                contract(t, m, 17)
            },
        ),
    ));
    out.push((
        "cosine_rows",
        primitive_error(
            vec![offset_gaussian(4, 5, 18), offset_gaussian(4, 5, 19)],
            |t, p| {
                let m = t.cosine_rows(p[0], p[1])?;
                contract(t, m, 20)
            },
        ),
    ));
    out.push((
        "cosine_cross",
        primitive_error(
            vec![offset_gaussian(4, 5, 21), offset_gaussian(3, 5, 22)],
            |t, p| {
                let m = t.cosine_cross(p[0], p[1])?;
                contract(t, m, 23)
            },
        ),
    ));
    out.push((
        "softmax_rows",
        primitive_error(vec![offset_gaussian(4, 3, 24)], |t, p| {
            let m = t.softmax_rows(p[0]);
            contract(t, m, 25)
        }),
    ));
    out.push((
        "softmax_cross_entropy",
        primitive_error(vec![offset_gaussian(4, 3, 26)], |t, p| {
            t.softmax_cross_entropy(p[0], &[0, 2, 1, 0])
        }),
    ));
    out.push((
        "row_weighted_sum",
        primitive_error(
            vec![
                offset_gaussian(3, 4, 27),
                offset_gaussian(3, 4, 28),
                offset_gaussian(1, 2, 29),
            ],
            |t, p| {
                let m = t.row_weighted_sum(&[p[0], p[1]], p[2])?;
                contract(t, m, 30)
            },
        ),
    ));
    out.push((
        "gather_rows",
        primitive_error(vec![offset_gaussian(5, 4, 31)], |t, p| {
            let m = t.gather_rows(p[0], &[0, 2, 2, 4])?;
            contract(t, m, 32)
        }),
    ));
    let adj = {
        let mut rng = rng_from(33);
        let n = 6;
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < 0.5 {
                    pairs.push((u, v));
                    pairs.push((v, u));
                }
            }
        }
        let binary = SparseBinaryMatrix::from_entries(n, n, pairs).unwrap();
        Rc::new(SparseRealMatrix::gcn_normalize(&binary).unwrap())
    };
    out.push((
        "spmm",
        primitive_error(vec![offset_gaussian(6, 3, 34)], move |t, p| {
            let m = t.spmm(Rc::clone(&adj), p[0])?;
            contract(t, m, 35)
        }),
    ));
    out
}

fn link_loss_on_tape(
    tape: &mut Tape,
    e: NodeId,
    protos: NodeId,
    items: &[Item],
    labels: &[usize],
    tau: f64,
) -> sgpt::Result<NodeId> {
    let mut us = Vec::with_capacity(items.len());
    let mut vs = Vec::with_capacity(items.len());
    for it in items {
        match *it {
            Item::Link(u, v) => {
                us.push(u);
                vs.push(v);
            }
            Item::Node(_) => unreachable!("link-only fixture"),
        }
    }
    let a = tape.gather_rows(e, &us)?;
    let b = tape.gather_rows(e, &vs)?;
    let q = tape.concat_cols(&[a, b])?;
    let sims = tape.cosine_cross(q, protos)?;
    let logits = tape.scale(sims, 1.0 / tau);
    tape.softmax_cross_entropy(logits, labels)
}

/// 10-node signed toy with a bound, generically positioned prompt state.
fn grad_fixture() -> (
    SignedGraph,
    Checkpoint,
    NormalizedChannels,
    Vec<Item>,
    Vec<usize>,
) {
    let spec = SyntheticSpec {
        num_nodes: 10,
        num_communities: 2,
        intra_pos_prob: 0.7,
        inter_neg_prob: 0.6,
        noise_flip_prob: 0.0,
        seed: 21,
    };
    let (g, _) = generate_synthetic(&spec).unwrap();
    let g = g.init_features(6, 8).unwrap();
    let gcn = GcnConfig::new(vec![6, 8, 6]).unwrap();
    let ckpt = Checkpoint::new(gcn.clone(), init_weights(&gcn, 4), 4, gcn.canonical_text()).unwrap();
    let channels = build_channels(&g, 2).unwrap();
    let norm = normalize_channels(&channels).unwrap();
    let edges = g.all_edges();
    assert!(edges.len() >= 6, "toy graph too sparse: {} edges", edges.len());
    let items: Vec<Item> = edges.iter().take(6).map(|&(u, v, _)| Item::Link(u, v)).collect();
    let labels: Vec<usize> = edges.iter().take(6).map(|&(_, _, s)| usize::from(s < 0)).collect();
    (g, ckpt, norm, items, labels)
}

#[test]
fn criterion_02_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let (g, ckpt, norm, items, labels) = grad_fixture();
    let dims = PromptDims::new(6, 6, 2, 2, 4).unwrap();
    let mut state = init_prompt_state(&dims, TaskKind::Lsp, 13);
    let e0 = embed(&state, &ckpt, &norm, g.features()).unwrap();
    let support0 = item_matrix(&e0, TaskKind::Lsp, &items).unwrap();
    state.prototypes = init_prototypes(TaskKind::Lsp, &support0, &labels, 2).unwrap();

    let mut params = ParamSet::new();
    let ids = state.bind(&mut params);
    let backbone = bind_backbone(&mut params, &ckpt);
    let mut rng = rng_from(31);
    params.get_mut(ids.w_up).value = DenseMatrix::gaussian(4, 6, 0.3, &mut rng);

    let x = g.features().clone();
    let full_err = grad_check(
        |ps, want| {
            let mut tape = Tape::new();
            let xn = tape.input(x.clone());
            let e = embed_tape(&mut tape, ps, &ids, &backbone, &norm, xn)?;
            let protos = tape.param(ps, ids.prototypes);
            let loss = link_loss_on_tape(&mut tape, e, protos, &items, &labels, 0.1)?;
            let v = tape.value(loss).get(0, 0);
            if want {
                tape.backward(loss)?;
                tape.copy_grads(ps);
            }
            Ok(v)
        },
        &mut params,
        1e-5,
    )
    .unwrap();

    let prims = primitive_errors();
    let (worst_name, worst_err) = prims
        .iter()
        .fold(("none", 0.0), |acc, &(n, e)| if e > acc.1 { (n, e) } else { acc });
    let secs = t0.elapsed().as_secs_f64();
    let ok = full_err < 1e-4 && prims.iter().all(|&(_, e)| e < 1e-5) && secs < 30.0;
    verdict(
        "02 gradient-fidelity",
        ok,
        &format!(
            "full loss {full_err:.2e}, worst primitive {worst_name} {worst_err:.2e}, {secs:.1}s"
        ),
    );
}

/// 24-node signed toy with a short pretrained backbone and one episode.
fn tuning_fixture() -> (
    SignedGraph,
    Checkpoint,
    NormalizedChannels,
    Vec<(usize, usize, i8)>,
    Vec<(usize, usize, i8)>,
    TuneConfig,
) {
    let spec = SyntheticSpec {
        num_nodes: 24,
        num_communities: 2,
        intra_pos_prob: 0.5,
        inter_neg_prob: 0.4,
        noise_flip_prob: 0.0,
        seed: 5,
    };
    let (g, _) = generate_synthetic(&spec).unwrap();
    let g = g.init_features(6, 9).unwrap();
    let gcn = GcnConfig::new(vec![6, 12, 8]).unwrap();
    let mut pre = PretrainConfig::new(3);
    pre.epochs = 5;
    let (ckpt, _) = run_pretrain(&g.unsigned_view(), g.features(), &gcn, &pre, |_, _| {}).unwrap();
    let mut config = TuneConfig::new(TaskKind::Lsp, 8);
    config.epochs = 100;
    config.d_mid = 4;
    config.init_seed = 3;
    config.task_seed = 1;
    let split = make_lsp_split(&g, config.shots, config.task_seed).unwrap();
    let channels = build_channels(&g, config.hops).unwrap();
    let norm = normalize_channels(&channels).unwrap();
    (g, ckpt, norm, split.support, split.test, config)
}

#[test]
fn criterion_03_tuning_freezes_backbone_and_reaches_every_prompt_tensor() {
    let (g, ckpt, norm, support, test, config) = tuning_fixture();
    let x = g.features();
    let items: Vec<Item> = support.iter().map(|&(u, v, _)| Item::Link(u, v)).collect();
    let labels: Vec<usize> = support.iter().map(|&(_, _, s)| usize::from(s < 0)).collect();

    let dims = PromptDims::new(
        x.cols(),
        ckpt.config().d_out(),
        config.hops,
        config.basis,
        config.d_mid,
    )
    .unwrap();
    let mut state = init_prompt_state(&dims, TaskKind::Lsp, config.init_seed);
    let e0 = embed(&state, &ckpt, &norm, x).unwrap();
    let support0 = item_matrix(&e0, TaskKind::Lsp, &items).unwrap();
    state.prototypes = init_prototypes(TaskKind::Lsp, &support0, &labels, 2).unwrap();

    let mut params = ParamSet::new();
    let ids = state.bind(&mut params);
    let backbone = bind_backbone(&mut params, &ckpt);
    let mut adam = Adam::new(config.lr);

    let tensors: Vec<(&str, ParamId)> = vec![
        ("positive bases", ids.bases[0]),
        ("negative bases", ids.bases[1]),
        ("topological bases", ids.bases[2]),
        ("positive heads", ids.heads[0]),
        ("negative heads", ids.heads[1]),
        ("topological heads", ids.heads[2]),
        ("positive hop weights", ids.w_pos),
        ("negative hop weights", ids.w_neg),
        ("down projection", ids.w_down),
        ("up projection", ids.w_up),
        ("batchnorm scale", ids.gamma),
        ("batchnorm shift", ids.beta),
        ("prototypes", ids.prototypes),
    ];
    let mut touched = vec![false; tensors.len()];
    let mut curve = Vec::with_capacity(100);
    for _ in 0..100 {
        params.zero_grads();
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let e = embed_tape(&mut tape, &params, &ids, &backbone, &norm, xn).unwrap();
        let protos = tape.param(&params, ids.prototypes);
        let loss_node =
            link_loss_on_tape(&mut tape, e, protos, &items, &labels, config.tau).unwrap();
        let loss = tape.value(loss_node).get(0, 0);
        assert!(loss.is_finite(), "loss diverged: {loss}");
        tape.backward(loss_node).unwrap();
        tape.copy_grads(&mut params);
        for (slot, &(_, id)) in tensors.iter().enumerate() {
            if params.get(id).grad.data().iter().any(|&v| v != 0.0) {
                touched[slot] = true;
            }
        }
        adam.step(&mut params);
        curve.push(loss);
    }

    let frozen = backbone.iter().zip(ckpt.weights()).all(|(&id, w)| {
        let tuned = &params.get(id).value;
        tuned.data().len() == w.data().len()
            && tuned
                .data()
                .iter()
                .zip(w.data())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    });

    let episode = PreparedTask::from_links(&support, &test);
    let (_, library_curve) = tune_prepared(x, &ckpt, &norm, &episode, &config).unwrap();
    let replicated = bits(&curve) == bits(&library_curve);

    let missed: Vec<&str> = tensors
        .iter()
        .zip(&touched)
        .filter(|(_, &t)| !t)
        .map(|(n, _)| n.0)
        .collect();
    let ok = frozen && replicated && missed.is_empty();
    verdict(
        "03 freezing-and-gradient-coverage",
        ok,
        &format!(
            "backbone frozen {frozen}, loop matches library {replicated}, missed tensors {missed:?}"
        ),
    );
}

#[test]
fn criterion_04_embedding_starts_at_the_topological_branch() {
    let (g, ckpt, norm, _, _) = grad_fixture();
    let dims = PromptDims::new(6, 6, 2, 2, 4).unwrap();
    let state = init_prompt_state(&dims, TaskKind::Lsp, 13);
    let e = embed(&state, &ckpt, &norm, g.features()).unwrap();
    let xt = apply_feature_prompt(g.features(), state.feature.channel(Channel::Topo)).unwrap();
    let ht = ckpt.encode(&norm.topo, &xt).unwrap();
    let same = e.rows() == ht.rows()
        && e.cols() == ht.cols()
        && bits(e.data()) == bits(ht.data());
    verdict(
        "04 initial-embedding-identity",
        same,
        &format!("{}x{} output bitwise", e.rows(), e.cols()),
    );
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0u64;
    let mut ties = 0u64;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1;
            } else if scores[i] == scores[j] {
                ties += 1;
            }
        }
    }
    (wins as f64 + 0.5 * ties as f64) / pairs as f64
}

#[test]
fn criterion_05_auc_equals_exhaustive_pairwise_counting() {
    let fixed = auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
    let mut rng = rng_from(0xC5);
    let mut first_mismatch = None;
    for case in 0..1000 {
        let len = rng.gen_range(2..=200usize);
        let quantize = case % 2 == 0;
        let scores: Vec<f64> = (0..len)
            .map(|_| {
                let s = rng.gen::<f64>();
                if quantize {
                    (s * 4.0).round() / 4.0
                } else {
                    s
                }
            })
            .collect();
        let mut labels: Vec<bool> = (0..len).map(|_| rng.gen()).collect();
        labels[0] = true;
        labels[1] = false;
        let fast = auc(&scores, &labels).unwrap();
        let slow = pairwise_auc(&scores, &labels);
        if fast.to_bits() != slow.to_bits() {
            first_mismatch.get_or_insert(format!("case {case}: {fast} vs {slow}"));
        }
    }
    let ok = first_mismatch.is_none() && fixed == 0.75;
    let details = match &first_mismatch {
        None => format!("fixed example {fixed}, 1000 random cases bit-exact"),
        Some(m) => m.clone(),
    };
    verdict("05 auc-counting-oracle", ok, &details);
}

struct LspOutcome {
    main: EvalReport,
    blind: EvalReport,
    seconds: f64,
}

struct NcOutcome {
    report: EvalReport,
    seconds: f64,
}

struct TrustOutcome {
    report: EvalReport,
    hop_stats: usize,
    seconds: f64,
}

fn communities_spec() -> SyntheticSpec {
    SyntheticSpec {
        num_nodes: 100,
        num_communities: 2,
        intra_pos_prob: 0.2,
        inter_neg_prob: 0.2,
        noise_flip_prob: 0.05,
        seed: 42,
    }
}

fn lsp_bench_config() -> TuneConfig {
    let mut config = TuneConfig::new(TaskKind::Lsp, 100);
    config.hops = 3;
    config.lr = 0.03;
    config.epochs = 50;
    config.tau = 0.05;
    config.task_seed = derive_seed(0, 0);
    config.init_seed = derive_seed(0, 1);
    config
}

fn run_lsp_bench() -> LspOutcome {
    let t0 = Instant::now();
    let (g, _) = generate_synthetic(&communities_spec()).unwrap();
    let g = g.init_features(32, 0).unwrap();
    let config = lsp_bench_config();
    let split = make_lsp_split(&g, config.shots, config.task_seed).unwrap();
    let mp = g.restrict_to(&split.mp_edges).unwrap();
    let gcn = GcnConfig::default_dims(32).unwrap();
    let mut pre = PretrainConfig::new(2);
    pre.epochs = 50;
    let (ckpt, _) =
        run_pretrain(&mp.unsigned_view(), g.features(), &gcn, &pre, |_, _| {}).unwrap();
    let main = run_eval(&g, None, &ckpt, &config, 100).unwrap();
    let mut blind_config = config.clone();
    blind_config.sign_blind = true;
    let blind = run_eval(&g, None, &ckpt, &blind_config, 100).unwrap();
    LspOutcome {
        main,
        blind,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn lsp_bench() -> &'static LspOutcome {
    static CELL: OnceLock<LspOutcome> = OnceLock::new();
    CELL.get_or_init(run_lsp_bench)
}

fn nc_bench_config() -> TuneConfig {
    let mut config = TuneConfig::new(TaskKind::Nc, 1);
    config.epochs = 10;
    config.lr = 0.01;
    config.task_seed = derive_seed(0, 0);
    config.init_seed = derive_seed(0, 1);
    config
}

fn run_nc_bench() -> NcOutcome {
    let t0 = Instant::now();
    let (g, labels) = generate_synthetic(&communities_spec()).unwrap();
    let g = g.init_features(32, 0).unwrap();
    let labels: BTreeMap<usize, usize> = labels.into_iter().enumerate().collect();
    let gcn = GcnConfig::default_dims(32).unwrap();
    let mut pre = PretrainConfig::new(2);
    pre.epochs = 50;
    let (ckpt, _) = run_pretrain(&g.unsigned_view(), g.features(), &gcn, &pre, |_, _| {}).unwrap();
    let report = run_eval(&g, Some(&labels), &ckpt, &nc_bench_config(), 100).unwrap();
    NcOutcome {
        report,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn nc_bench() -> &'static NcOutcome {
    static CELL: OnceLock<NcOutcome> = OnceLock::new();
    CELL.get_or_init(run_nc_bench)
}

fn build_trust() -> (SignedGraph, Checkpoint, f64) {
    let t0 = Instant::now();
    let g = trust_network(3783, 22650, 1536, 6)
        .unwrap()
        .init_features(32, 0)
        .unwrap();
    let gcn = GcnConfig::default_dims(32).unwrap();
    let mut pre = PretrainConfig::new(2);
    pre.epochs = 20;
    let (ckpt, _) = run_pretrain(&g.unsigned_view(), g.features(), &gcn, &pre, |_, _| {}).unwrap();
    (g, ckpt, t0.elapsed().as_secs_f64())
}

fn trust_setup() -> &'static (SignedGraph, Checkpoint, f64) {
    static CELL: OnceLock<(SignedGraph, Checkpoint, f64)> = OnceLock::new();
    CELL.get_or_init(build_trust)
}

fn trust_bench_config() -> TuneConfig {
    let mut config = TuneConfig::new(TaskKind::Lsp, 40);
    config.epochs = 20;
    config.lr = 0.01;
    config.task_seed = derive_seed(0, 0);
    config.init_seed = derive_seed(0, 1);
    config
}

fn run_trust_bench(g: &SignedGraph, ckpt: &Checkpoint, setup_seconds: f64) -> TrustOutcome {
    let t0 = Instant::now();
    let (_, stats) = build_channels_timed(g, 2).unwrap();
    let report = run_eval(g, None, ckpt, &trust_bench_config(), 10).unwrap();
    TrustOutcome {
        report,
        hop_stats: stats.len(),
        seconds: setup_seconds + t0.elapsed().as_secs_f64(),
    }
}

fn trust_bench() -> &'static TrustOutcome {
    static CELL: OnceLock<TrustOutcome> = OnceLock::new();
    CELL.get_or_init(|| {
        let (g, ckpt, setup) = trust_setup();
        run_trust_bench(g, ckpt, *setup)
    })
}

#[test]
fn criterion_06_signed_channels_beat_the_sign_blind_ablation() {
    let out = lsp_bench();
    let gap = out.main.mean - out.blind.mean;
    let ok = out.main.mean > 0.90 && gap >= 0.10 && out.seconds < 600.0;
    verdict(
        "06 link-sign-benchmark",
        ok,
        &format!(
            "mean {:.4}, ablation {:.4}, gap {:.4}, {:.0}s",
            out.main.mean, out.blind.mean, gap, out.seconds
        ),
    );
}

#[test]
fn criterion_07_one_shot_node_classification_clears_the_bar() {
    let out = nc_bench();
    let ok = out.report.mean > 0.85 && out.seconds < 600.0;
    verdict(
        "07 node-classification-benchmark",
        ok,
        &format!("mean {:.4}, {:.0}s", out.report.mean, out.seconds),
    );
}

#[test]
fn criterion_08_trust_network_pipeline_smoke() {
    let out = trust_bench();
    let r = &out.report;
    let valid = r.per_task.len() == 10
        && r.per_task.iter().all(|a| a.is_finite() && (0.0..=1.0).contains(a))
        && r.std.is_finite()
        && r.runtime_seconds > 0.0
        && out.hop_stats == 2;
    let ok = valid && r.mean > 0.5 && out.seconds < 1800.0;
    verdict(
        "08 benchmark-smoke",
        ok,
        &format!(
            "valid report {valid}, mean {:.4}, {:.0}s pretrain through eval",
            r.mean, out.seconds
        ),
    );
}

#[test]
fn criterion_09_hop_sweep_construction_time_is_nondecreasing() {
    let (g, ckpt, _) = trust_setup();
    let mut base = trust_bench_config();
    base.epochs = 2;
    let rows = sweep(g, None, ckpt, &base, &SweepAxis::Hops(vec![1, 2, 3]), 2).unwrap();
    let times: Vec<f64> = rows.iter().map(|r| r.construct_seconds).collect();
    let ok = rows.len() == 3 && times.windows(2).all(|w| w[0] <= w[1]);
    verdict(
        "09 sweep-cost-monotonicity",
        ok,
        &format!("construct seconds {times:?}"),
    );
}

#[test]
fn criterion_10_identical_seeds_reproduce_per_task_scores_bitwise() {
    let first_lsp = lsp_bench();
    let again_lsp = run_lsp_bench();
    let first_nc = nc_bench();
    let again_nc = run_nc_bench();
    let first_trust = trust_bench();
    let (fresh_g, fresh_ckpt, fresh_setup) = build_trust();
    let again_trust = run_trust_bench(&fresh_g, &fresh_ckpt, fresh_setup);

    let lsp_same = bits(&first_lsp.main.per_task) == bits(&again_lsp.main.per_task)
        && bits(&first_lsp.blind.per_task) == bits(&again_lsp.blind.per_task);
    let nc_same = bits(&first_nc.report.per_task) == bits(&again_nc.report.per_task);
    let trust_same = bits(&first_trust.report.per_task) == bits(&again_trust.report.per_task);
    let ok = lsp_same && nc_same && trust_same;
    verdict(
        "10 determinism",
        ok,
        &format!("link-sign {lsp_same}, node-class {nc_same}, smoke {trust_same}"),
    );
}
