//! Few-shot prompt tuning over a frozen backbone and the evaluation
//! harness that reports mean and standard deviation of ranking AUC over
//! many resampled tasks.
//!
//! A task supplies labeled support items, either nodes or node pairs.
//! Tuning initializes a prompt state, attaches class prototypes from the
//! step-0 support embeddings, and runs Adam on the prompt tensors alone;
//! backbone weights enter the tape as frozen parameters. The training loss
//! is cross-entropy over temperature-scaled cosine similarity between item
//! embeddings and prototype rows. Test items are scored by the class-0
//! minus class-1 logit gap and ranked with the tie-aware AUC statistic.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, NodeId, ParamSet, Tape};
use crate::dense::DenseMatrix;
use crate::gcn::Checkpoint;
use crate::graph::{
    make_lsp_split, sample_nc_tasks, split_support_test, SignedGraph, SupportBalance,
};
use crate::prompt::{
    bind_backbone, embed, embed_tape, init_prompt_state, normalize_channels, NormalizedChannels,
    PromptDims, PromptState,
};
use crate::seed::derive_seed;
use crate::template::{
    build_channels, build_channels_timed, build_sign_blind_channels, init_prototypes,
    predict, HopStats, PrototypeSet, TaskKind,
};
use crate::{Result, SgptError, VERSION};

/// Hyperparameters of one downstream tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub kind: TaskKind,
    pub shots: usize,
    pub epochs: usize,
    pub lr: f64,
    pub tau: f64,
    pub hops: usize,
    pub basis: usize,
    pub d_mid: usize,
    pub task_seed: u64,
    pub init_seed: u64,
    pub sign_blind: bool,
}

impl TuneConfig {
    pub fn new(kind: TaskKind, shots: usize) -> Self {
        Self {
            kind,
            shots,
            epochs: 200,
            lr: 1e-3,
            tau: 0.1,
            hops: 2,
            basis: 4,
            d_mid: 8,
            task_seed: 0,
            init_seed: 0,
            sign_blind: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(SgptError::InvalidInput("shot count must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(SgptError::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.tau > 0.0) {
            return Err(SgptError::InvalidInput(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        if self.hops == 0 || self.basis == 0 || self.d_mid == 0 {
            return Err(SgptError::InvalidInput(
                "hops, basis, and d_mid must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A labeled unit: a node row or an ordered node pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    Node(usize),
    Link(usize, usize),
}

/// One fully materialized few-shot episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedTask {
    pub kind: TaskKind,
    pub support_items: Vec<Item>,
    pub support_labels: Vec<usize>,
    pub test_items: Vec<Item>,
    pub test_labels: Vec<usize>,
    pub num_classes: usize,
}

impl PreparedTask {
    /// Build a sign-prediction episode; class 0 is the positive sign.
    pub fn from_links(support: &[(usize, usize, i8)], test: &[(usize, usize, i8)]) -> Self {
        let convert = |edges: &[(usize, usize, i8)]| {
            edges
                .iter()
                .map(|&(u, v, s)| (Item::Link(u, v), usize::from(s < 0)))
                .unzip()
        };
        let (support_items, support_labels) = convert(support);
        let (test_items, test_labels) = convert(test);
        Self {
            kind: TaskKind::Lsp,
            support_items,
            support_labels,
            test_items,
            test_labels,
            num_classes: 2,
        }
    }

    /// Build a node-classification episode from (node, class) pairs.
    pub fn from_nodes(
        support: &[(usize, usize)],
        test: &[(usize, usize)],
        num_classes: usize,
    ) -> Self {
        let convert = |nodes: &[(usize, usize)]| {
            nodes
                .iter()
                .map(|&(node, class)| (Item::Node(node), class))
                .unzip()
        };
        let (support_items, support_labels) = convert(support);
        let (test_items, test_labels) = convert(test);
        Self {
            kind: TaskKind::Nc,
            support_items,
            support_labels,
            test_items,
            test_labels,
            num_classes,
        }
    }
}

fn gather_items(tape: &mut Tape, e: NodeId, kind: TaskKind, items: &[Item]) -> Result<NodeId> {
    match kind {
        TaskKind::Nc => {
            let rows = items
                .iter()
                .map(|it| match *it {
                    Item::Node(u) => Ok(u),
                    Item::Link(u, v) => Err(SgptError::InvalidInput(format!(
                        "node task cannot score the pair ({u},{v})"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            tape.gather_rows(e, &rows)
        }
        TaskKind::Lsp => {
            let mut us = Vec::with_capacity(items.len());
            let mut vs = Vec::with_capacity(items.len());
            for it in items {
                match *it {
                    Item::Link(u, v) => {
                        us.push(u);
                        vs.push(v);
                    }
                    Item::Node(u) => {
                        return Err(SgptError::InvalidInput(format!(
                            "link task cannot score the single node {u}"
                        )))
                    }
                }
            }
            let a = tape.gather_rows(e, &us)?;
            let b = tape.gather_rows(e, &vs)?;
            tape.concat_cols(&[a, b])
        }
    }
}

fn downstream_loss_tape(
    tape: &mut Tape,
    e: NodeId,
    protos: NodeId,
    kind: TaskKind,
    items: &[Item],
    labels: &[usize],
    tau: f64,
) -> Result<NodeId> {
    if items.is_empty() {
        return Err(SgptError::InvalidInput("labeled set is empty".into()));
    }
    if items.len() != labels.len() {
        return Err(SgptError::ShapeMismatch {
            context: "downstream_loss",
            details: format!("{} items for {} labels", items.len(), labels.len()),
        });
    }
    if !(tau > 0.0) {
        return Err(SgptError::InvalidInput(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let q = gather_items(tape, e, kind, items)?;
    let sims = tape.cosine_cross(q, protos)?;
    let logits = tape.scale(sims, 1.0 / tau);
    tape.softmax_cross_entropy(logits, labels)
}

/// Mean cross-entropy of softmax over temperature-scaled prototype
/// similarities for a labeled item set.
pub fn downstream_loss(
    e: &DenseMatrix,
    protos: &PrototypeSet,
    items: &[Item],
    labels: &[usize],
    tau: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let en = tape.input(e.clone());
    let pn = tape.input(protos.embeddings().clone());
    let loss = downstream_loss_tape(&mut tape, en, pn, protos.kind(), items, labels, tau)?;
    Ok(tape.value(loss).get(0, 0))
}

/// Extract the value-level item matrix: node rows, or concatenated pair
/// rows twice the embedding width.
pub fn item_matrix(e: &DenseMatrix, kind: TaskKind, items: &[Item]) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let en = tape.input(e.clone());
    let q = gather_items(&mut tape, en, kind, items)?;
    Ok(tape.value(q).clone())
}

/// Tune a prompt state against one episode with channels already built and
/// normalized. Returns the tuned state and the per-epoch loss curve.
pub fn tune_prepared(
    x: &DenseMatrix,
    ckpt: &Checkpoint,
    norm: &NormalizedChannels,
    task: &PreparedTask,
    config: &TuneConfig,
) -> Result<(PromptState, Vec<f64>)> {
    config.validate()?;
    if task.kind != config.kind {
        return Err(SgptError::InvalidInput(format!(
            "config is for {} but the task is {}",
            config.kind.as_str(),
            task.kind.as_str()
        )));
    }
    if norm.pos.len() != config.hops {
        return Err(SgptError::InvalidInput(format!(
            "channel set has {} hops but config requests {}",
            norm.pos.len(),
            config.hops
        )));
    }
    if task.support_items.is_empty() {
        return Err(SgptError::InvalidInput("labeled set is empty".into()));
    }
    let dims = PromptDims::new(
        x.cols(),
        ckpt.config().d_out(),
        config.hops,
        config.basis,
        config.d_mid,
    )?;
    let mut state = init_prompt_state(&dims, task.kind, config.init_seed);

    let e0 = embed(&state, ckpt, norm, x)?;
    let support0 = item_matrix(&e0, task.kind, &task.support_items)?;
    state.prototypes = init_prototypes(
        task.kind,
        &support0,
        &task.support_labels,
        task.num_classes,
    )?;

    let mut curve = Vec::with_capacity(config.epochs);
    if config.epochs == 0 {
        return Ok((state, curve));
    }

    let mut params = ParamSet::new();
    let ids = state.bind(&mut params);
    let backbone = bind_backbone(&mut params, ckpt);
    let mut adam = Adam::new(config.lr);

    for epoch in 0..config.epochs {
        params.zero_grads();
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let e = embed_tape(&mut tape, &params, &ids, &backbone, norm, xn)?;
        let protos = tape.param(&params, ids.prototypes);
        let loss_node = downstream_loss_tape(
            &mut tape,
            e,
            protos,
            task.kind,
            &task.support_items,
            &task.support_labels,
            config.tau,
        )?;
        let loss = tape.value(loss_node).get(0, 0);
        if !loss.is_finite() {
            return Err(SgptError::NonFiniteLoss { step: epoch, value: loss });
        }
        tape.backward(loss_node)?;
        tape.copy_grads(&mut params);
        adam.step(&mut params);
        curve.push(loss);
    }
    state.update_from(&params, &ids)?;
    Ok((state, curve))
}

/// Convenience entry: build channels from the graph, then tune one episode.
pub fn tune(
    g: &SignedGraph,
    ckpt: &Checkpoint,
    task: &PreparedTask,
    config: &TuneConfig,
) -> Result<(PromptState, Vec<f64>)> {
    config.validate()?;
    let channels = if config.sign_blind {
        build_sign_blind_channels(g, config.hops)?
    } else {
        build_channels(g, config.hops)?
    };
    let norm = normalize_channels(&channels)?;
    tune_prepared(g.features(), ckpt, &norm, task, config)
}

/// Class-0 minus class-1 prototype logit for every item.
pub fn score_items(
    e: &DenseMatrix,
    protos: &PrototypeSet,
    items: &[Item],
    tau: f64,
) -> Result<Vec<f64>> {
    if protos.num_classes() != 2 {
        return Err(SgptError::InvalidInput(format!(
            "binary scoring needs exactly 2 classes, got {}",
            protos.num_classes()
        )));
    }
    let q = item_matrix(e, protos.kind(), items)?;
    (0..q.rows())
        .map(|i| {
            let (_, scores) = predict(protos, q.row(i), tau)?;
            Ok(scores[0] - scores[1])
        })
        .collect()
}

/// Probability that a random positive item outscores a random negative
/// one, counting ties as half wins (rank-based Mann-Whitney form).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(SgptError::ShapeMismatch {
            context: "auc",
            details: format!("{} scores for {} labels", scores.len(), labels.len()),
        });
    }
    if scores.is_empty() {
        return Err(SgptError::InvalidInput("auc needs at least one score".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(SgptError::InvalidInput(format!(
            "auc scores must be finite, got {bad}"
        )));
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SgptError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = ((i + 1) + (j + 1)) as f64 / 2.0;
        for &t in &order[i..=j] {
            if labels[t] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Evaluation summary over all tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    pub std: f64,
    pub per_task: Vec<f64>,
    pub runtime_seconds: f64,
    pub config: ReportConfig,
}

/// Resolved configuration echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub tool_version: String,
    pub task: TaskKind,
    pub shots: usize,
    pub epochs: usize,
    pub lr: f64,
    pub tau: f64,
    pub hops: usize,
    pub basis: usize,
    pub d_mid: usize,
    pub task_seed: u64,
    pub init_seed: u64,
    pub sign_blind: bool,
    pub num_tasks: usize,
}

impl ReportConfig {
    pub fn new(config: &TuneConfig, num_tasks: usize) -> Self {
        Self {
            tool_version: VERSION.to_string(),
            task: config.kind,
            shots: config.shots,
            epochs: config.epochs,
            lr: config.lr,
            tau: config.tau,
            hops: config.hops,
            basis: config.basis,
            d_mid: config.d_mid,
            task_seed: config.task_seed,
            init_seed: config.init_seed,
            sign_blind: config.sign_blind,
            num_tasks,
        }
    }
}

fn summarize(per_task: &[f64]) -> (f64, f64) {
    let n = per_task.len() as f64;
    let mean = per_task.iter().sum::<f64>() / n;
    let var = per_task.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct EvalPlan {
    norm: NormalizedChannels,
    tasks: Vec<PreparedTask>,
}

fn build_task_channels(g: &SignedGraph, config: &TuneConfig) -> Result<NormalizedChannels> {
    let channels = if config.sign_blind {
        build_sign_blind_channels(g, config.hops)?
    } else {
        build_channels(g, config.hops)?
    };
    normalize_channels(&channels)
}

fn plan_eval(
    g: &SignedGraph,
    labels: Option<&BTreeMap<usize, usize>>,
    config: &TuneConfig,
    num_tasks: usize,
) -> Result<EvalPlan> {
    match config.kind {
        TaskKind::Nc => {
            let labels = labels.ok_or_else(|| {
                SgptError::InvalidInput("node classification needs node labels".into())
            })?;
            let episodes =
                sample_nc_tasks(g, labels, config.shots, num_tasks, config.task_seed)?;
            let tasks = episodes
                .iter()
                .map(|t| {
                    if t.num_classes != 2 {
                        return Err(SgptError::InvalidInput(format!(
                            "node classification supports exactly 2 classes, got {}",
                            t.num_classes
                        )));
                    }
                    Ok(PreparedTask::from_nodes(&t.support, &t.test, t.num_classes))
                })
                .collect::<Result<Vec<_>>>()?;
            let norm = build_task_channels(g, config)?;
            Ok(EvalPlan { norm, tasks })
        }
        TaskKind::Lsp => {
            let split = make_lsp_split(g, config.shots, config.task_seed)?;
            let mut pool = split.support.clone();
            pool.extend_from_slice(&split.test);
            pool.sort_unstable();
            let mp_graph = g.restrict_to(&split.mp_edges)?;
            let norm = build_task_channels(&mp_graph, config)?;
            let tasks = (0..num_tasks)
                .map(|t| {
                    let (support, test) = split_support_test(
                        &pool,
                        config.shots,
                        SupportBalance::PerClass,
                        derive_seed(config.task_seed, t as u64),
                    )?;
                    Ok(PreparedTask::from_links(&support, &test))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EvalPlan { norm, tasks })
        }
    }
}

/// Run the full few-shot benchmark: sample `num_tasks` episodes, tune a
/// fresh prompt state per episode, score its test items, and summarize the
/// ranking AUC. Channels are built once and shared across episodes; for
/// link-sign tasks they use only the message-passing edge subset.
pub fn run_eval(
    g: &SignedGraph,
    labels: Option<&BTreeMap<usize, usize>>,
    ckpt: &Checkpoint,
    config: &TuneConfig,
    num_tasks: usize,
) -> Result<EvalReport> {
    let start = Instant::now();
    config.validate()?;
    if num_tasks == 0 {
        return Err(SgptError::InvalidInput("need at least one task".into()));
    }
    if g.features().cols() == 0 {
        return Err(SgptError::InvalidInput(
            "graph has no node features; initialize them first".into(),
        ));
    }
    let plan = plan_eval(g, labels, config, num_tasks)?;
    let x = g.features();
    let mut per_task = Vec::with_capacity(num_tasks);
    for (t, task) in plan.tasks.iter().enumerate() {
        let mut task_config = config.clone();
        task_config.init_seed = derive_seed(config.init_seed, t as u64);
        let (state, _) = tune_prepared(x, ckpt, &plan.norm, task, &task_config)?;
        let e = embed(&state, ckpt, &plan.norm, x)?;
        let scores = score_items(&e, &state.prototypes, &task.test_items, config.tau)?;
        let positives: Vec<bool> = task.test_labels.iter().map(|&l| l == 0).collect();
        per_task.push(auc(&scores, &positives)?);
    }
    let (mean, std) = summarize(&per_task);
    Ok(EvalReport {
        mean,
        std,
        per_task,
        runtime_seconds: start.elapsed().as_secs_f64(),
        config: ReportConfig::new(config, num_tasks),
    })
}

/// Which hyperparameter a sweep varies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    Hops(Vec<usize>),
    Basis(Vec<usize>),
}

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: usize,
    pub mean_auc: f64,
    pub std: f64,
    pub construct_seconds: f64,
}

fn sweep_timing_graph(g: &SignedGraph, config: &TuneConfig) -> Result<SignedGraph> {
    match config.kind {
        TaskKind::Nc => g.restrict_to(&g.all_edges()),
        TaskKind::Lsp => {
            let split = make_lsp_split(g, config.shots, config.task_seed)?;
            g.restrict_to(&split.mp_edges)
        }
    }
}

/// Evaluate one axis of settings. Construction time for the hop axis is
/// the cumulative per-hop cost of a single timed build at the largest hop
/// count; the basis axis reuses one fixed-hop measurement for every row.
pub fn sweep(
    g: &SignedGraph,
    labels: Option<&BTreeMap<usize, usize>>,
    ckpt: &Checkpoint,
    base: &TuneConfig,
    axis: &SweepAxis,
    num_tasks: usize,
) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let values = match axis {
        SweepAxis::Hops(v) | SweepAxis::Basis(v) => v.clone(),
    };
    if values.is_empty() {
        return Err(SgptError::InvalidInput("sweep axis is empty".into()));
    }
    if values.contains(&0) {
        return Err(SgptError::InvalidInput("sweep values must be at least 1".into()));
    }
    let timing_graph = sweep_timing_graph(g, base)?;
    let timed = |k: usize| -> Result<Vec<HopStats>> {
        let (_, stats) = build_channels_timed(&timing_graph, k)?;
        Ok(stats)
    };
    let mut rows = Vec::with_capacity(values.len());
    match axis {
        SweepAxis::Hops(_) => {
            let max_k = *values.iter().max().expect("nonempty checked above");
            let stats = timed(max_k)?;
            for &k in &values {
                let construct_seconds: f64 = stats[..k].iter().map(|s| s.seconds).sum();
                let mut config = base.clone();
                config.hops = k;
                let report = run_eval(g, labels, ckpt, &config, num_tasks)?;
                rows.push(SweepRow {
                    axis_value: k,
                    mean_auc: report.mean,
                    std: report.std,
                    construct_seconds,
                });
            }
        }
        SweepAxis::Basis(_) => {
            let stats = timed(base.hops)?;
            let construct_seconds: f64 = stats.iter().map(|s| s.seconds).sum();
            for &r in &values {
                let mut config = base.clone();
                config.basis = r;
                let report = run_eval(g, labels, ckpt, &config, num_tasks)?;
                rows.push(SweepRow {
                    axis_value: r,
                    mean_auc: report.mean,
                    std: report.std,
                    construct_seconds,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::{init_weights, GcnConfig};
    use crate::pretrain::{run_pretrain, PretrainConfig};
    use crate::seed::rng_from;
    use crate::synth::{generate_synthetic, SyntheticSpec};
    use rand::Rng;

    fn toy_checkpoint(d_in: usize, seed: u64) -> Checkpoint {
        let config = GcnConfig::new(vec![d_in, 12, 8]).unwrap();
        let weights = init_weights(&config, seed);
        Checkpoint::new(config, weights, seed, "test".into()).unwrap()
    }

    fn toy_setup() -> (SignedGraph, Checkpoint) {
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
        (g, toy_checkpoint(6, 2))
    }

    fn toy_config(kind: TaskKind, shots: usize) -> TuneConfig {
        let mut config = TuneConfig::new(kind, shots);
        config.d_mid = 4;
        config
    }

    #[test]
    fn equal_similarities_give_ln_two() {
        let e = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let protos = PrototypeSet::new(
            TaskKind::Nc,
            DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let items = [Item::Node(0), Item::Node(1)];
        let loss = downstream_loss(&e, &protos, &items, &[0, 1], 0.1).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn one_shot_support_items_have_maximal_own_logit() {
        let (g, ckpt) = toy_setup();
        let task = PreparedTask::from_nodes(&[(0, 0), (23, 1)], &[(1, 0), (22, 1)], 2);
        let mut config = toy_config(TaskKind::Nc, 1);
        config.epochs = 0;
        let (state, curve) = tune(&g, &ckpt, &task, &config).unwrap();
        assert!(curve.is_empty());
        let channels = build_channels(&g, config.hops).unwrap();
        let norm = normalize_channels(&channels).unwrap();
        let e = embed(&state, &ckpt, &norm, g.features()).unwrap();
        for (item, &label) in task.support_items.iter().zip(&task.support_labels) {
            let q = item_matrix(&e, TaskKind::Nc, &[*item]).unwrap();
            let (best, scores) = predict(&state.prototypes, q.row(0), config.tau).unwrap();
            assert_eq!(best, label);
            let other = scores[1 - label];
            assert!(scores[label] > other, "{scores:?} vs label {label}");
        }
    }

    #[test]
    fn loss_is_nonnegative_on_random_inputs() {
        let mut rng = rng_from(3);
        for _ in 0..20 {
            let e = DenseMatrix::gaussian(6, 4, 1.0, &mut rng);
            let protos = PrototypeSet::new(
                TaskKind::Nc,
                DenseMatrix::gaussian(2, 4, 1.0, &mut rng),
                vec!["0".into(), "1".into()],
            )
            .unwrap();
            let items: Vec<Item> = (0..6).map(Item::Node).collect();
            let labels: Vec<usize> = (0..6).map(|_| rng.gen_range(0..2)).collect();
            let loss = downstream_loss(&e, &protos, &items, &labels, 0.1).unwrap();
            assert!(loss >= 0.0);
        }
    }

    #[test]
    fn loss_rejects_empty_and_mismatched_sets() {
        let e = DenseMatrix::zeros(3, 2);
        let protos = PrototypeSet::new(
            TaskKind::Nc,
            DenseMatrix::zeros(2, 2),
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        assert!(matches!(
            downstream_loss(&e, &protos, &[], &[], 0.1),
            Err(SgptError::InvalidInput(_))
        ));
        assert!(matches!(
            downstream_loss(&e, &protos, &[Item::Node(0)], &[0, 1], 0.1),
            Err(SgptError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            downstream_loss(&e, &protos, &[Item::Link(0, 1)], &[0], 0.1),
            Err(SgptError::InvalidInput(_))
        ));
    }

    #[test]
    fn auc_matches_the_fixed_example() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [false, false, true, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn auc_handles_separation_and_ties() {
        assert_eq!(
            auc(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            auc(&[5.0, 5.0, 5.0, 5.0], &[false, true, false, true]).unwrap(),
            0.5
        );
        assert_eq!(
            auc(&[4.0, 3.0, 2.0, 1.0], &[true, true, false, false]).unwrap(),
            1.0
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
    fn auc_equals_pairwise_counting_on_random_inputs() {
        let mut rng = rng_from(17);
        for case in 0..200 {
            let n = rng.gen_range(2..=60);
            let quantize = case % 2 == 0;
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let s: f64 = rng.gen_range(-2.0..2.0);
                scores.push(if quantize { (s * 4.0).round() / 4.0 } else { s });
                labels.push(rng.gen_bool(0.5));
            }
            if !labels.contains(&true) || !labels.contains(&false) {
                continue;
            }
            let fast = auc(&scores, &labels).unwrap();
            let slow = pairwise_auc(&scores, &labels);
            assert_eq!(fast.to_bits(), slow.to_bits(), "case {case}");
        }
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms() {
        let mut rng = rng_from(23);
        for _ in 0..40 {
            let n = rng.gen_range(3..=40);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.gen_range(-8i32..8) as f64) / 4.0)
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if !labels.contains(&true) || !labels.contains(&false) {
                continue;
            }
            let base = auc(&scores, &labels).unwrap();
            let affine: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
            let expo: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let cubed: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
            assert_eq!(auc(&affine, &labels).unwrap(), base);
            assert_eq!(auc(&expo, &labels).unwrap(), base);
            assert_eq!(auc(&cubed, &labels).unwrap(), base);
        }
    }

    #[test]
    fn auc_rejects_degenerate_inputs() {
        assert!(matches!(
            auc(&[1.0, 2.0], &[true, true]),
            Err(SgptError::SingleClass)
        ));
        assert!(matches!(
            auc(&[1.0], &[true, false]),
            Err(SgptError::ShapeMismatch { .. })
        ));
        assert!(matches!(auc(&[], &[]), Err(SgptError::InvalidInput(_))));
        assert!(matches!(
            auc(&[f64::NAN, 1.0], &[true, false]),
            Err(SgptError::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_epochs_returns_the_initialized_state_with_prototypes() {
        let (g, ckpt) = toy_setup();
        let edges = g.all_edges();
        let task = PreparedTask::from_links(&edges[..6], &edges[6..]);
        let mut config = toy_config(TaskKind::Lsp, 6);
        config.epochs = 0;
        let (state, curve) = tune(&g, &ckpt, &task, &config).unwrap();
        assert!(curve.is_empty());
        let dims = PromptDims::new(6, 8, config.hops, config.basis, config.d_mid).unwrap();
        let fresh = init_prompt_state(&dims, TaskKind::Lsp, config.init_seed);
        assert_eq!(state.feature.pos.bases, fresh.feature.pos.bases);
        assert_eq!(state.adapter.w_down, fresh.adapter.w_down);
        assert_eq!(state.hops.w_pos, fresh.hops.w_pos);
        assert_eq!(state.prototypes.num_classes(), 2);
        assert_eq!(state.prototypes.width(), 16);
    }

    #[test]
    fn tuning_decreases_the_support_loss() {
        let (g, ckpt) = toy_setup();
        let edges = g.all_edges();
        let split = make_lsp_split(&g, 10, 4).unwrap();
        assert!(edges.len() > 20);
        let task = PreparedTask::from_links(&split.support, &split.test);
        let mut config = toy_config(TaskKind::Lsp, 10);
        config.epochs = 60;
        let mp = g.restrict_to(&split.mp_edges).unwrap();
        let channels = build_channels(&mp, config.hops).unwrap();
        let norm = normalize_channels(&channels).unwrap();
        let (_, curve) = tune_prepared(g.features(), &ckpt, &norm, &task, &config).unwrap();
        assert_eq!(curve.len(), 60);
        let head: f64 = curve[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = curve[55..].iter().sum::<f64>() / 5.0;
        assert!(tail < head, "loss went from {head} to {tail}");
        assert!(curve.iter().all(|l| l.is_finite() && *l >= 0.0));
    }

    #[test]
    fn tuning_leaves_the_backbone_bitwise_unchanged() {
        let (g, ckpt) = toy_setup();
        let before: Vec<Vec<u64>> = ckpt
            .weights()
            .iter()
            .map(|w| w.data().iter().map(|v| v.to_bits()).collect())
            .collect();
        let edges = g.all_edges();
        let task = PreparedTask::from_links(&edges[..8], &edges[8..]);
        let mut config = toy_config(TaskKind::Lsp, 8);
        config.epochs = 5;
        tune(&g, &ckpt, &task, &config).unwrap();
        let after: Vec<Vec<u64>> = ckpt
            .weights()
            .iter()
            .map(|w| w.data().iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn evaluation_is_deterministic_and_consistent() {
        let (g, ckpt) = toy_setup();
        let mut config = toy_config(TaskKind::Lsp, 8);
        config.epochs = 3;
        config.task_seed = 21;
        config.init_seed = 33;
        let a = run_eval(&g, None, &ckpt, &config, 4).unwrap();
        let b = run_eval(&g, None, &ckpt, &config, 4).unwrap();
        assert_eq!(a.per_task.len(), 4);
        let bits = |xs: &[f64]| xs.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.per_task), bits(&b.per_task));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let (mean, std) = summarize(&a.per_task);
        assert!((a.mean - mean).abs() < 1e-15);
        assert!((a.std - std).abs() < 1e-15);
        assert_eq!(a.config.num_tasks, 4);
        assert_eq!(a.config.task, TaskKind::Lsp);
        assert_eq!(a.config.tool_version, VERSION);
    }

    #[test]
    fn single_task_eval_matches_a_manual_tune_and_auc() {
        let (g, ckpt) = toy_setup();
        let mut config = toy_config(TaskKind::Lsp, 8);
        config.epochs = 2;
        config.task_seed = 19;
        let report = run_eval(&g, None, &ckpt, &config, 1).unwrap();
        assert_eq!(report.per_task.len(), 1);
        assert_eq!(report.mean.to_bits(), report.per_task[0].to_bits());
        assert_eq!(report.std, 0.0);

        let split = make_lsp_split(&g, config.shots, config.task_seed).unwrap();
        let mut pool = split.support.clone();
        pool.extend_from_slice(&split.test);
        pool.sort_unstable();
        let (support, test) = split_support_test(
            &pool,
            config.shots,
            SupportBalance::PerClass,
            derive_seed(config.task_seed, 0),
        )
        .unwrap();
        let task = PreparedTask::from_links(&support, &test);
        let mp = g.restrict_to(&split.mp_edges).unwrap();
        let channels = build_channels(&mp, config.hops).unwrap();
        let norm = normalize_channels(&channels).unwrap();
        let mut task_config = config.clone();
        task_config.init_seed = derive_seed(config.init_seed, 0);
        let (state, _) = tune_prepared(g.features(), &ckpt, &norm, &task, &task_config).unwrap();
        let e = embed(&state, &ckpt, &norm, g.features()).unwrap();
        let scores = score_items(&e, &state.prototypes, &task.test_items, config.tau).unwrap();
        let positives: Vec<bool> = task.test_labels.iter().map(|&l| l == 0).collect();
        let manual = auc(&scores, &positives).unwrap();
        assert_eq!(report.per_task[0].to_bits(), manual.to_bits());
    }

    #[test]
    fn nc_eval_requires_labels_and_two_classes() {
        let (g, ckpt) = toy_setup();
        let config = toy_config(TaskKind::Nc, 1);
        assert!(matches!(
            run_eval(&g, None, &ckpt, &config, 1),
            Err(SgptError::InvalidInput(_))
        ));
        let labels: BTreeMap<usize, usize> =
            (0..g.num_nodes()).map(|i| (i, i % 3)).collect();
        assert!(matches!(
            run_eval(&g, Some(&labels), &ckpt, &config, 1),
            Err(SgptError::InvalidInput(_))
        ));
    }

    #[test]
    fn nc_eval_runs_end_to_end() {
        let (g, ckpt) = toy_setup();
        let labels: BTreeMap<usize, usize> =
            (0..g.num_nodes()).map(|i| (i, usize::from(i >= 12))).collect();
        let mut config = toy_config(TaskKind::Nc, 2);
        config.epochs = 2;
        let report = run_eval(&g, Some(&labels), &ckpt, &config, 3).unwrap();
        assert_eq!(report.per_task.len(), 3);
        assert!(report.per_task.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn eval_rejects_zero_tasks_and_missing_features() {
        let (g, ckpt) = toy_setup();
        let config = toy_config(TaskKind::Lsp, 4);
        assert!(matches!(
            run_eval(&g, None, &ckpt, &config, 0),
            Err(SgptError::InvalidInput(_))
        ));
        let bare = SignedGraph::from_edges(4, [(0, 1)], [(1, 2)]).unwrap();
        assert!(matches!(
            run_eval(&bare, None, &ckpt, &config, 1),
            Err(SgptError::InvalidInput(_))
        ));
    }

    #[test]
    fn sweep_emits_one_row_per_axis_value() {
        let (g, ckpt) = toy_setup();
        let mut base = toy_config(TaskKind::Lsp, 6);
        base.epochs = 1;
        let rows = sweep(&g, None, &ckpt, &base, &SweepAxis::Hops(vec![1, 2]), 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].axis_value, 1);
        assert_eq!(rows[1].axis_value, 2);
        assert!(rows[0].construct_seconds <= rows[1].construct_seconds);
        assert!(rows.iter().all(|r| r.mean_auc.is_finite()));

        let rows = sweep(&g, None, &ckpt, &base, &SweepAxis::Basis(vec![1, 2, 3]), 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].construct_seconds, rows[1].construct_seconds);
        assert!(rows.iter().all(|r| r.mean_auc.is_finite()));
        assert!(matches!(
            sweep(&g, None, &ckpt, &base, &SweepAxis::Hops(vec![]), 1),
            Err(SgptError::InvalidInput(_))
        ));
    }

    #[test]
    fn pretrained_backbone_feeds_the_harness() {
        let (g, _) = toy_setup();
        let gcn = GcnConfig::new(vec![6, 12, 8]).unwrap();
        let mut pre = PretrainConfig::new(7);
        pre.epochs = 3;
        let (ckpt, losses) =
            run_pretrain(&g.unsigned_view(), g.features(), &gcn, &pre, |_, _| {}).unwrap();
        assert_eq!(losses.len(), 3);
        let mut config = toy_config(TaskKind::Lsp, 6);
        config.epochs = 2;
        let report = run_eval(&g, None, &ckpt, &config, 2).unwrap();
        assert_eq!(report.per_task.len(), 2);
    }
}
