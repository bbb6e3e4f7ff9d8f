//! Command-line front end: backbone pretraining, channel compilation,
//! prompt tuning, few-shot evaluation, hyperparameter sweeps, and
//! synthetic-graph generation.
//!
//! Configuration precedence is flags over config file over defaults. The
//! config file is flat `key = value` text (keys are the flag names with
//! underscores); unknown keys are rejected. Structured `key=value` records
//! go to standard error; machine output goes to files or standard output
//! only. Every written artifact carries the resolved configuration and the
//! tool version, either in its own metadata block or as leading `#`
//! comment lines.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use sgpt::gcn::{Checkpoint, GcnConfig};
use sgpt::graph::{
    load_node_labels, load_signed_graph, make_lsp_split, sample_nc_tasks, SignedGraph,
};
use sgpt::pretrain::{run_pretrain, PretrainConfig};
use sgpt::prompt::normalize_channels;
use sgpt::seed::derive_seed;
use sgpt::sparse::SparseBinaryMatrix;
use sgpt::synth::{generate_synthetic, trust_network, SyntheticSpec};
use sgpt::template::{
    build_channels, build_channels_timed, build_sign_blind_channels, TaskKind,
};
use sgpt::tune::{run_eval, sweep, tune_prepared, PreparedTask, SweepAxis, TuneConfig};
use sgpt::{Result, SgptError, VERSION};

#[derive(Parser)]
#[command(name = "sgpt", version, about = "Signed-graph prompt-tuning pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the backbone by masked link prediction
    Pretrain(PretrainArgs),
    /// Compile semantic channels and dump them with per-hop timings
    Template(TemplateArgs),
    /// Tune a prompt state on a single few-shot episode
    Tune(TuneArgs),
    /// Run the few-shot benchmark over many episodes
    Eval(EvalArgs),
    /// Evaluate along a hop-count or basis-count axis
    Sweep(SweepArgs),
    /// Generate a synthetic signed graph
    Synth(SynthArgs),
}

#[derive(Args)]
struct PretrainArgs {
    /// Flat `key = value` config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canonical edge-list file
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Node feature width
    #[arg(long)]
    din: Option<usize>,
    /// Seed for the deterministic node features
    #[arg(long)]
    feature_seed: Option<u64>,
    /// Master random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of edges masked as prediction targets
    #[arg(long)]
    mask: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Negative triplets sampled per masked edge
    #[arg(long)]
    per_edge: Option<usize>,
    /// Checkpoint output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss-curve CSV path (standard output when omitted)
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    hops: Option<usize>,
    /// Directory receiving the channel matrices and timing report
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Pre-trained checkpoint path
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Node-label sidecar, required for task nc
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Task kind: nc or lsp
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    dmid: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    din: Option<usize>,
    #[arg(long)]
    feature_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the signed channels with unsigned copies (ablation)
    #[arg(long)]
    sign_blind: bool,
    /// Tuned prompt-state output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss-curve CSV path (standard output when omitted)
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Optional JSON export of the episode's edge split (lsp only)
    #[arg(long)]
    split_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Task kind: nc or lsp
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    dmid: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    din: Option<usize>,
    #[arg(long)]
    feature_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of evaluation episodes
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    sign_blind: bool,
    /// Report JSON path (standard output when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Task kind: nc or lsp
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    dmid: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    din: Option<usize>,
    #[arg(long)]
    feature_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    sign_blind: bool,
    /// Swept hyperparameter: hops or basis
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated axis values, e.g. 1,2,3
    #[arg(long)]
    values: Option<String>,
    /// Sweep CSV path (standard output when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator: communities or trust
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Intra-community positive edge probability (communities model)
    #[arg(long)]
    intra: Option<f64>,
    /// Inter-community negative edge probability (communities model)
    #[arg(long)]
    inter: Option<f64>,
    /// Sign flip probability (communities model)
    #[arg(long)]
    noise: Option<f64>,
    /// Exact positive edge count (trust model)
    #[arg(long)]
    pos: Option<usize>,
    /// Exact negative edge count (trust model)
    #[arg(long)]
    neg: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Edge-list output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Node-label sidecar output path (communities model)
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

/// Merges config-file entries with flags, tracking every resolved value
/// for logging and artifact embedding and rejecting unknown file keys.
struct Resolver {
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    fn new(config: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = config {
            let text = fs::read_to_string(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(SgptError::Parse {
                        line: idx + 1,
                        message: format!("expected `key = value`, found {line:?}"),
                    });
                };
                let key = key.trim().to_string();
                if file
                    .insert(key.clone(), value.trim().to_string())
                    .is_some()
                {
                    return Err(SgptError::Parse {
                        line: idx + 1,
                        message: format!("duplicate key `{key}`"),
                    });
                }
            }
        }
        Ok(Self {
            file,
            resolved: Vec::new(),
        })
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.file.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                SgptError::InvalidInput(format!("invalid value {raw:?} for key `{key}`"))
            }),
        }
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => {
                self.file.remove(key);
                v
            }
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        let v = match flag {
            Some(v) => {
                self.file.remove(key);
                v
            }
            None => self.file_value(key)?.ok_or_else(|| {
                SgptError::InvalidInput(format!("missing required key `{key}`"))
            })?,
        };
        self.record(key, &v);
        Ok(v)
    }

    fn get_bool(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = if flag {
            self.file.remove(key);
            true
        } else {
            self.file_value::<bool>(key)?.unwrap_or(false)
        };
        self.record(key, v);
        Ok(v)
    }

    fn path_opt(&mut self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        let v = match flag {
            Some(p) => {
                self.file.remove(key);
                Some(p)
            }
            None => self.file.remove(key).map(PathBuf::from),
        };
        if let Some(p) = &v {
            self.record(key, p.display());
        }
        v
    }

    fn path_require(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path_opt(key, flag)
            .ok_or_else(|| SgptError::InvalidInput(format!("missing required key `{key}`")))
    }

    fn task(&mut self, flag: Option<String>) -> Result<TaskKind> {
        self.require::<String>("task", flag)?.parse()
    }

    fn finish(self) -> Result<Vec<(String, String)>> {
        if let Some(key) = self.file.keys().next() {
            return Err(SgptError::InvalidInput(format!(
                "unknown configuration key `{key}`"
            )));
        }
        Ok(self.resolved)
    }
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.chars().any(char::is_whitespace) {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

fn log_config(command: &str, pairs: &[(String, String)]) {
    let mut line = format!("command={command} tool_version={VERSION}");
    for (k, v) in pairs {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(&quote(v));
    }
    eprintln!("{line}");
}

fn artifact_header(command: &str, pairs: &[(String, String)]) -> String {
    let mut text = format!("# tool_version={VERSION} command={command}\n");
    for (k, v) in pairs {
        text.push_str(&format!("# {k}={}\n", quote(v)));
    }
    text
}

fn config_object(pairs: &[(String, String)]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (k, v) in pairs {
        map.insert(k.clone(), serde_json::Value::String(v.clone()));
    }
    serde_json::Value::Object(map)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json_err(e: serde_json::Error) -> SgptError {
    SgptError::InvalidInput(e.to_string())
}

fn load_featured_graph(path: &Path, din: usize, feature_seed: u64) -> Result<SignedGraph> {
    load_signed_graph(path, None)?.init_features(din, feature_seed)
}

fn check_din(ckpt: &Checkpoint, din: usize) -> Result<()> {
    if ckpt.config().d_in() != din {
        return Err(SgptError::InvalidInput(format!(
            "checkpoint expects feature width {} but din is {din}",
            ckpt.config().d_in()
        )));
    }
    Ok(())
}

fn curve_csv(command: &str, pairs: &[(String, String)], losses: &[f64]) -> String {
    let mut csv = artifact_header(command, pairs);
    csv.push_str("epoch,loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        csv.push_str(&format!("{epoch},{loss}\n"));
    }
    csv
}

fn cmd_pretrain(args: PretrainArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let graph_path = r.path_require("graph", args.graph)?;
    let out = r.path_require("out", args.out)?;
    let din = r.get("din", args.din, 64)?;
    let feature_seed = r.get("feature_seed", args.feature_seed, 0)?;
    let seed = r.get("seed", args.seed, 0)?;
    let mask = r.get("mask", args.mask, 0.15)?;
    let epochs = r.get("epochs", args.epochs, 200)?;
    let lr = r.get("lr", args.lr, 1e-3)?;
    let tau = r.get("tau", args.tau, 0.1)?;
    let per_edge = r.get("per_edge", args.per_edge, 1)?;
    let curve = r.path_opt("curve", args.curve);
    let resolved = r.finish()?;
    log_config("pretrain", &resolved);

    let g = load_featured_graph(&graph_path, din, feature_seed)?;
    let gcn = GcnConfig::default_dims(din)?;
    let mut config = PretrainConfig::new(seed);
    config.mask_fraction = mask;
    config.epochs = epochs;
    config.lr = lr;
    config.tau = tau;
    config.per_edge = per_edge;
    let (ckpt, losses) = run_pretrain(
        &g.unsigned_view(),
        g.features(),
        &gcn,
        &config,
        |epoch, loss| eprintln!("epoch={epoch} loss={loss}"),
    )?;
    ckpt.save(&out)?;
    write_text(curve.as_deref(), &curve_csv("pretrain", &resolved, &losses))?;
    eprintln!(
        "checkpoint={} epochs={} final_loss={}",
        out.display(),
        losses.len(),
        losses.last().map_or("none".into(), f64::to_string)
    );
    Ok(())
}

fn write_matrix(path: &Path, m: &SparseBinaryMatrix) -> Result<()> {
    let mut file = fs::File::create(path)?;
    m.write_triplets(&mut file)
}

fn cmd_template(args: TemplateArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let graph_path = r.path_require("graph", args.graph)?;
    let hops = r.get("hops", args.hops, 2)?;
    let out_dir = r.path_require("out_dir", args.out_dir)?;
    let resolved = r.finish()?;
    log_config("template", &resolved);

    let g = load_signed_graph(&graph_path, None)?;
    let (channels, stats) = build_channels_timed(&g, hops)?;
    fs::create_dir_all(&out_dir)?;
    for (i, m) in channels.pos().iter().enumerate() {
        write_matrix(&out_dir.join(format!("pos_hop{}.txt", i + 1)), m)?;
    }
    for (i, m) in channels.neg().iter().enumerate() {
        write_matrix(&out_dir.join(format!("neg_hop{}.txt", i + 1)), m)?;
    }
    write_matrix(&out_dir.join("topo.txt"), channels.topo())?;

    let mut csv = artifact_header("template", &resolved);
    csv.push_str("hop,seconds,nnz\n");
    for s in &stats {
        csv.push_str(&format!("{},{},{}\n", s.hop, s.seconds, s.nnz));
    }
    fs::write(out_dir.join("timing.csv"), csv)?;

    let meta = serde_json::json!({
        "tool_version": VERSION,
        "config": config_object(&resolved),
    });
    fs::write(
        out_dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).map_err(json_err)?,
    )?;
    for s in &stats {
        eprintln!("hop={} seconds={} nnz={}", s.hop, s.seconds, s.nnz);
    }
    eprintln!("out_dir={}", out_dir.display());
    Ok(())
}

struct TaskSettings {
    config: TuneConfig,
    din: usize,
    feature_seed: u64,
    graph_path: PathBuf,
    ckpt_path: PathBuf,
    labels_path: Option<PathBuf>,
}

fn resolve_task_settings(
    r: &mut Resolver,
    graph: Option<PathBuf>,
    ckpt: Option<PathBuf>,
    labels: Option<PathBuf>,
    task: Option<String>,
    shots: Option<usize>,
    hops: Option<usize>,
    basis: Option<usize>,
    tau: Option<f64>,
    dmid: Option<usize>,
    epochs: Option<usize>,
    lr: Option<f64>,
    din: Option<usize>,
    feature_seed: Option<u64>,
    seed: Option<u64>,
    sign_blind: bool,
) -> Result<TaskSettings> {
    let graph_path = r.path_require("graph", graph)?;
    let ckpt_path = r.path_require("ckpt", ckpt)?;
    let labels_path = r.path_opt("labels", labels);
    let kind = r.task(task)?;
    let shots = r.require("shots", shots)?;
    let mut config = TuneConfig::new(kind, shots);
    config.hops = r.get("hops", hops, config.hops)?;
    config.basis = r.get("basis", basis, config.basis)?;
    config.tau = r.get("tau", tau, config.tau)?;
    config.d_mid = r.get("dmid", dmid, config.d_mid)?;
    config.epochs = r.get("epochs", epochs, config.epochs)?;
    config.lr = r.get("lr", lr, config.lr)?;
    let din = r.get("din", din, 64)?;
    let feature_seed = r.get("feature_seed", feature_seed, 0)?;
    let seed = r.get("seed", seed, 0)?;
    config.task_seed = derive_seed(seed, 0);
    config.init_seed = derive_seed(seed, 1);
    config.sign_blind = r.get_bool("sign_blind", sign_blind)?;
    Ok(TaskSettings {
        config,
        din,
        feature_seed,
        graph_path,
        ckpt_path,
        labels_path,
    })
}

fn load_task_labels(
    settings: &TaskSettings,
) -> Result<Option<BTreeMap<usize, usize>>> {
    match settings.config.kind {
        TaskKind::Nc => {
            let path = settings.labels_path.as_ref().ok_or_else(|| {
                SgptError::InvalidInput("missing required key `labels` for task nc".into())
            })?;
            Ok(Some(load_node_labels(path)?))
        }
        TaskKind::Lsp => Ok(None),
    }
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let settings = resolve_task_settings(
        &mut r,
        args.graph,
        args.ckpt,
        args.labels,
        args.task,
        args.shots,
        args.hops,
        args.basis,
        args.tau,
        args.dmid,
        args.epochs,
        args.lr,
        args.din,
        args.feature_seed,
        args.seed,
        args.sign_blind,
    )?;
    let out = r.path_require("out", args.out)?;
    let curve = r.path_opt("curve", args.curve);
    let split_out = r.path_opt("split_out", args.split_out);
    let resolved = r.finish()?;
    log_config("tune", &resolved);

    let g = load_featured_graph(&settings.graph_path, settings.din, settings.feature_seed)?;
    let ckpt = Checkpoint::load(&settings.ckpt_path)?;
    check_din(&ckpt, settings.din)?;
    let config = &settings.config;
    let labels = load_task_labels(&settings)?;

    let (channel_graph, episode) = match config.kind {
        TaskKind::Lsp => {
            let split = make_lsp_split(&g, config.shots, config.task_seed)?;
            if let Some(p) = &split_out {
                fs::write(p, split.to_json_string()?)?;
            }
            let episode = PreparedTask::from_links(&split.support, &split.test);
            (g.restrict_to(&split.mp_edges)?, episode)
        }
        TaskKind::Nc => {
            if split_out.is_some() {
                return Err(SgptError::InvalidInput(
                    "split_out applies to task lsp only".into(),
                ));
            }
            let labels = labels.as_ref().expect("labels loaded for nc above");
            let tasks = sample_nc_tasks(&g, labels, config.shots, 1, config.task_seed)?;
            let t = &tasks[0];
            if t.num_classes != 2 {
                return Err(SgptError::InvalidInput(format!(
                    "node classification supports exactly 2 classes, got {}",
                    t.num_classes
                )));
            }
            let episode = PreparedTask::from_nodes(&t.support, &t.test, t.num_classes);
            (g.restrict_to(&g.all_edges())?, episode)
        }
    };
    let channels = if config.sign_blind {
        build_sign_blind_channels(&channel_graph, config.hops)?
    } else {
        build_channels(&channel_graph, config.hops)?
    };
    let norm = normalize_channels(&channels)?;
    let (state, losses) = tune_prepared(g.features(), &ckpt, &norm, &episode, config)?;
    state.save(&out)?;
    for (epoch, loss) in losses.iter().enumerate() {
        eprintln!("epoch={epoch} loss={loss}");
    }
    write_text(curve.as_deref(), &curve_csv("tune", &resolved, &losses))?;
    eprintln!(
        "state={} final_loss={}",
        out.display(),
        losses.last().map_or("none".into(), f64::to_string)
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let settings = resolve_task_settings(
        &mut r,
        args.graph,
        args.ckpt,
        args.labels,
        args.task,
        args.shots,
        args.hops,
        args.basis,
        args.tau,
        args.dmid,
        args.epochs,
        args.lr,
        args.din,
        args.feature_seed,
        args.seed,
        args.sign_blind,
    )?;
    let tasks = r.get("tasks", args.tasks, 100)?;
    let out = r.path_opt("out", args.out);
    let resolved = r.finish()?;
    log_config("eval", &resolved);

    let g = load_featured_graph(&settings.graph_path, settings.din, settings.feature_seed)?;
    let ckpt = Checkpoint::load(&settings.ckpt_path)?;
    check_din(&ckpt, settings.din)?;
    let labels = load_task_labels(&settings)?;
    let report = run_eval(&g, labels.as_ref(), &ckpt, &settings.config, tasks)?;

    let mut value = serde_json::to_value(&report).map_err(json_err)?;
    if let Some(serde_json::Value::Object(map)) = value.get_mut("config") {
        for (k, v) in &resolved {
            map.entry(k.clone())
                .or_insert_with(|| serde_json::Value::String(v.clone()));
        }
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(json_err)?;
    text.push('\n');
    write_text(out.as_deref(), &text)?;
    eprintln!(
        "mean={} std={} tasks={} runtime_seconds={}",
        report.mean, report.std, tasks, report.runtime_seconds
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let settings = resolve_task_settings(
        &mut r,
        args.graph,
        args.ckpt,
        args.labels,
        args.task,
        args.shots,
        args.hops,
        args.basis,
        args.tau,
        args.dmid,
        args.epochs,
        args.lr,
        args.din,
        args.feature_seed,
        args.seed,
        args.sign_blind,
    )?;
    let tasks = r.get("tasks", args.tasks, 100)?;
    let axis_name = r.require::<String>("axis", args.axis)?;
    let default_values = match axis_name.as_str() {
        "hops" => "1,2,3,4",
        "basis" => "1,2,3,4,5,6,7,8,9,10",
        other => {
            return Err(SgptError::InvalidInput(format!(
                "unknown axis {other:?}, expected hops or basis"
            )))
        }
    };
    let values_raw = r.get("values", args.values, default_values.to_string())?;
    let values = values_raw
        .split(',')
        .map(|s| {
            s.trim().parse::<usize>().map_err(|_| {
                SgptError::InvalidInput(format!("invalid axis value {:?}", s.trim()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let axis = match axis_name.as_str() {
        "hops" => SweepAxis::Hops(values),
        _ => SweepAxis::Basis(values),
    };
    let out = r.path_opt("out", args.out);
    let resolved = r.finish()?;
    log_config("sweep", &resolved);

    let g = load_featured_graph(&settings.graph_path, settings.din, settings.feature_seed)?;
    let ckpt = Checkpoint::load(&settings.ckpt_path)?;
    check_din(&ckpt, settings.din)?;
    let labels = load_task_labels(&settings)?;
    let rows = sweep(&g, labels.as_ref(), &ckpt, &settings.config, &axis, tasks)?;

    let mut csv = artifact_header("sweep", &resolved);
    csv.push_str("axis_value,mean_auc,std,construct_seconds\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.axis_value, row.mean_auc, row.std, row.construct_seconds
        ));
        eprintln!(
            "axis_value={} mean_auc={} std={} construct_seconds={}",
            row.axis_value, row.mean_auc, row.std, row.construct_seconds
        );
    }
    write_text(out.as_deref(), &csv)?;
    Ok(())
}

fn write_graph_artifact(
    path: &Path,
    g: &SignedGraph,
    resolved: &[(String, String)],
) -> Result<()> {
    let mut text = artifact_header("synth", resolved);
    text.push_str(&format!("#nodes={}\n", g.num_nodes()));
    for (u, v, s) in g.all_edges() {
        text.push_str(&format!("{u},{v},{s:+}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let model = r.get("model", args.model, "communities".to_string())?;
    let out = r.path_require("out", args.out)?;
    let seed = r.get("seed", args.seed, 0)?;
    let g = match model.as_str() {
        "communities" => {
            let nodes = r.require("nodes", args.nodes)?;
            let intra = r.get("intra", args.intra, 0.2)?;
            let inter = r.get("inter", args.inter, 0.2)?;
            let noise = r.get("noise", args.noise, 0.05)?;
            let labels_out = r.path_opt("labels_out", args.labels_out);
            let resolved = r.finish()?;
            log_config("synth", &resolved);
            let spec = SyntheticSpec {
                num_nodes: nodes,
                num_communities: 2,
                intra_pos_prob: intra,
                inter_neg_prob: inter,
                noise_flip_prob: noise,
                seed,
            };
            let (g, labels) = generate_synthetic(&spec)?;
            write_graph_artifact(&out, &g, &resolved)?;
            if let Some(p) = labels_out {
                let mut text = artifact_header("synth", &resolved);
                for (node, class) in labels.iter().enumerate() {
                    text.push_str(&format!("{node},{class}\n"));
                }
                fs::write(p, text)?;
            }
            g
        }
        "trust" => {
            let nodes = r.require("nodes", args.nodes)?;
            let pos = r.require("pos", args.pos)?;
            let neg = r.require("neg", args.neg)?;
            let resolved = r.finish()?;
            log_config("synth", &resolved);
            let g = trust_network(nodes, pos, neg, seed)?;
            write_graph_artifact(&out, &g, &resolved)?;
            g
        }
        other => {
            return Err(SgptError::InvalidInput(format!(
                "unknown model {other:?}, expected communities or trust"
            )))
        }
    };
    eprintln!(
        "out={} nodes={} pos_edges={} neg_edges={}",
        out.display(),
        g.num_nodes(),
        g.pos_edges().len(),
        g.neg_edges().len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Template(a) => cmd_template(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
