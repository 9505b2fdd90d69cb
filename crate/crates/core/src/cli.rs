//! Command-line entry point.
//!
//! Configuration is layered: built-in defaults, then the `--config` file,
//! then `--section.key value` flags, then the `--seed` and `--output-dir`
//! shorthands.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use crate::config::{RunConfig, KEYS};
use crate::dataset::{load_dataset, split_dataset, InteractionDataset, Memberships, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::eval::harness::{
    perturbation_to_csv, records_to_csv, run_ablation_suite, run_perturbation, run_sweep, summarize, sweep_to_csv,
    MetricsRecord,
};
use crate::eval::{evaluate, RankingMetrics};
use crate::model::EmbeddingState;
use crate::refine::PropagationGraphs;
use crate::trainer::{fit_with_graphs, log_to_jsonl};

pub const SPLIT_FILE: &str = "split.txt";
pub const STATS_FILE: &str = "stats.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const PERTURB_FILE: &str = "perturb.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("preprocess", "split the memberships and cache the propagation operators"),
    ("train", "train one model for --seed"),
    ("evaluate", "evaluate every trained seed on the test split"),
    ("ablate", "train and evaluate every ablation variant"),
    ("perturb", "compare reweighting on and off under user-item noise"),
    ("sweep", "one-factor hyperparameter sweeps"),
];

pub fn command() -> Command {
    let mut cmd = Command::new("direc")
        .about("Dual-intent group recommendation")
        .subcommand_required(true)
        .args_override_self(true)
        .arg_required_else_help(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("key = value config file"))
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_name("N")
                .value_parser(clap::value_parser!(u64))
                .help("training seed"),
        )
        .arg(Arg::new("output-dir").long("output-dir").global(true).value_name("DIR").help("artifact directory"))
        .arg(
            Arg::new("force").long("force").global(true).action(ArgAction::SetTrue).help("overwrite existing outputs"),
        );
    for &(key, help) in KEYS {
        cmd = cmd.arg(Arg::new(key).long(key).global(true).value_name("VALUE").help(help).hide_short_help(true));
    }
    for &(name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about));
    }
    cmd
}

/// Resolves the layered configuration from parsed arguments.
pub fn resolve_config(matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        cfg.apply_file(Path::new(path))?;
    }
    for &(key, _) in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    if let Some(&seed) = matches.get_one::<u64>("seed") {
        cfg.train.seed = seed;
    }
    if let Some(dir) = matches.get_one::<String>("output-dir") {
        cfg.output_dir = PathBuf::from(dir);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = resolve_config(&matches)?;
    let force = matches.get_flag("force");
    match matches.subcommand_name() {
        Some("preprocess") => cmd_preprocess(&cfg, force),
        Some("train") => cmd_train(&cfg, force),
        Some("evaluate") => cmd_evaluate(&cfg, force),
        Some("ablate") => cmd_ablate(&cfg, force),
        Some("perturb") => cmd_perturb(&cfg, force),
        Some("sweep") => cmd_sweep(&cfg, force),
        _ => Err(Error::Config("missing subcommand".into())),
    }
}

fn guard(paths: &[PathBuf], force: bool) -> Result<()> {
    match paths.iter().find(|p| p.exists()) {
        Some(p) if !force => Err(Error::Exists(p.clone())),
        _ => Ok(()),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn load_data(cfg: &RunConfig) -> Result<InteractionDataset> {
    let dir = cfg.data_dir.as_ref().ok_or_else(|| Error::Config("data.dir is not set".into()))?;
    load_dataset(dir)
}

/// The split cached by `preprocess` when present, otherwise a fresh one.
fn load_split(cfg: &RunConfig, ds: &InteractionDataset) -> Result<SplitAssignment> {
    let cached = cfg.output_dir.join(SPLIT_FILE);
    if cached.exists() {
        SplitAssignment::load(&cached, ds.user_group().len(), cfg.split_seed)
    } else {
        Ok(split_dataset(ds, cfg.split_seed))
    }
}

fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.output_dir.join(format!("seed-{seed}"))
}

pub fn cmd_preprocess(cfg: &RunConfig, force: bool) -> Result<()> {
    let ds = load_data(cfg)?;
    let out = &cfg.output_dir;
    let files =
        [SPLIT_FILE, STATS_FILE, "social_operator.txt", "ui_operator.txt", "gi_operator.txt"].map(|f| out.join(f));
    guard(&files, force)?;
    let split = split_dataset(&ds, cfg.split_seed);
    let graphs = PropagationGraphs::build(&ds, &split, &cfg.variant_model().graph_options());
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    split.save(&files[0], ds.user_group().len())?;
    write(&files[1], &(serde_json::to_string_pretty(&ds.stats())? + "\n"))?;
    graphs.social.save(&files[2])?;
    graphs.user_item.save(&files[3])?;
    graphs.group_item.save(&files[4])?;
    eprintln!("preprocess: wrote {} files to {}", files.len(), out.display());
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<()> {
    let ds = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let model = cfg.variant_model();
    let dir = seed_dir(cfg, cfg.train.seed);
    let files = [TRAIN_LOG_FILE, CHECKPOINT_FILE, CONFIG_FILE].map(|f| dir.join(f));
    guard(&files, force)?;
    let graphs = PropagationGraphs::build(&ds, &split, &model.graph_options());
    let mem = Memberships::new(&ds, &split);
    let fit = fit_with_graphs(&graphs, &mem, &model, &cfg.train)?;
    write(&files[0], &log_to_jsonl(&fit.log)?)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    fit.state.save(&files[1])?;
    write(&files[2], &cfg.to_text())?;
    eprintln!(
        "train: seed {} ran {} epochs, best epoch {} (valid recall@10 {})",
        cfg.train.seed,
        fit.epochs_run,
        fit.best_epoch,
        fit.best_valid_recall.map_or("n/a".into(), |r| format!("{r:.4}"))
    );
    Ok(())
}

fn trained_seeds(cfg: &RunConfig) -> Result<Vec<u64>> {
    let entries = fs::read_dir(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut seeds = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&cfg.output_dir, e))?;
        let name = entry.file_name();
        if let Some(seed) = name.to_str().and_then(|n| n.strip_prefix("seed-")).and_then(|s| s.parse::<u64>().ok()) {
            if entry.path().join(CHECKPOINT_FILE).exists() {
                seeds.push(seed);
            }
        }
    }
    seeds.sort_unstable();
    if seeds.is_empty() {
        return Err(Error::Config(format!("no seed-*/{CHECKPOINT_FILE} under {}", cfg.output_dir.display())));
    }
    Ok(seeds)
}

fn metrics_json(m: &RankingMetrics) -> serde_json::Value {
    let r = MetricsRecord::new("", 0, Split::Test, m);
    json!({
        "recall@5": r.recall_5, "recall@10": r.recall_10, "recall@20": r.recall_20,
        "ndcg@5": r.ndcg_5, "ndcg@10": r.ndcg_10, "ndcg@20": r.ndcg_20,
    })
}

pub fn cmd_evaluate(cfg: &RunConfig, force: bool) -> Result<()> {
    let ds = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let model = cfg.variant_model();
    let seeds = trained_seeds(cfg)?;
    let mut files: Vec<PathBuf> = seeds.iter().map(|&s| seed_dir(cfg, s).join(METRICS_FILE)).collect();
    files.push(cfg.output_dir.join(SUMMARY_FILE));
    guard(&files, force)?;

    let graphs = PropagationGraphs::build(&ds, &split, &model.graph_options());
    let mem = Memberships::new(&ds, &split);
    let mut runs = Vec::new();
    for (&seed, path) in seeds.iter().zip(&files) {
        let state = EmbeddingState::load(&seed_dir(cfg, seed).join(CHECKPOINT_FILE))?;
        let m = evaluate(&state, &graphs, &model, &mem, Split::Test)?;
        let record = MetricsRecord::new(cfg.variant.key(), seed, Split::Test, &m);
        write(path, &(serde_json::to_string_pretty(&record)? + "\n"))?;
        eprintln!("evaluate: seed {seed} recall@10 {:.4} ndcg@10 {:.4}", m.recall_at(10), m.ndcg_at(10));
        runs.push(m);
    }
    let summary = json!({
        "variant": cfg.variant.key(),
        "split": "test",
        "seeds": seeds,
        "mean": metrics_json(&RankingMetrics::mean(&runs)),
        "std": metrics_json(&RankingMetrics::std(&runs)),
    });
    write(files.last().expect("summary path"), &(serde_json::to_string_pretty(&summary)? + "\n"))
}

pub fn cmd_ablate(cfg: &RunConfig, force: bool) -> Result<()> {
    let path = cfg.output_dir.join(ABLATION_FILE);
    guard(std::slice::from_ref(&path), force)?;
    let ds = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let rows = run_ablation_suite(&ds, &split, &cfg.model, &cfg.train, &cfg.variants, &cfg.seeds)?;
    write(&path, &records_to_csv(&rows))?;
    for (variant, mean, _) in summarize(&rows) {
        eprintln!("ablate: {variant:<14} recall@10 {:.4} ndcg@10 {:.4}", mean.recall_at(10), mean.ndcg_at(10));
    }
    Ok(())
}

pub fn cmd_perturb(cfg: &RunConfig, force: bool) -> Result<()> {
    let path = cfg.output_dir.join(PERTURB_FILE);
    guard(std::slice::from_ref(&path), force)?;
    let ds = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let rows = run_perturbation(&ds, &split, &cfg.model, &cfg.train, &cfg.levels, &cfg.seeds)?;
    write(&path, &perturbation_to_csv(&rows))
}

pub fn cmd_sweep(cfg: &RunConfig, force: bool) -> Result<()> {
    let path = cfg.output_dir.join(SWEEP_FILE);
    guard(std::slice::from_ref(&path), force)?;
    let ds = load_data(cfg)?;
    let split = load_split(cfg, &ds)?;
    let rows = run_sweep(&ds, &split, &cfg.model, &cfg.train, &cfg.sweep, &cfg.seeds)?;
    write(&path, &sweep_to_csv(&rows))
}
