//! Multi-run experiments: ablation suite, perturbation study and
//! one-factor hyperparameter sweeps.

use serde::{Deserialize, Serialize};

use super::{evaluate, perturb_ui, RankingMetrics, CUTOFFS};
use crate::dataset::{InteractionDataset, Memberships, Split, SplitAssignment};
use crate::error::Result;
use crate::model::{ModelConfig, Variant};
use crate::refine::PropagationGraphs;
use crate::trainer::{fit_with_graphs, rng_stream, FitResult, Stream, TrainConfig};

/// Flat metrics row, as written to JSON and CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub variant: String,
    pub seed: u64,
    pub split: String,
    #[serde(rename = "recall@5")]
    pub recall_5: f64,
    #[serde(rename = "recall@10")]
    pub recall_10: f64,
    #[serde(rename = "recall@20")]
    pub recall_20: f64,
    #[serde(rename = "ndcg@5")]
    pub ndcg_5: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg_10: f64,
    #[serde(rename = "ndcg@20")]
    pub ndcg_20: f64,
    pub evaluated_users: usize,
}

impl MetricsRecord {
    pub fn new(variant: &str, seed: u64, split: Split, m: &RankingMetrics) -> Self {
        Self {
            variant: variant.to_string(),
            seed,
            split: split.to_string(),
            recall_5: m.recall[0],
            recall_10: m.recall[1],
            recall_20: m.recall[2],
            ndcg_5: m.ndcg[0],
            ndcg_10: m.ndcg[1],
            ndcg_20: m.ndcg[2],
            evaluated_users: m.evaluated_users,
        }
    }

    pub fn metrics(&self) -> RankingMetrics {
        RankingMetrics {
            recall: [self.recall_5, self.recall_10, self.recall_20],
            ndcg: [self.ndcg_5, self.ndcg_10, self.ndcg_20],
            evaluated_users: self.evaluated_users,
        }
    }

    pub const CSV_HEADER: &'static str =
        "variant,seed,split,recall@5,recall@10,recall@20,ndcg@5,ndcg@10,ndcg@20,evaluated_users";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.variant,
            self.seed,
            self.split,
            self.recall_5,
            self.recall_10,
            self.recall_20,
            self.ndcg_5,
            self.ndcg_10,
            self.ndcg_20,
            self.evaluated_users
        )
    }
}

fn metric_columns(m: &RankingMetrics) -> String {
    let mut cols: Vec<String> = m.recall.iter().map(|v| v.to_string()).collect();
    cols.extend(m.ndcg.iter().map(|v| v.to_string()));
    cols.join(",")
}

fn metric_header() -> String {
    let mut cols: Vec<String> = CUTOFFS.iter().map(|k| format!("recall@{k}")).collect();
    cols.extend(CUTOFFS.iter().map(|k| format!("ndcg@{k}")));
    cols.join(",")
}

/// Result of one training run evaluated on the test split.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub fit: FitResult,
    pub test: RankingMetrics,
}

/// Builds graphs for `cfg`, trains with `tcfg` and evaluates the returned
/// checkpoint on the test split.
pub fn train_and_evaluate(
    ds: &InteractionDataset,
    split: &SplitAssignment,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let graphs = PropagationGraphs::build(ds, split, &cfg.graph_options());
    let mem = Memberships::new(ds, split);
    let fit = fit_with_graphs(&graphs, &mem, cfg, tcfg)?;
    let test = evaluate(&fit.state, &graphs, cfg, &mem, Split::Test)?;
    Ok(RunOutcome { fit, test })
}

/// Trains every variant under every seed with the same budget. Rows are
/// ordered by variant, then seed.
pub fn run_ablation_suite(
    ds: &InteractionDataset,
    split: &SplitAssignment,
    base: &ModelConfig,
    tcfg: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<MetricsRecord>> {
    let mut rows = Vec::new();
    for &variant in variants {
        let cfg = variant.apply(base);
        for &seed in seeds {
            let run = train_and_evaluate(ds, split, &cfg, &TrainConfig { seed, ..tcfg.clone() })?;
            rows.push(MetricsRecord::new(variant.key(), seed, Split::Test, &run.test));
        }
    }
    Ok(rows)
}

/// Mean metrics per variant, in first-appearance order.
pub fn summarize(rows: &[MetricsRecord]) -> Vec<(String, RankingMetrics, RankingMetrics)> {
    let mut order: Vec<String> = Vec::new();
    for r in rows {
        if !order.contains(&r.variant) {
            order.push(r.variant.clone());
        }
    }
    order
        .into_iter()
        .map(|v| {
            let runs: Vec<RankingMetrics> = rows.iter().filter(|r| r.variant == v).map(|r| r.metrics()).collect();
            (v, RankingMetrics::mean(&runs), RankingMetrics::std(&runs))
        })
        .collect()
}

pub fn records_to_csv(rows: &[MetricsRecord]) -> String {
    let mut s = String::from(MetricsRecord::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationRecord {
    pub level: f64,
    pub seed: u64,
    pub variant: Variant,
    pub test: RankingMetrics,
}

/// For each level and seed, perturbs the user–item edges once and trains
/// both the full model and the variant without user–item reweighting on the
/// same perturbed data.
pub fn run_perturbation(
    ds: &InteractionDataset,
    split: &SplitAssignment,
    base: &ModelConfig,
    tcfg: &TrainConfig,
    levels: &[f64],
    seeds: &[u64],
) -> Result<Vec<PerturbationRecord>> {
    let mut rows = Vec::new();
    for &level in levels {
        for &seed in seeds {
            let perturbed = perturb_ui(ds, level, &mut rng_stream(seed, Stream::Perturbation));
            for variant in [Variant::Full, Variant::NoUiReweight] {
                let cfg = variant.apply(base);
                let run = train_and_evaluate(&perturbed, split, &cfg, &TrainConfig { seed, ..tcfg.clone() })?;
                rows.push(PerturbationRecord { level, seed, variant, test: run.test });
            }
        }
    }
    Ok(rows)
}

pub fn perturbation_to_csv(rows: &[PerturbationRecord]) -> String {
    let mut s = format!("level,seed,variant,{},evaluated_users\n", metric_header());
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.level,
            r.seed,
            r.variant.key(),
            metric_columns(&r.test),
            r.test.evaluated_users
        ));
    }
    s
}

/// Values tried for each swept hyperparameter. Each list is swept on its
/// own with every other setting at its base value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub lambda_reweight: Vec<f64>,
    pub layers: Vec<usize>,
    pub dim: Vec<usize>,
    /// Applied to the user and group contrastive weights together.
    pub lambda_ssl: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            lambda_reweight: vec![0.0, 0.001, 0.01, 0.1],
            layers: vec![1, 2, 3],
            dim: vec![32, 64, 128],
            lambda_ssl: vec![0.0, 0.0001, 0.001, 0.01, 0.1, 1.0],
        }
    }
}

impl SweepGrid {
    /// Every `(parameter, value, config)` point of the one-factor sweeps.
    pub fn points(&self, base: &ModelConfig) -> Vec<(&'static str, String, ModelConfig)> {
        let mut pts = Vec::new();
        for &v in &self.lambda_reweight {
            pts.push(("model.lambda_reweight", v.to_string(), ModelConfig { lambda_reweight: v, ..base.clone() }));
        }
        for &v in &self.layers {
            pts.push(("model.layers", v.to_string(), ModelConfig { layers: v, ..base.clone() }));
        }
        for &v in &self.dim {
            pts.push(("model.dim", v.to_string(), ModelConfig { dim: v, ..base.clone() }));
        }
        for &v in &self.lambda_ssl {
            pts.push((
                "model.lambda_ssl",
                v.to_string(),
                ModelConfig { lambda_ssl_user: v, lambda_ssl_group: v, ..base.clone() },
            ));
        }
        pts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub parameter: String,
    pub value: String,
    pub seed: u64,
    pub valid_recall_10: Option<f64>,
    pub test: RankingMetrics,
}

pub fn run_sweep(
    ds: &InteractionDataset,
    split: &SplitAssignment,
    base: &ModelConfig,
    tcfg: &TrainConfig,
    grid: &SweepGrid,
    seeds: &[u64],
) -> Result<Vec<SweepRecord>> {
    let mut rows = Vec::new();
    for (parameter, value, cfg) in grid.points(base) {
        for &seed in seeds {
            let run = train_and_evaluate(ds, split, &cfg, &TrainConfig { seed, ..tcfg.clone() })?;
            rows.push(SweepRecord {
                parameter: parameter.to_string(),
                value: value.clone(),
                seed,
                valid_recall_10: run.fit.best_valid_recall,
                test: run.test,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_to_csv(rows: &[SweepRecord]) -> String {
    let mut s = format!("parameter,value,seed,valid_recall@10,{},evaluated_users\n", metric_header());
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.parameter,
            r.value,
            r.seed,
            r.valid_recall_10.map_or(String::new(), |v| v.to_string()),
            metric_columns(&r.test),
            r.test.evaluated_users
        ));
    }
    s
}

/// The value of `parameter` with the highest mean validation Recall@10;
/// earlier grid points win ties.
pub fn best_by_validation(rows: &[SweepRecord], parameter: &str) -> Option<String> {
    let mut best: Option<(String, f64)> = None;
    let mut values: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.parameter == parameter) {
        if !values.contains(&r.value.as_str()) {
            values.push(&r.value);
        }
    }
    for v in values {
        let scores: Vec<f64> = rows
            .iter()
            .filter(|r| r.parameter == parameter && r.value == v)
            .filter_map(|r| r.valid_recall_10)
            .collect();
        if scores.is_empty() {
            continue;
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        if best.as_ref().is_none_or(|(_, b)| mean > *b) {
            best = Some((v.to_string(), mean));
        }
    }
    best.map(|(v, _)| v)
}
