//! Full-candidate ranking evaluation and experiment harnesses.

pub mod harness;

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Edge, InteractionDataset, Memberships, Split};
use crate::error::Result;
use crate::model::{EmbeddingState, FinalEmbeddings, ModelConfig};
use crate::refine::PropagationGraphs;

/// Cutoffs reported for every metric.
pub const CUTOFFS: [usize; 3] = [5, 10, 20];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    /// Recall at each of [`CUTOFFS`].
    pub recall: [f64; 3],
    /// NDCG at each of [`CUTOFFS`].
    pub ndcg: [f64; 3],
    pub evaluated_users: usize,
}

impl RankingMetrics {
    fn slot(k: usize) -> usize {
        CUTOFFS.iter().position(|&c| c == k).unwrap_or_else(|| panic!("cutoff {k} is not one of {CUTOFFS:?}"))
    }

    pub fn recall_at(&self, k: usize) -> f64 {
        self.recall[Self::slot(k)]
    }

    pub fn ndcg_at(&self, k: usize) -> f64 {
        self.ndcg[Self::slot(k)]
    }

    /// Element-wise mean of several runs.
    pub fn mean(runs: &[RankingMetrics]) -> RankingMetrics {
        let n = runs.len().max(1) as f64;
        let mut out = RankingMetrics::default();
        for r in runs {
            for i in 0..3 {
                out.recall[i] += r.recall[i] / n;
                out.ndcg[i] += r.ndcg[i] / n;
            }
            out.evaluated_users = out.evaluated_users.max(r.evaluated_users);
        }
        out
    }

    /// Element-wise population standard deviation.
    pub fn std(runs: &[RankingMetrics]) -> RankingMetrics {
        let mean = Self::mean(runs);
        let n = runs.len().max(1) as f64;
        let mut out = RankingMetrics { evaluated_users: mean.evaluated_users, ..Default::default() };
        for r in runs {
            for i in 0..3 {
                out.recall[i] += (r.recall[i] - mean.recall[i]).powi(2) / n;
                out.ndcg[i] += (r.ndcg[i] - mean.ndcg[i]).powi(2) / n;
            }
        }
        for i in 0..3 {
            out.recall[i] = out.recall[i].sqrt();
            out.ndcg[i] = out.ndcg[i].sqrt();
        }
        out
    }
}

/// Groups ranked for `user` when evaluating on `which`: all groups minus the
/// user's known positives (train for validation; train and validation for
/// test). The held-out targets stay in the set.
pub fn candidate_set(mem: &Memberships, user: usize, which: Split, num_groups: usize) -> Vec<usize> {
    let mut excluded: Vec<usize> = mem.train[user].clone();
    if which == Split::Test {
        excluded.extend_from_slice(&mem.valid[user]);
    }
    excluded.sort_unstable();
    (0..num_groups).filter(|g| excluded.binary_search(g).is_err()).collect()
}

/// Candidates sorted by descending score, ties by ascending group id.
pub fn rank_candidates(scores: &[f64], candidates: &[usize]) -> Vec<usize> {
    // Adding 0.0 folds -0.0 into 0.0 so equal scores tie.
    let key = |g: usize| scores[g] + 0.0;
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    ranked
}

/// `|top-k ∩ targets| / |targets|`.
///
/// # Panics
///
/// Panics if `targets` is empty or `k == 0`.
pub fn recall_at_k(ranked: &[usize], targets: &[usize], k: usize) -> f64 {
    assert!(!targets.is_empty(), "recall_at_k with no targets");
    assert!(k >= 1, "k must be >= 1");
    let hits = ranked.iter().take(k).filter(|g| targets.contains(g)).count();
    hits as f64 / targets.len() as f64
}

/// Binary-gain NDCG with `1/log2(rank + 1)` discounts, normalized by the
/// ideal DCG of `min(|targets|, k)` hits.
///
/// # Panics
///
/// Panics if `targets` is empty or `k == 0`.
pub fn ndcg_at_k(ranked: &[usize], targets: &[usize], k: usize) -> f64 {
    assert!(!targets.is_empty(), "ndcg_at_k with no targets");
    assert!(k >= 1, "k must be >= 1");
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 =
        ranked.iter().take(k).enumerate().filter(|(_, g)| targets.contains(g)).map(|(i, _)| discount(i)).sum();
    let idcg: f64 = (0..targets.len().min(k)).map(discount).sum();
    dcg / idcg
}

/// Metrics for one user's ranking.
pub fn user_metrics(ranked: &[usize], targets: &[usize]) -> ([f64; 3], [f64; 3]) {
    let mut recall = [0.0; 3];
    let mut ndcg = [0.0; 3];
    for (i, &k) in CUTOFFS.iter().enumerate() {
        recall[i] = recall_at_k(ranked, targets, k);
        ndcg[i] = ndcg_at_k(ranked, targets, k);
    }
    (recall, ndcg)
}

/// Ranks every user with a nonempty `which` target set against their
/// candidate set and averages the per-user metrics.
pub fn evaluate_embeddings(emb: &FinalEmbeddings, mem: &Memberships, which: Split) -> RankingMetrics {
    let targets = mem.of(which);
    let num_groups = emb.groups.rows();
    let per_user: Vec<([f64; 3], [f64; 3])> = (0..mem.num_users())
        .into_par_iter()
        .filter(|&u| !targets[u].is_empty())
        .map(|u| {
            let scores = emb.user_scores(u);
            let ranked = rank_candidates(&scores, &candidate_set(mem, u, which, num_groups));
            user_metrics(&ranked, &targets[u])
        })
        .collect();

    let mut out = RankingMetrics { evaluated_users: per_user.len(), ..Default::default() };
    if per_user.is_empty() {
        return out;
    }
    for (r, n) in &per_user {
        for i in 0..3 {
            out.recall[i] += r[i];
            out.ndcg[i] += n[i];
        }
    }
    let n = per_user.len() as f64;
    for i in 0..3 {
        out.recall[i] /= n;
        out.ndcg[i] /= n;
    }
    out
}

/// One forward pass followed by [`evaluate_embeddings`].
pub fn evaluate(
    state: &EmbeddingState,
    graphs: &PropagationGraphs,
    cfg: &ModelConfig,
    mem: &Memberships,
    which: Split,
) -> Result<RankingMetrics> {
    state.ensure_compatible(graphs, cfg)?;
    Ok(evaluate_embeddings(&state.final_embeddings(graphs, cfg), mem, which))
}

/// Replaces `⌊level·|Y|⌋` uniformly chosen user–item edges with random items
/// the same user never interacted with (in the original or the perturbed
/// data). The edge count and the other two relations are unchanged.
///
/// # Panics
///
/// Panics unless `0 <= level <= 1`.
pub fn perturb_ui<R: Rng>(ds: &InteractionDataset, level: f64, rng: &mut R) -> InteractionDataset {
    assert!((0.0..=1.0).contains(&level), "perturbation level must lie in [0, 1], got {level}");
    let edges = ds.user_item();
    let count = (level * edges.len() as f64).floor() as usize;
    if count == 0 {
        return ds.clone();
    }
    let replaced: HashSet<usize> = sample(rng, edges.len(), count).into_iter().collect();
    let mut taken: HashSet<Edge> = edges.iter().copied().collect();
    let n_items = ds.num_items();
    let mut out = Vec::with_capacity(edges.len());
    for (idx, &(u, i)) in edges.iter().enumerate() {
        if !replaced.contains(&idx) {
            out.push((u, i));
            continue;
        }
        let mut user = u;
        let mut tries = 0usize;
        let new_edge = loop {
            let cand = (user, rng.random_range(0..n_items));
            if !taken.contains(&cand) {
                break Some(cand);
            }
            tries += 1;
            // A saturated user falls back to a random user.
            if tries.is_multiple_of(4 * n_items) {
                user = rng.random_range(0..ds.num_users());
            }
            if tries > 64 * (n_items + ds.num_users()) {
                break None;
            }
        };
        let e = new_edge.unwrap_or((u, i));
        taken.insert(e);
        out.push(e);
    }
    ds.with_user_item(out).expect("perturbation keeps ids in range and edges unique")
}
