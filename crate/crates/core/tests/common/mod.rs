//! Brute-force oracles and helpers shared by the integration tests.

#![allow(dead_code)]

pub mod suites;

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use direc::dataset::{InteractionDataset, Memberships, Split, SplitAssignment};
use direc::model::FinalEmbeddings;
use direc::refine::SaltonVariant;
use direc::tensor::{Matrix, SparseMatrix, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_relation<R: Rng>(rng: &mut R, left: usize, right: usize, density: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..left {
        for b in 0..right {
            if rng.random::<f64>() < density {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Random dataset with between 1 and `max` entities of each type.
pub fn random_toy<R: Rng>(rng: &mut R, max: usize) -> InteractionDataset {
    let m = rng.random_range(1..=max);
    let k = rng.random_range(1..=max);
    let n = rng.random_range(1..=max);
    let d: f64 = rng.random_range(0.1..0.6);
    InteractionDataset::new(
        m,
        k,
        n,
        random_relation(rng, m, k, d),
        random_relation(rng, m, n, d),
        random_relation(rng, k, n, d),
    )
    .unwrap()
}

/// Random split that assigns each membership independently.
pub fn random_split<R: Rng>(rng: &mut R, ds: &InteractionDataset) -> SplitAssignment {
    let mut s = SplitAssignment { train: vec![], valid: vec![], test: vec![], seed: 0 };
    for i in 0..ds.user_group().len() {
        match rng.random_range(0..10) {
            0..=6 => s.train.push(i),
            7 => s.valid.push(i),
            _ => s.test.push(i),
        }
    }
    s
}

// ---------------------------------------------------------------- oracles

fn neighbors_of_item(ds: &InteractionDataset, item: usize) -> HashSet<usize> {
    ds.user_item().iter().filter(|&&(_, i)| i == item).map(|&(u, _)| u).collect()
}

pub fn oracle_salton(a: &HashSet<usize>, b: &HashSet<usize>, variant: SaltonVariant) -> f64 {
    let inter = a.intersection(b).count() as f64;
    if inter == 0.0 {
        return 0.0;
    }
    match variant {
        SaltonVariant::Union => inter / (a.union(b).count() as f64).sqrt(),
        SaltonVariant::Cosine => inter / ((a.len() * b.len()) as f64).sqrt(),
    }
}

/// Dense `W^(u)` built from explicit neighbor sets.
pub fn oracle_reweight(ds: &InteractionDataset, variant: SaltonVariant) -> Matrix {
    let mut w = Matrix::zeros(ds.num_users(), ds.num_items());
    let hoods: Vec<HashSet<usize>> = (0..ds.num_items()).map(|i| neighbors_of_item(ds, i)).collect();
    for &(u, j) in ds.user_item() {
        let history: BTreeSet<usize> = ds.user_item().iter().filter(|e| e.0 == u).map(|e| e.1).collect();
        let total: f64 = history.iter().map(|&k| oracle_salton(&hoods[k], &hoods[j], variant)).sum();
        w.set(u, j, total / history.len() as f64);
    }
    w
}

/// `D^{-1/2} A D^{-1/2}` on a dense matrix, zero rows left at zero.
pub fn oracle_normalize(a: &Matrix) -> Matrix {
    let n = a.rows();
    let deg: Vec<f64> = (0..n).map(|r| (0..n).map(|c| a.get(r, c)).sum()).collect();
    let inv: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    Matrix::from_fn(n, n, |r, c| inv[r] * a.get(r, c) * inv[c])
}

pub fn oracle_ui_operator(ds: &InteractionDataset, lambda1: f64, variant: SaltonVariant) -> Matrix {
    let (m, n) = (ds.num_users(), ds.num_items());
    let w = oracle_reweight(ds, variant);
    let mut a = Matrix::zeros(m + n, m + n);
    for &(u, i) in ds.user_item() {
        let v = 1.0 + lambda1 * w.get(u, i);
        a.set(u, m + i, v);
        a.set(m + i, u, v);
    }
    oracle_normalize(&a)
}

pub fn oracle_gi_operator(ds: &InteractionDataset, augment: bool) -> Matrix {
    let (k, n) = (ds.num_groups(), ds.num_items());
    let mut a = Matrix::zeros(k + n, k + n);
    for &(g, i) in ds.group_item() {
        a.set(g, k + i, 1.0);
        a.set(k + i, g, 1.0);
    }
    if augment {
        for p in 0..k {
            for q in 0..k {
                let ip: HashSet<usize> = ds.group_item().iter().filter(|e| e.0 == p).map(|e| e.1).collect();
                let shares = ds.group_item().iter().any(|e| e.0 == q && ip.contains(&e.1));
                if p != q && shares {
                    a.set(p, q, 1.0);
                }
            }
        }
    }
    oracle_normalize(&a)
}

/// `D_V^{-1/2} H D_E^{-1} Hᵀ D_V^{-1/2}` by dense matrix products, with one
/// hyperedge per group holding the group node and its train members.
pub fn oracle_hypergraph(ds: &InteractionDataset, split: &SplitAssignment) -> Matrix {
    let (m, k) = (ds.num_users(), ds.num_groups());
    let mut h = Matrix::zeros(m + k, k);
    for g in 0..k {
        h.set(m + g, g, 1.0);
    }
    for &e in &split.train {
        let (u, g) = ds.user_group()[e];
        h.set(u, g, 1.0);
    }
    let edge_deg: Vec<f64> = (0..k).map(|g| (0..m + k).map(|v| h.get(v, g)).sum()).collect();
    let node_deg: Vec<f64> = (0..m + k).map(|v| (0..k).map(|g| h.get(v, g)).sum()).collect();
    let de_inv = Matrix::from_fn(k, k, |a, b| if a == b { 1.0 / edge_deg[a] } else { 0.0 });
    let dv =
        Matrix::from_fn(m + k, m + k, |a, b| if a == b && node_deg[a] > 0.0 { 1.0 / node_deg[a].sqrt() } else { 0.0 });
    dv.matmul(&h).matmul(&de_inv).matmul(&h.transpose()).matmul(&dv)
}

/// Evaluation by explicit enumeration and sorting of `(score, id)` pairs.
pub fn oracle_evaluate(
    emb: &FinalEmbeddings,
    ds: &InteractionDataset,
    split: &SplitAssignment,
    which: Split,
) -> ([f64; 3], [f64; 3], usize) {
    let k = ds.num_groups();
    let labels = split.labels(ds.user_group().len());
    let mut recall = [0.0; 3];
    let mut ndcg = [0.0; 3];
    let mut users = 0;
    for u in 0..ds.num_users() {
        let of = |s: Split| -> HashSet<usize> {
            ds.user_group().iter().zip(&labels).filter(|(e, l)| e.0 == u && **l == Some(s)).map(|(e, _)| e.1).collect()
        };
        let targets = of(which);
        if targets.is_empty() {
            continue;
        }
        users += 1;
        let mut excluded = of(Split::Train);
        if which == Split::Test {
            excluded.extend(of(Split::Valid));
        }
        let mut scored: Vec<(f64, usize)> = (0..k)
            .filter(|g| !excluded.contains(g))
            .map(|g| ((0..emb.users.cols()).map(|c| emb.users.get(u, c) * emb.groups.get(g, c)).sum(), g))
            .collect();
        // Higher score first; equal scores by smaller id.
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (slot, cut) in [5usize, 10, 20].into_iter().enumerate() {
            let top: Vec<usize> = scored.iter().take(cut).map(|s| s.1).collect();
            let hits = top.iter().filter(|g| targets.contains(g)).count();
            recall[slot] += hits as f64 / targets.len() as f64;
            let dcg: f64 = top
                .iter()
                .enumerate()
                .filter(|(_, g)| targets.contains(g))
                .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
                .sum();
            let idcg: f64 = (0..targets.len().min(cut)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
            ndcg[slot] += dcg / idcg;
        }
    }
    if users > 0 {
        for slot in 0..3 {
            recall[slot] /= users as f64;
            ndcg[slot] /= users as f64;
        }
    }
    (recall, ndcg, users)
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Nonzero positions of a sparse operator equal those of a dense oracle and
/// values agree to rounding.
pub fn sparse_matches_dense(s: &SparseMatrix, d: &Matrix) -> Result<(), String> {
    let sd = s.to_dense();
    if sd.shape() != d.shape() {
        return Err(format!("shape {:?} vs {:?}", sd.shape(), d.shape()));
    }
    for r in 0..d.rows() {
        for c in 0..d.cols() {
            let (x, y) = (sd.get(r, c), d.get(r, c));
            if (x == 0.0) != (y == 0.0) || (x - y).abs() > 1e-12 {
                return Err(format!("entry ({r}, {c}): {x} vs {y}"));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------ gradcheck

pub const FD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-4;

/// `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-12)` over all gradient entries.
pub fn relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    for (a, n) in analytic.iter().zip(numeric) {
        for (x, y) in a.as_slice().iter().zip(n.as_slice()) {
            diff += (x - y) * (x - y);
            norm_a += x * x;
            norm_n += y * y;
        }
    }
    diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt()).max(1e-12)
}

/// Compares reverse-mode gradients of a scalar function of `inputs` with
/// central differences. Returns the relative error.
pub fn gradcheck<F>(inputs: &[Matrix], f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |xs: &[Matrix]| {
        let mut t = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        let out = f(&mut t, &vars);
        t.scalar(out)
    };

    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| t.leaf(x.clone())).collect();
    let out = f(&mut t, &vars);
    t.backward(out).unwrap();
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| t.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols())))
        .collect();

    let mut numeric = Vec::new();
    for (idx, x) in inputs.iter().enumerate() {
        let mut g = Matrix::zeros(x.rows(), x.cols());
        for e in 0..x.as_slice().len() {
            let mut plus = inputs.to_vec();
            plus[idx].as_mut_slice()[e] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[idx].as_mut_slice()[e] -= FD_STEP;
            g.as_mut_slice()[e] = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        }
        numeric.push(g);
    }
    relative_error(&analytic, &numeric)
}

/// Reduces a matrix-valued node to a scalar through a fixed random
/// projection, so every output entry carries gradient.
pub fn project(t: &mut Tape, v: Var, weights: &Matrix) -> Var {
    let w = t.leaf(weights.clone());
    let inner = t.rowwise_inner(v, w);
    t.sum(inner)
}

// --------------------------------------------------------------- dataset

/// Location of the Mafengwo files: `$DIREC_MAFENGWO_DIR`, else
/// `data/Mafengwo` at the workspace root.
pub fn mafengwo_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("DIREC_MAFENGWO_DIR").map(PathBuf::from),
        Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/Mafengwo")),
    ];
    candidates.into_iter().flatten().find(|p| p.join(direc::dataset::USER_GROUP_FILE).exists())
}

pub fn memberships(ds: &InteractionDataset, split: &SplitAssignment) -> Memberships {
    Memberships::new(ds, split)
}
