//! Randomized check suites reused by the focused tests and the acceptance
//! report.

use std::sync::Arc;

use direc::dataset::{split_dataset, InteractionDataset, Memberships, Split};
use direc::eval::evaluate_embeddings;
use direc::loss::{bpr_loss, infonce, joint_loss, regularization, TrainingTriple};
use direc::model::{
    extract_layer, forward, hgnn_forward, lightgcn_forward, Activation, EmbeddingState, FinalEmbeddings, ModelConfig,
    ParamVars,
};
use direc::refine::{
    build_refined_gi_graph, build_refined_ui_graph, build_social_hypergraph, compute_user_reweight, PropagationGraphs,
    SaltonVariant,
};
use direc::tensor::{Matrix, SparseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

pub const INSTANCES: usize = 20;
pub const ORACLE_TRIALS: usize = 50;

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=5), rng.random_range(1..=5))
}

fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.random::<f64>() < 0.5 {
                t.push((r, c, rng.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, t)
}

/// Entries bounded away from zero, so a kink at 0 is never straddled.
fn away_from_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    })
}

type Case = Box<dyn Fn(&mut ChaCha8Rng) -> f64>;

fn op_cases() -> Vec<(&'static str, Case)> {
    vec![
        (
            "spmm",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let n = rng.random_range(1..=5);
                let s = Arc::new(random_sparse(rng, r, n));
                let x = random_matrix(rng, n, c);
                let w = random_matrix(rng, r, c);
                gradcheck(&[x], |t, v| {
                    let y = t.spmm(&s, v[0]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "matmul",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let k = rng.random_range(1..=5);
                let (a, b, w) = (random_matrix(rng, r, k), random_matrix(rng, k, c), random_matrix(rng, r, c));
                gradcheck(&[a, b], |t, v| {
                    let y = t.matmul(v[0], v[1]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "add",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let (a, b, w) = (random_matrix(rng, r, c), random_matrix(rng, r, c), random_matrix(rng, r, c));
                gradcheck(&[a, b], |t, v| {
                    let y = t.add(v[0], v[1]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "sub",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let (a, b, w) = (random_matrix(rng, r, c), random_matrix(rng, r, c), random_matrix(rng, r, c));
                gradcheck(&[a, b], |t, v| {
                    let y = t.sub(v[0], v[1]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "scale",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let f: f64 = rng.random_range(-3.0..3.0);
                let (a, w) = (random_matrix(rng, r, c), random_matrix(rng, r, c));
                gradcheck(&[a], |t, v| {
                    let y = t.scale(v[0], f);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "concat_cols",
            Box::new(|rng| {
                let (r, c1) = dims(rng);
                let c2 = rng.random_range(1..=5);
                let (a, b, w) = (random_matrix(rng, r, c1), random_matrix(rng, r, c2), random_matrix(rng, r, c1 + c2));
                gradcheck(&[a, b], |t, v| {
                    let y = t.concat_cols(v[0], v[1]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "slice_cols",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let start = rng.random_range(0..c);
                let len = rng.random_range(1..=c - start);
                let (a, w) = (random_matrix(rng, r, c), random_matrix(rng, r, len));
                gradcheck(&[a], |t, v| {
                    let y = t.slice_cols(v[0], start, len);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "concat_rows",
            Box::new(|rng| {
                let (r1, c) = dims(rng);
                let r2 = rng.random_range(1..=5);
                let (a, b, w) = (random_matrix(rng, r1, c), random_matrix(rng, r2, c), random_matrix(rng, r1 + r2, c));
                gradcheck(&[a, b], |t, v| {
                    let y = t.concat_rows(v[0], v[1]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "slice_rows",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let start = rng.random_range(0..r);
                let len = rng.random_range(1..=r - start);
                let (a, w) = (random_matrix(rng, r, c), random_matrix(rng, len, c));
                gradcheck(&[a], |t, v| {
                    let y = t.slice_rows(v[0], start, len);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "gather_rows",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let n = rng.random_range(1..=8);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..r)).collect();
                let (a, w) = (random_matrix(rng, r, c), random_matrix(rng, n, c));
                gradcheck(&[a], |t, v| {
                    let y = t.gather_rows(v[0], &idx);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "transpose",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let (a, w) = (random_matrix(rng, r, c), random_matrix(rng, c, r));
                gradcheck(&[a], |t, v| {
                    let y = t.transpose(v[0]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "rowwise_inner",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let (a, b, w) = (random_matrix(rng, r, c), random_matrix(rng, r, c), random_matrix(rng, r, 1));
                gradcheck(&[a, b], |t, v| {
                    let y = t.rowwise_inner(v[0], v[1]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "relu",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let (a, w) = (away_from_zero(rng, r, c), random_matrix(rng, r, c));
                gradcheck(&[a], |t, v| {
                    let y = t.relu(v[0]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "log_sigmoid",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let a = random_matrix(rng, r, c).scaled(6.0);
                let w = random_matrix(rng, r, c);
                gradcheck(&[a], |t, v| {
                    let y = t.log_sigmoid(v[0]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "logsumexp_rows",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let a = random_matrix(rng, r, c).scaled(4.0);
                let w = random_matrix(rng, r, 1);
                gradcheck(&[a], |t, v| {
                    let y = t.logsumexp_rows(v[0]);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "l2_norm_sq",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let a = random_matrix(rng, r, c);
                gradcheck(&[a], |t, v| t.l2_norm_sq(v[0]))
            }),
        ),
        (
            "sum",
            Box::new(|rng| {
                let (r, c) = dims(rng);
                let a = random_matrix(rng, r, c);
                gradcheck(&[a], |t, v| {
                    let sq = t.rowwise_inner(v[0], v[0]);
                    t.sum(sq)
                })
            }),
        ),
        (
            "extract_layer",
            Box::new(|rng| {
                let (r, d) = dims(rng);
                let (a, w1, w2) = (random_matrix(rng, r, 2 * d), random_matrix(rng, r, d), random_matrix(rng, r, d));
                gradcheck(&[a], |t, v| {
                    let (s, i) = extract_layer(t, v[0], d);
                    let ps = project(t, s, &w1);
                    let pi = project(t, i, &w2);
                    t.add(ps, pi)
                })
            }),
        ),
        (
            "hgnn_forward",
            Box::new(|rng| {
                let ds = random_toy(rng, 5);
                let split = random_split(rng, &ds);
                let op = Arc::new(build_social_hypergraph(&ds, &split).operator);
                let d = rng.random_range(1..=4);
                let (m, k) = (ds.num_users(), ds.num_groups());
                let inputs = [
                    random_matrix(rng, m, d),
                    random_matrix(rng, k, d),
                    random_matrix(rng, d, d),
                    random_matrix(rng, d, d),
                ];
                let (wu, wg) = (random_matrix(rng, m, d), random_matrix(rng, k, d));
                gradcheck(&inputs, |t, v| {
                    let (u, g) = hgnn_forward(t, &op, v[0], v[1], &v[2..], Activation::Identity);
                    let pu = project(t, u, &wu);
                    let pg = project(t, g, &wg);
                    t.add(pu, pg)
                })
            }),
        ),
        (
            "lightgcn_forward",
            Box::new(|rng| {
                let ds = random_toy(rng, 5);
                let op = Arc::new(build_refined_ui_graph(&ds, 0.5, SaltonVariant::Union).operator);
                let n = ds.num_users() + ds.num_items();
                let d = rng.random_range(1..=4);
                let layers = rng.random_range(0..=3);
                let (x, w) = (random_matrix(rng, n, d), random_matrix(rng, n, d));
                gradcheck(&[x], |t, v| {
                    let y = lightgcn_forward(t, &op, v[0], layers);
                    project(t, y, &w)
                })
            }),
        ),
        (
            "bpr_loss",
            Box::new(|rng| {
                let (m, d) = dims(rng);
                let k = rng.random_range(2..=5);
                let batch: Vec<TrainingTriple> = (0..rng.random_range(1..=6))
                    .map(|_| TrainingTriple {
                        user: rng.random_range(0..m),
                        pos_group: rng.random_range(0..k),
                        neg_group: rng.random_range(0..k),
                    })
                    .collect();
                gradcheck(&[random_matrix(rng, m, d), random_matrix(rng, k, d)], |t, v| bpr_loss(t, v[0], v[1], &batch))
            }),
        ),
        (
            "regularization",
            Box::new(|rng| {
                let lambda: f64 = rng.random_range(0.01..1.0);
                let b = rng.random_range(1..=8);
                let inputs = [
                    random_matrix(rng, 3, 4),
                    random_matrix(rng, 2, 4),
                    random_matrix(rng, 2, 2),
                    random_matrix(rng, 2, 2),
                ];
                gradcheck(&inputs, |t, v| {
                    let p = ParamVars { users: v[0], groups: v[1], items: v[2], hgnn_weights: vec![v[3]] };
                    regularization(t, &p, lambda, b)
                })
            }),
        ),
        (
            "infonce",
            Box::new(|rng| {
                let (r, d) = dims(rng);
                let temp: f64 = rng.random_range(0.2..2.0);
                // One anchor makes the loss identically zero; that case is
                // checked in absolute terms separately.
                let r = r.max(2);
                let mut anchors: Vec<usize> = (0..r).filter(|_| rng.random::<f64>() < 0.7).collect();
                if anchors.len() < 2 {
                    anchors = vec![0, r - 1];
                }
                gradcheck(&[random_matrix(rng, r, d), random_matrix(rng, r, d)], |t, v| {
                    infonce(t, v[0], v[1], &anchors, temp)
                })
            }),
        ),
    ]
}

/// The 5-user, 4-group, 3-item toy used by the end-to-end checks.
pub fn toy_5_4_3() -> InteractionDataset {
    InteractionDataset::new(
        5,
        4,
        3,
        vec![
            (0, 0),
            (0, 1),
            (0, 2),
            (1, 1),
            (1, 2),
            (1, 3),
            (2, 0),
            (2, 3),
            (2, 2),
            (3, 1),
            (3, 0),
            (3, 3),
            (4, 2),
            (4, 0),
            (4, 1),
        ],
        vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (3, 2), (4, 0), (4, 1), (4, 2)],
        vec![(0, 0), (1, 0), (1, 1), (2, 2), (3, 1), (3, 2)],
    )
    .unwrap()
}

pub fn toy_config() -> ModelConfig {
    ModelConfig {
        dim: 3,
        layers: 2,
        lambda_reweight: 0.5,
        lambda_reg: 0.05,
        lambda_ssl_user: 0.3,
        lambda_ssl_group: 0.2,
        activation: Activation::Identity,
        temperature: 0.7,
        ssl_full_pool: true,
        ..Default::default()
    }
}

fn end_to_end_case(rng: &mut ChaCha8Rng) -> f64 {
    let ds = toy_5_4_3();
    let split = split_dataset(&ds, rng.random());
    let cfg = ModelConfig { ssl_full_pool: rng.random(), ..toy_config() };
    let graphs = PropagationGraphs::build(&ds, &split, &cfg.graph_options());
    let state = EmbeddingState::init(5, 4, 3, &ModelConfig { init_std: 0.5, ..cfg.clone() }, rng);
    let batch: Vec<TrainingTriple> = (0..6)
        .map(|_| TrainingTriple {
            user: rng.random_range(0..5),
            pos_group: rng.random_range(0..4),
            neg_group: rng.random_range(0..4),
        })
        .collect();
    let inputs: Vec<Matrix> = state.params().into_iter().cloned().collect();
    gradcheck(&inputs, |t, v| {
        let p = ParamVars { users: v[0], groups: v[1], items: v[2], hgnn_weights: v[3..].to_vec() };
        let out = forward(t, &p, &graphs, &cfg);
        joint_loss(t, &p, &out, &batch, &cfg).total
    })
}

/// `(check name, worst relative error over the instances)`.
pub fn gradient_suite(seed: u64) -> Vec<(String, f64)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    let mut cases = op_cases();
    cases.push(("total_loss (5/4/3 toy)", Box::new(end_to_end_case)));
    for (name, case) in cases {
        let worst = (0..INSTANCES).map(|_| case(&mut rng)).fold(0.0, f64::max);
        out.push((name.to_string(), worst));
    }
    out
}

/// `(check name, first mismatch if any)` for the graph and evaluation
/// oracles on random toys.
pub fn oracle_suite(seed: u64) -> Vec<(String, Result<(), String>)> {
    let mut rng = rng(seed);
    let mut results: Vec<(String, Result<(), String>)> = vec![
        ("user-item reweighting".into(), Ok(())),
        ("refined user-item operator".into(), Ok(())),
        ("refined group-item operator".into(), Ok(())),
        ("hypergraph operator".into(), Ok(())),
        ("evaluate vs brute-force ranker".into(), Ok(())),
    ];
    let mut fail = |slot: usize, trial: usize, e: String| {
        if results[slot].1.is_ok() {
            results[slot].1 = Err(format!("trial {trial}: {e}"));
        }
    };
    for trial in 0..ORACLE_TRIALS {
        let ds = random_toy(&mut rng, 10);
        let variant = if rng.random() { SaltonVariant::Union } else { SaltonVariant::Cosine };
        let lambda1: f64 = [0.0, 0.001, 0.1, 1.0][rng.random_range(0..4)];
        let augment: bool = rng.random();

        let w = compute_user_reweight(&ds, variant);
        if let Err(e) = sparse_matches_dense(&w, &oracle_reweight(&ds, variant)) {
            fail(0, trial, e);
        }
        let ui = build_refined_ui_graph(&ds, lambda1, variant);
        if let Err(e) = sparse_matches_dense(&ui.operator, &oracle_ui_operator(&ds, lambda1, variant)) {
            fail(1, trial, e);
        }
        let gi = build_refined_gi_graph(&ds, augment);
        if let Err(e) = sparse_matches_dense(&gi.operator, &oracle_gi_operator(&ds, augment)) {
            fail(2, trial, e);
        }
        let split = random_split(&mut rng, &ds);
        let hg = build_social_hypergraph(&ds, &split);
        if let Err(e) = sparse_matches_dense(&hg.operator, &oracle_hypergraph(&ds, &split)) {
            fail(3, trial, e);
        }

        let k = rng.random_range(1..=6);
        let small = InteractionDataset::new(
            ds.num_users(),
            k,
            1,
            ds.user_group().iter().copied().filter(|e| e.1 < k).collect(),
            vec![],
            vec![],
        )
        .unwrap();
        let split = random_split(&mut rng, &small);
        let d = rng.random_range(1..=3);
        // Integer scores make ties common.
        let emb = FinalEmbeddings {
            users: Matrix::from_fn(small.num_users(), d, |_, _| rng.random_range(-2..=2) as f64),
            groups: Matrix::from_fn(k, d, |_, _| rng.random_range(-2..=2) as f64),
        };
        for which in [Split::Valid, Split::Test] {
            let got = evaluate_embeddings(&emb, &Memberships::new(&small, &split), which);
            let (r, n, users) = oracle_evaluate(&emb, &small, &split, which);
            let close = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
            if got.evaluated_users != users || !close(&got.recall, &r) || !close(&got.ndcg, &n) {
                fail(4, trial, format!("{which}: got {got:?}, oracle recall {r:?} ndcg {n:?} users {users}"));
            }
        }
    }
    results
}
