use std::collections::HashSet;

use direc::dataset::{split_counts, split_dataset, InteractionDataset, Memberships, Split, SplitAssignment};
use direc::eval::{candidate_set, ndcg_at_k, perturb_ui, rank_candidates, recall_at_k};
use direc::refine::{salton, sym_normalize, SaltonVariant};
use direc::tensor::{Matrix, SparseMatrix, Tape};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 256;

/// A score vector over `n` groups plus a nonempty target subset.
fn ranking_instance() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-5i32..5, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
            prop::collection::btree_set(0..n, 1..=n.min(8)).prop_map(|s| s.into_iter().collect()),
        )
    })
}

fn membership_instance() -> impl Strategy<Value = (InteractionDataset, SplitAssignment)> {
    (1usize..6, 1usize..12).prop_flat_map(|(m, k)| {
        prop::collection::btree_set((0..m, 0..k), 0..=(m * k).min(30)).prop_flat_map(move |edges| {
            let edges: Vec<(usize, usize)> = edges.into_iter().collect();
            let n = edges.len();
            (Just(edges), prop::collection::vec(0u8..3, n)).prop_map(move |(edges, labels)| {
                let ds = InteractionDataset::new(m, k, 1, edges, vec![], vec![]).unwrap();
                let mut s = SplitAssignment { train: vec![], valid: vec![], test: vec![], seed: 0 };
                for (i, l) in labels.into_iter().enumerate() {
                    match l {
                        0 => s.train.push(i),
                        1 => s.valid.push(i),
                        _ => s.test.push(i),
                    }
                }
                (ds, s)
            })
        })
    })
}

fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn metrics_are_monotone_in_k((scores, targets) in ranking_instance()) {
        let all: Vec<usize> = (0..scores.len()).collect();
        let ranked = rank_candidates(&scores, &all);
        let mut prev_recall = 0.0;
        for k in 1..=scores.len() + 2 {
            let r = recall_at_k(&ranked, &targets, k);
            let n = ndcg_at_k(&ranked, &targets, k);
            prop_assert!(r >= prev_recall);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
            prev_recall = r;
        }
        prop_assert_eq!(recall_at_k(&ranked, &targets, scores.len()), 1.0);
    }

    #[test]
    fn ndcg_is_monotone_in_k_at_fixed_hits((scores, targets) in ranking_instance()) {
        // DCG grows with k; IDCG stops growing once k reaches |targets|.
        let all: Vec<usize> = (0..scores.len()).collect();
        let ranked = rank_candidates(&scores, &all);
        for k in targets.len()..scores.len() {
            prop_assert!(ndcg_at_k(&ranked, &targets, k + 1) >= ndcg_at_k(&ranked, &targets, k) - 1e-15);
        }
    }

    #[test]
    fn metrics_depend_only_on_score_order(
        (scores, targets) in ranking_instance(),
        a in 0.01f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let all: Vec<usize> = (0..scores.len()).collect();
        let transformed: Vec<f64> = scores.iter().map(|s| a * s.powi(3) + b).collect();
        let r1 = rank_candidates(&scores, &all);
        let r2 = rank_candidates(&transformed, &all);
        for k in [5, 10, 20] {
            prop_assert_eq!(recall_at_k(&r1, &targets, k), recall_at_k(&r2, &targets, k));
            prop_assert_eq!(ndcg_at_k(&r1, &targets, k), ndcg_at_k(&r2, &targets, k));
        }
    }

    #[test]
    fn candidate_sets_exclude_known_positives((ds, split) in membership_instance()) {
        let mem = Memberships::new(&ds, &split);
        let k = ds.num_groups();
        for u in 0..ds.num_users() {
            let test = candidate_set(&mem, u, Split::Test, k);
            let valid = candidate_set(&mem, u, Split::Valid, k);
            let (tr, va, te): (HashSet<_>, HashSet<_>, HashSet<_>) = (
                mem.train[u].iter().copied().collect(),
                mem.valid[u].iter().copied().collect(),
                mem.test[u].iter().copied().collect(),
            );
            for g in 0..k {
                prop_assert_eq!(test.contains(&g), !tr.contains(&g) && !va.contains(&g));
                prop_assert_eq!(valid.contains(&g), !tr.contains(&g));
            }
            prop_assert!(te.iter().all(|g| test.contains(g)));
            prop_assert!(va.iter().all(|g| valid.contains(g)));
            prop_assert!(test.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn spmm_is_linear(
        x in small_matrix(4, 3),
        y in small_matrix(4, 3),
        s in prop::collection::vec(-2.0f64..2.0, 20),
        alpha in -3.0f64..3.0,
    ) {
        let sparse = SparseMatrix::from_dense(&Matrix::from_vec(5, 4, s.iter().map(|&v| if v.abs() < 0.8 { 0.0 } else { v }).collect()));
        let mut combo = x.clone();
        combo.add_scaled(&y, alpha);
        let lhs = sparse.matmul_dense(&combo);
        let mut rhs = sparse.matmul_dense(&x);
        rhs.add_scaled(&sparse.matmul_dense(&y), alpha);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        prop_assert!(sparse.matmul_dense(&x).max_abs_diff(&sparse.to_dense().matmul(&x)) < 1e-12);
    }

    #[test]
    fn logsumexp_is_shift_equivariant(x in small_matrix(3, 4), c in -50.0f64..50.0) {
        let mut t = Tape::new();
        let a = t.leaf(x.clone());
        let b = t.leaf(x.map(|v| v + c));
        let la = t.logsumexp_rows(a);
        let lb = t.logsumexp_rows(b);
        for r in 0..3 {
            prop_assert!((t.value(lb).get(r, 0) - t.value(la).get(r, 0) - c).abs() < 1e-10);
        }
    }

    #[test]
    fn salton_is_symmetric_and_bounded(
        a in prop::collection::btree_set(0usize..20, 0..10),
        b in prop::collection::btree_set(0usize..20, 0..10),
    ) {
        let (a, b): (Vec<usize>, Vec<usize>) = (a.into_iter().collect(), b.into_iter().collect());
        for v in [SaltonVariant::Union, SaltonVariant::Cosine] {
            let s = salton(&a, &b, v);
            prop_assert_eq!(s, salton(&b, &a, v));
            prop_assert!(s >= 0.0);
        }
        prop_assert!(salton(&a, &b, SaltonVariant::Cosine) <= 1.0 + 1e-12);
    }

    #[test]
    fn normalized_adjacency_is_symmetric(entries in prop::collection::vec((0usize..6, 0usize..6, 0.1f64..3.0), 0..15)) {
        let sym: Vec<(usize, usize, f64)> = entries.iter().flat_map(|&(r, c, v)| [(r, c, v), (c, r, v)]).collect();
        let adj = SparseMatrix::from_triplets(6, 6, sym);
        let op = sym_normalize(&adj);
        prop_assert!(op.is_symmetric());
        prop_assert!(op.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn split_partitions_each_user(edges in prop::collection::btree_set((0usize..6, 0usize..15), 0..60), seed in any::<u64>()) {
        let ds = InteractionDataset::new(6, 15, 1, edges.into_iter().collect(), vec![], vec![]).unwrap();
        let split = split_dataset(&ds, seed);
        let mut all: Vec<usize> = split.train.iter().chain(&split.valid).chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.user_group().len()).collect::<Vec<_>>());
        let mem = Memberships::new(&ds, &split);
        for u in 0..6 {
            let n = mem.all[u].len();
            prop_assert_eq!((mem.train[u].len(), mem.valid[u].len(), mem.test[u].len()), split_counts(n));
        }
        prop_assert_eq!(split_dataset(&ds, seed), split);
    }

    #[test]
    fn perturbation_preserves_counts(level in 0.0f64..=1.0, seed in any::<u64>()) {
        let ds = direc::dataset::synthetic::generate(&direc::dataset::synthetic::SyntheticConfig {
            num_users: 30, num_groups: 20, num_items: 25, seed: 3, ..Default::default()
        });
        let p = perturb_ui(&ds, level, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(p.user_item().len(), ds.user_item().len());
        let orig: HashSet<(usize, usize)> = ds.user_item().iter().copied().collect();
        let changed = p.user_item().iter().filter(|e| !orig.contains(e)).count();
        prop_assert_eq!(changed, (level * ds.user_item().len() as f64).floor() as usize);
        prop_assert_eq!(p.user_group(), ds.user_group());
    }
}
