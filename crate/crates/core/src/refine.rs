//! Precomputed propagation structures.
//!
//! * the social hypergraph over users and groups, one hyperedge per group
//!   covering the group node and its train-split members, with operator
//!   `D_V^{-1/2} H D_E^{-1} Hᵀ D_V^{-1/2}`;
//! * the user–item bipartite graph with edge weights `1 + λ1·w_uj`, where
//!   `w_uj` averages the Salton similarity between item `j` and every item the
//!   user interacted with;
//! * the group–item bipartite graph augmented with unit group–group edges
//!   between groups that share at least one item.
//!
//! Every operator is symmetric with entries `w_ab / (sqrt(d_a)·sqrt(d_b))`;
//! zero-degree nodes get zero rows.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::{Edge, InteractionDataset, SplitAssignment};
use crate::tensor::SparseMatrix;

/// Which normalization the item co-occurrence similarity uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SaltonVariant {
    /// `|A ∩ B| / sqrt(|A ∪ B|)`.
    #[default]
    Union,
    /// `|A ∩ B| / sqrt(|A|·|B|)`, the textbook Salton cosine.
    Cosine,
}

impl FromStr for SaltonVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "union" => Ok(Self::Union),
            "cosine" => Ok(Self::Cosine),
            _ => Err(format!("unknown similarity {s:?} (expected union|cosine)")),
        }
    }
}

impl std::fmt::Display for SaltonVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Union => "union",
            Self::Cosine => "cosine",
        })
    }
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Similarity of two sorted neighbor sets. Zero when the denominator is.
pub fn salton(a: &[usize], b: &[usize], variant: SaltonVariant) -> f64 {
    let inter = intersection_size(a, b);
    if inter == 0 {
        return 0.0;
    }
    let denom = match variant {
        SaltonVariant::Union => (a.len() + b.len() - inter) as f64,
        SaltonVariant::Cosine => a.len() as f64 * b.len() as f64,
    };
    inter as f64 / denom.sqrt()
}

/// User neighborhoods of every item in the user–item graph.
pub struct ItemNeighborhoods {
    users_by_item: Vec<Vec<usize>>,
    variant: SaltonVariant,
}

impl ItemNeighborhoods {
    pub fn new(ds: &InteractionDataset, variant: SaltonVariant) -> Self {
        Self { users_by_item: ds.users_by_item(), variant }
    }

    /// Salton similarity of items `k` and `j`.
    ///
    /// # Panics
    ///
    /// Panics on an out-of-range item id.
    pub fn salton_similarity(&self, k: usize, j: usize) -> f64 {
        let n = self.users_by_item.len();
        assert!(k < n && j < n, "item id out of range [0, {n})");
        salton(&self.users_by_item[k], &self.users_by_item[j], self.variant)
    }
}

/// `W^(u)`: on every observed edge `(u, j)`, the mean similarity between `j`
/// and each item in the user's history (including `j` itself).
pub fn compute_user_reweight(ds: &InteractionDataset, variant: SaltonVariant) -> SparseMatrix {
    let hood = ItemNeighborhoods::new(ds, variant);
    let items_by_user = ds.items_by_user();
    let mut triplets = Vec::with_capacity(ds.user_item().len());
    for &(u, j) in ds.user_item() {
        let history = &items_by_user[u];
        let total: f64 = history.iter().map(|&k| hood.salton_similarity(k, j)).sum();
        triplets.push((u, j, total / history.len() as f64));
    }
    SparseMatrix::from_triplets(ds.num_users(), ds.num_items(), triplets)
}

/// Symmetric normalization `D^{-1/2} A D^{-1/2}` of a square nonnegative
/// matrix, with `D` its row sums.
pub fn sym_normalize(adj: &SparseMatrix) -> SparseMatrix {
    assert_eq!(adj.rows(), adj.cols(), "adjacency must be square");
    let deg = adj.row_sums();
    let triplets = adj
        .iter()
        .map(|(r, c, v)| {
            let denom = (deg[r] * deg[c]).sqrt();
            (r, c, if denom > 0.0 { v / denom } else { 0.0 })
        })
        .collect();
    SparseMatrix::from_triplets(adj.rows(), adj.cols(), triplets)
}

/// Symmetric block adjacency `[[0, B], [Bᵀ, 0]]` of a weighted bipartite
/// relation, left nodes first.
fn bipartite_block(left: usize, edges: impl Iterator<Item = (usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for (a, b, w) in edges {
        t.push((a, left + b, w));
        t.push((left + b, a, w));
    }
    t
}

#[derive(Clone, Debug)]
pub struct RefinedUserItemGraph {
    /// `Y' = Y + λ1·W^(u)`, M×N.
    pub weighted: SparseMatrix,
    /// Normalized (M+N)×(M+N) operator, users first.
    pub operator: SparseMatrix,
}

/// # Panics
///
/// Panics if `lambda1` is negative or not finite.
pub fn build_refined_ui_graph(ds: &InteractionDataset, lambda1: f64, variant: SaltonVariant) -> RefinedUserItemGraph {
    assert!(lambda1 >= 0.0 && lambda1.is_finite(), "reweighting coefficient must be >= 0, got {lambda1}");
    let (m, n) = (ds.num_users(), ds.num_items());
    let weighted = if lambda1 == 0.0 {
        SparseMatrix::from_triplets(m, n, ds.user_item().iter().map(|&(u, i)| (u, i, 1.0)).collect())
    } else {
        let w = compute_user_reweight(ds, variant);
        SparseMatrix::from_triplets(m, n, w.iter().map(|(u, i, v)| (u, i, 1.0 + lambda1 * v)).collect())
    };
    let adj = SparseMatrix::from_triplets(m + n, m + n, bipartite_block(m, weighted.iter()));
    RefinedUserItemGraph { operator: sym_normalize(&adj), weighted }
}

#[derive(Clone, Debug)]
pub struct RefinedGroupItemGraph {
    /// Unnormalized (K+N)×(K+N) adjacency, groups first.
    pub adjacency: SparseMatrix,
    pub operator: SparseMatrix,
}

/// Unordered group pairs `(p, q)`, `p < q`, that share at least one item.
pub fn co_interacting_groups(ds: &InteractionDataset) -> BTreeSet<(usize, usize)> {
    let mut groups_by_item = vec![Vec::new(); ds.num_items()];
    for &(g, i) in ds.group_item() {
        groups_by_item[i].push(g);
    }
    let mut pairs = BTreeSet::new();
    for groups in &mut groups_by_item {
        groups.sort_unstable();
        for (a, &p) in groups.iter().enumerate() {
            for &q in &groups[a + 1..] {
                pairs.insert((p, q));
            }
        }
    }
    pairs
}

/// Group–item graph; with `augment`, also unit edges between every pair of
/// groups sharing an item.
pub fn build_refined_gi_graph(ds: &InteractionDataset, augment: bool) -> RefinedGroupItemGraph {
    let (k, n) = (ds.num_groups(), ds.num_items());
    let mut triplets = bipartite_block(k, ds.group_item().iter().map(|&(g, i)| (g, i, 1.0)));
    if augment {
        for (p, q) in co_interacting_groups(ds) {
            triplets.push((p, q, 1.0));
            triplets.push((q, p, 1.0));
        }
    }
    let adjacency = SparseMatrix::from_triplets(k + n, k + n, triplets);
    RefinedGroupItemGraph { operator: sym_normalize(&adjacency), adjacency }
}

#[derive(Clone, Debug)]
pub struct SocialHypergraph {
    /// (M+K)×K incidence, users first then groups.
    pub incidence: SparseMatrix,
    /// `D_V^{-1/2} H D_E^{-1} Hᵀ D_V^{-1/2}`.
    pub operator: SparseMatrix,
}

fn train_memberships<'a>(ds: &'a InteractionDataset, split: &'a SplitAssignment) -> impl Iterator<Item = Edge> + 'a {
    split.train.iter().map(move |&i| ds.user_group()[i])
}

/// Hypergraph over train-split memberships.
pub fn build_social_hypergraph(ds: &InteractionDataset, split: &SplitAssignment) -> SocialHypergraph {
    social_hypergraph_from_edges(ds.num_users(), ds.num_groups(), train_memberships(ds, split))
}

pub fn social_hypergraph_from_edges(
    num_users: usize,
    num_groups: usize,
    memberships: impl Iterator<Item = Edge>,
) -> SocialHypergraph {
    let nodes = num_users + num_groups;
    let mut members: Vec<Vec<usize>> = (0..num_groups).map(|g| vec![num_users + g]).collect();
    for (u, g) in memberships {
        members[g].push(u);
    }
    for m in &mut members {
        m.sort_unstable();
    }

    let mut node_degree = vec![0usize; nodes];
    let mut incidence = Vec::new();
    for (g, m) in members.iter().enumerate() {
        for &v in m {
            node_degree[v] += 1;
            incidence.push((v, g, 1.0));
        }
    }

    let mut raw = Vec::new();
    for m in &members {
        let inv_size = 1.0 / m.len() as f64;
        for &a in m {
            for &b in m {
                raw.push((a, b, inv_size));
            }
        }
    }
    let raw = SparseMatrix::from_triplets(nodes, nodes, raw);
    let deg_sqrt: Vec<f64> = node_degree.iter().map(|&d| (d as f64).sqrt()).collect();
    let operator = SparseMatrix::from_triplets(
        nodes,
        nodes,
        raw.iter().map(|(a, b, v)| (a, b, v / (deg_sqrt[a] * deg_sqrt[b]))).collect(),
    );

    SocialHypergraph { incidence: SparseMatrix::from_triplets(nodes, num_groups, incidence), operator }
}

/// Plain user–group bipartite operator over train memberships, users first.
pub fn build_user_group_bipartite(ds: &InteractionDataset, split: &SplitAssignment) -> SparseMatrix {
    let (m, k) = (ds.num_users(), ds.num_groups());
    let t = bipartite_block(m, train_memberships(ds, split).map(|(u, g)| (u, g, 1.0)));
    sym_normalize(&SparseMatrix::from_triplets(m + k, m + k, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SocialGraphKind {
    Hypergraph,
    Bipartite,
}

/// Options selecting which refinements are applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphOptions {
    pub hypergraph: bool,
    /// `λ1`; zero disables reweighting.
    pub reweight: f64,
    pub augment: bool,
    pub salton: SaltonVariant,
}

/// The three propagation operators a model consumes.
#[derive(Clone, Debug)]
pub struct PropagationGraphs {
    pub social_kind: SocialGraphKind,
    /// (M+K)×(M+K), users first.
    pub social: Arc<SparseMatrix>,
    /// (M+N)×(M+N), users first.
    pub user_item: Arc<SparseMatrix>,
    /// (K+N)×(K+N), groups first.
    pub group_item: Arc<SparseMatrix>,
    pub num_users: usize,
    pub num_groups: usize,
    pub num_items: usize,
}

impl PropagationGraphs {
    pub fn build(ds: &InteractionDataset, split: &SplitAssignment, opts: &GraphOptions) -> Self {
        let (social_kind, social) = if opts.hypergraph {
            (SocialGraphKind::Hypergraph, build_social_hypergraph(ds, split).operator)
        } else {
            (SocialGraphKind::Bipartite, build_user_group_bipartite(ds, split))
        };
        Self {
            social_kind,
            social: Arc::new(social),
            user_item: Arc::new(build_refined_ui_graph(ds, opts.reweight, opts.salton).operator),
            group_item: Arc::new(build_refined_gi_graph(ds, opts.augment).operator),
            num_users: ds.num_users(),
            num_groups: ds.num_groups(),
            num_items: ds.num_items(),
        }
    }
}
