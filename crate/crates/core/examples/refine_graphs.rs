//! Shows the three graph refinements on a hand-sized dataset: Salton
//! reweighting of user–item edges, group–group augmentation and the social
//! hypergraph operator.
//!
//! ```text
//! cargo run --example refine_graphs
//! ```

use direc::dataset::{split_dataset, InteractionDataset};
use direc::refine::{
    build_refined_gi_graph, build_refined_ui_graph, build_social_hypergraph, co_interacting_groups,
    compute_user_reweight, SaltonVariant,
};

fn main() -> direc::Result<()> {
    // Users 0 and 1 share items 0 and 1; user 2 only touches item 2.
    let ds = InteractionDataset::new(
        3,
        3,
        3,
        vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)],
        vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)],
        vec![(0, 0), (1, 0), (1, 1), (2, 2)],
    )?;

    println!("Salton weights on user-item edges:");
    for variant in [SaltonVariant::Union, SaltonVariant::Cosine] {
        let w = compute_user_reweight(&ds, variant);
        let entries: Vec<String> = w.iter().map(|(u, i, v)| format!("({u},{i})={v:.3}")).collect();
        println!("  {variant:<6} {}", entries.join(" "));
    }
    let ui = build_refined_ui_graph(&ds, 0.5, SaltonVariant::Union);
    let weights: Vec<String> = ui.weighted.iter().map(|(u, i, v)| format!("({u},{i})={v:.3}")).collect();
    println!("reweighted with coefficient 0.5: {}", weights.join(" "));
    println!("user-item operator: {} nonzeros, symmetric {}", ui.operator.nnz(), ui.operator.is_symmetric());

    let pairs = co_interacting_groups(&ds);
    println!("group pairs sharing an item: {pairs:?}");
    let gi = build_refined_gi_graph(&ds, true);
    println!("group-item operator with augmentation: {} nonzeros", gi.operator.nnz());

    let split = split_dataset(&ds, 0);
    let hg = build_social_hypergraph(&ds, &split);
    println!("social hypergraph over {} train memberships:", split.train.len());
    let dense = hg.operator.to_dense();
    for r in 0..dense.rows() {
        let row: Vec<String> = dense.row(r).iter().map(|v| format!("{v:.3}")).collect();
        println!("  [{}]", row.join(" "));
    }
    Ok(())
}
