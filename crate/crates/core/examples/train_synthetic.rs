//! Trains the full model and the matrix-factorization baseline on planted
//! synthetic data (or a dataset directory given as the first argument) and
//! prints test metrics.
//!
//! ```text
//! cargo run --release --example train_synthetic [DATA_DIR]
//! ```

use std::time::Instant;

use direc::dataset::{load_dataset, split_dataset, synthetic};
use direc::eval::harness::train_and_evaluate;
use direc::model::{ModelConfig, Variant};
use direc::trainer::TrainConfig;

fn main() -> direc::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(dir) => load_dataset(dir.as_ref())?,
        None => synthetic::generate(&synthetic::SyntheticConfig::default()),
    };
    println!("{:?}", ds.stats());
    let split = split_dataset(&ds, 0);
    let base = ModelConfig { dim: 64, ..Default::default() };
    let tcfg = TrainConfig { learning_rate: 0.005, max_epochs: 100, ..Default::default() };

    for variant in [Variant::Full, Variant::MfBpr] {
        let start = Instant::now();
        let run = train_and_evaluate(&ds, &split, &variant.apply(&base), &tcfg)?;
        println!(
            "{:<8} epochs {:>3} (best {:>3})  R@10 {:.4}  N@10 {:.4}  R@20 {:.4}  [{:.1?}]",
            variant.label(),
            run.fit.epochs_run,
            run.fit.best_epoch,
            run.test.recall_at(10),
            run.test.ndcg_at(10),
            run.test.recall_at(20),
            start.elapsed()
        );
    }
    Ok(())
}
