//! Trains every model variant under several seeds with one budget and prints
//! the mean and standard deviation of the test metrics per variant.
//!
//! ```text
//! cargo run --release --example ablation [DATA_DIR]
//! ```

use direc::dataset::{load_dataset, split_dataset, synthetic};
use direc::eval::harness::{records_to_csv, run_ablation_suite, summarize};
use direc::model::{ModelConfig, Variant};
use direc::trainer::TrainConfig;

fn main() -> direc::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(dir) => load_dataset(dir.as_ref())?,
        None => synthetic::generate(&synthetic::SyntheticConfig::default()),
    };
    let split = split_dataset(&ds, 0);
    let base = ModelConfig { dim: 32, ..Default::default() };
    let tcfg = TrainConfig { learning_rate: 0.005, max_epochs: 40, ..Default::default() };
    let seeds = [0, 1, 2];

    let rows = run_ablation_suite(&ds, &split, &base, &tcfg, &Variant::ALL, &seeds)?;
    println!("{:<14} {:>16} {:>16}", "variant", "recall@10", "ndcg@10");
    for (variant, mean, std) in summarize(&rows) {
        println!(
            "{variant:<14} {:>8.4} ± {:.4} {:>8.4} ± {:.4}",
            mean.recall_at(10),
            std.recall_at(10),
            mean.ndcg_at(10),
            std.ndcg_at(10)
        );
    }
    println!("\n{}", records_to_csv(&rows));
    Ok(())
}
