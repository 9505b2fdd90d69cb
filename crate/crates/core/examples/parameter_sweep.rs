//! One-factor sweeps over the reweighting coefficient, propagation depth,
//! embedding size and contrastive weight, reporting the value each sweep
//! picks by validation Recall@10.
//!
//! ```text
//! cargo run --release --example parameter_sweep [DATA_DIR]
//! ```

use direc::dataset::{load_dataset, split_dataset, synthetic};
use direc::eval::harness::{best_by_validation, run_sweep, sweep_to_csv, SweepGrid};
use direc::model::ModelConfig;
use direc::trainer::TrainConfig;

fn main() -> direc::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(dir) => load_dataset(dir.as_ref())?,
        None => synthetic::generate(&synthetic::SyntheticConfig::default()),
    };
    let split = split_dataset(&ds, 0);
    let base = ModelConfig { dim: 32, ..Default::default() };
    let tcfg = TrainConfig { learning_rate: 0.005, max_epochs: 30, ..Default::default() };
    let grid = SweepGrid {
        lambda_reweight: vec![0.0, 0.01, 0.1],
        layers: vec![1, 2, 3],
        dim: vec![16, 32],
        lambda_ssl: vec![0.0, 0.01, 0.1],
    };

    let rows = run_sweep(&ds, &split, &base, &tcfg, &grid, &[0])?;
    print!("{}", sweep_to_csv(&rows));
    for parameter in ["model.lambda_reweight", "model.layers", "model.dim", "model.lambda_ssl"] {
        println!("best {parameter}: {}", best_by_validation(&rows, parameter).unwrap_or_else(|| "n/a".into()));
    }
    Ok(())
}
