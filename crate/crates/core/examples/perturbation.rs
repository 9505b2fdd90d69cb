//! Replaces a growing share of user–item edges with random ones and compares
//! the full model against the variant without user–item reweighting.
//!
//! ```text
//! cargo run --release --example perturbation [DATA_DIR]
//! ```

use direc::dataset::{load_dataset, split_dataset, synthetic};
use direc::eval::harness::run_perturbation;
use direc::model::{ModelConfig, Variant};
use direc::trainer::TrainConfig;

fn main() -> direc::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(dir) => load_dataset(dir.as_ref())?,
        None => synthetic::generate(&synthetic::SyntheticConfig::default()),
    };
    let split = split_dataset(&ds, 0);
    let base = ModelConfig { dim: 32, lambda_reweight: 0.1, ..Default::default() };
    let tcfg = TrainConfig { learning_rate: 0.005, max_epochs: 40, ..Default::default() };
    let levels = [0.0, 0.1, 0.2, 0.3];
    let seeds = [0, 1];

    let rows = run_perturbation(&ds, &split, &base, &tcfg, &levels, &seeds)?;
    println!("{:>5} {:>12} {:>12} {:>8}", "level", "full R@10", "no-ui R@10", "gap");
    for level in levels {
        let mean = |variant: Variant| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.level == level && r.variant == variant)
                .map(|r| r.test.recall_at(10))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let (full, plain) = (mean(Variant::Full), mean(Variant::NoUiReweight));
        println!("{level:>5.2} {full:>12.4} {plain:>12.4} {:>+8.4}", full - plain);
    }
    Ok(())
}
