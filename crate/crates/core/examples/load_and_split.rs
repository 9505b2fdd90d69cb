//! Loads a dataset directory (or generates a synthetic one), prints its
//! statistics and the per-user split, and optionally writes the data out.
//!
//! ```text
//! cargo run --example load_and_split -- [--data DIR] [--save DIR] [--users M] [--groups K] [--items N]
//! ```

use std::path::PathBuf;

use clap::{value_parser, Arg, Command};
use direc::dataset::{load_dataset, split_counts, split_dataset, synthetic, Memberships};

fn main() -> direc::Result<()> {
    let matches = Command::new("load_and_split")
        .arg(Arg::new("data").long("data").value_parser(value_parser!(PathBuf)))
        .arg(Arg::new("save").long("save").value_parser(value_parser!(PathBuf)))
        .arg(Arg::new("users").long("users").value_parser(value_parser!(usize)).default_value("300"))
        .arg(Arg::new("groups").long("groups").value_parser(value_parser!(usize)).default_value("200"))
        .arg(Arg::new("items").long("items").value_parser(value_parser!(usize)).default_value("200"))
        .arg(Arg::new("seed").long("seed").value_parser(value_parser!(u64)).default_value("0"))
        .get_matches();
    let seed = *matches.get_one::<u64>("seed").unwrap();

    let ds = match matches.get_one::<PathBuf>("data") {
        Some(dir) => load_dataset(dir)?,
        None => synthetic::generate(&synthetic::SyntheticConfig {
            num_users: *matches.get_one("users").unwrap(),
            num_groups: *matches.get_one("groups").unwrap(),
            num_items: *matches.get_one("items").unwrap(),
            seed,
            ..Default::default()
        }),
    };
    println!("{}", serde_json::to_string_pretty(&ds.stats())?);

    let split = split_dataset(&ds, seed);
    println!(
        "split: {} train / {} valid / {} test memberships",
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    let mem = Memberships::new(&ds, &split);
    let testable = mem.test.iter().filter(|t| !t.is_empty()).count();
    println!("users with test targets: {testable} of {}", ds.num_users());
    for n in [1, 2, 3, 4, 10] {
        println!("  {n:>2} memberships -> (train, valid, test) = {:?}", split_counts(n));
    }

    if let Some(dir) = matches.get_one::<PathBuf>("save") {
        ds.save(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
