//! Dual-intent group recommendation.
//!
//! Users are recommended groups by combining a social view, learned with
//! hypergraph convolution over group memberships, and an interest view,
//! learned with linear propagation over reweighted user–item and augmented
//! group–item graphs. A contrastive term aligns the two views.
//!
//! ```
//! use direc::dataset::{split_dataset, synthetic};
//! use direc::eval::harness::train_and_evaluate;
//! use direc::model::ModelConfig;
//! use direc::trainer::TrainConfig;
//!
//! let ds = synthetic::generate(&synthetic::SyntheticConfig { num_users: 40, num_groups: 30, num_items: 30, ..Default::default() });
//! let split = split_dataset(&ds, 0);
//! let cfg = ModelConfig { dim: 8, ..Default::default() };
//! let run = train_and_evaluate(&ds, &split, &cfg, &TrainConfig { max_epochs: 2, ..Default::default() }).unwrap();
//! assert!(run.test.recall_at(20) <= 1.0);
//! ```

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod refine;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
