//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! data.dir = data/Mafengwo
//! model.dim = 64
//! experiment.seeds = 0,1,2
//! ```

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::harness::SweepGrid;
use crate::model::{ModelConfig, Variant};
use crate::trainer::TrainConfig;

/// Every recognized key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("data.dir", "directory holding user_group.txt, user_item.txt, group_item.txt"),
    ("data.split_seed", "seed of the per-user train/valid/test split"),
    ("output.dir", "directory receiving every artifact"),
    ("model.dim", "embedding size d"),
    ("model.layers", "propagation depth L"),
    ("model.lambda_reweight", "user-item reweighting strength"),
    ("model.lambda_reg", "L2 regularization weight"),
    ("model.lambda_ssl_user", "user-side contrastive weight"),
    ("model.lambda_ssl_group", "group-side contrastive weight"),
    ("model.use_social", "score with the social half"),
    ("model.use_interest", "score with the interest half"),
    ("model.use_hypergraph", "hypergraph (true) or bipartite LightGCN (false) social encoder"),
    ("model.use_ui_reweight", "reweight user-item edges by item co-occurrence"),
    ("model.use_gi_augment", "add group-group co-interaction edges"),
    ("model.use_ssl", "enable the contrastive alignment terms"),
    ("model.mf_bpr", "plain matrix factorization baseline"),
    ("model.activation", "hypergraph activation: relu or identity"),
    ("model.ssl_full_pool", "contrast against all entities instead of the batch"),
    ("model.temperature", "contrastive temperature"),
    ("model.salton", "item similarity: union or cosine"),
    ("model.init_std", "standard deviation of the embedding init"),
    ("train.learning_rate", "optimizer step size"),
    ("train.batch_size", "triples per batch"),
    ("train.max_epochs", "epoch budget"),
    ("train.patience", "non-improving evaluations before stopping"),
    ("train.eval_every", "epochs between validation evaluations"),
    ("train.optimizer", "adam or sgd"),
    ("train.beta1", "adam first-moment decay"),
    ("train.beta2", "adam second-moment decay"),
    ("train.epsilon", "adam denominator offset"),
    ("train.seed", "root seed of initialization and sampling"),
    ("experiment.variant", "model variant used by train and evaluate"),
    ("experiment.variants", "comma-separated variants for ablate"),
    ("experiment.seeds", "comma-separated seeds for ablate, perturb and sweep"),
    ("experiment.levels", "comma-separated perturbation levels"),
    ("sweep.lambda_reweight", "grid for model.lambda_reweight"),
    ("sweep.layers", "grid for model.layers"),
    ("sweep.dim", "grid for model.dim"),
    ("sweep.lambda_ssl", "grid applied to both contrastive weights"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub split_seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub variant: Variant,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub levels: Vec<f64>,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            split_seed: 0,
            output_dir: PathBuf::from("output"),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            variant: Variant::Full,
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            levels: vec![0.0, 0.1, 0.2, 0.3],
            sweep: SweepGrid::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e: T::Err| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: expected a comma-separated list")));
    }
    items.into_iter().map(|s| parse(key, s)).collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn unknown_key(key: &str) -> Error {
    let valid: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
    Error::Config(format!("unknown config key {key:?}; valid keys: {}", valid.join(", ")))
}

impl RunConfig {
    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "data.dir" => self.data_dir = Some(PathBuf::from(value.trim())),
            "data.split_seed" => self.split_seed = parse(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value.trim()),
            "model.dim" => m.dim = parse(key, value)?,
            "model.layers" => m.layers = parse(key, value)?,
            "model.lambda_reweight" => m.lambda_reweight = parse(key, value)?,
            "model.lambda_reg" => m.lambda_reg = parse(key, value)?,
            "model.lambda_ssl_user" => m.lambda_ssl_user = parse(key, value)?,
            "model.lambda_ssl_group" => m.lambda_ssl_group = parse(key, value)?,
            "model.use_social" => m.use_social = parse(key, value)?,
            "model.use_interest" => m.use_interest = parse(key, value)?,
            "model.use_hypergraph" => m.use_hypergraph = parse(key, value)?,
            "model.use_ui_reweight" => m.use_ui_reweight = parse(key, value)?,
            "model.use_gi_augment" => m.use_gi_augment = parse(key, value)?,
            "model.use_ssl" => m.use_ssl = parse(key, value)?,
            "model.mf_bpr" => m.mf_bpr = parse(key, value)?,
            "model.activation" => m.activation = parse(key, value)?,
            "model.ssl_full_pool" => m.ssl_full_pool = parse(key, value)?,
            "model.temperature" => m.temperature = parse(key, value)?,
            "model.salton" => m.salton = parse(key, value)?,
            "model.init_std" => m.init_std = parse(key, value)?,
            "train.learning_rate" => t.learning_rate = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.max_epochs" => t.max_epochs = parse(key, value)?,
            "train.patience" => t.patience = parse(key, value)?,
            "train.eval_every" => t.eval_every = parse(key, value)?,
            "train.optimizer" => t.optimizer = parse(key, value)?,
            "train.beta1" => t.beta1 = parse(key, value)?,
            "train.beta2" => t.beta2 = parse(key, value)?,
            "train.epsilon" => t.epsilon = parse(key, value)?,
            "train.seed" => t.seed = parse(key, value)?,
            "experiment.variant" => self.variant = parse(key, value)?,
            "experiment.variants" => self.variants = parse_list(key, value)?,
            "experiment.seeds" => self.seeds = parse_list(key, value)?,
            "experiment.levels" => self.levels = parse_list(key, value)?,
            "sweep.lambda_reweight" => self.sweep.lambda_reweight = parse_list(key, value)?,
            "sweep.layers" => self.sweep.layers = parse_list(key, value)?,
            "sweep.dim" => self.sweep.dim = parse_list(key, value)?,
            "sweep.lambda_ssl" => self.sweep.lambda_ssl = parse_list(key, value)?,
            _ => return Err(unknown_key(key)),
        }
        Ok(())
    }

    /// Textual value of one key, in a form [`RunConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Result<String> {
        let m = &self.model;
        let t = &self.train;
        Ok(match key {
            "data.dir" => self.data_dir.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "data.split_seed" => self.split_seed.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "model.dim" => m.dim.to_string(),
            "model.layers" => m.layers.to_string(),
            "model.lambda_reweight" => m.lambda_reweight.to_string(),
            "model.lambda_reg" => m.lambda_reg.to_string(),
            "model.lambda_ssl_user" => m.lambda_ssl_user.to_string(),
            "model.lambda_ssl_group" => m.lambda_ssl_group.to_string(),
            "model.use_social" => m.use_social.to_string(),
            "model.use_interest" => m.use_interest.to_string(),
            "model.use_hypergraph" => m.use_hypergraph.to_string(),
            "model.use_ui_reweight" => m.use_ui_reweight.to_string(),
            "model.use_gi_augment" => m.use_gi_augment.to_string(),
            "model.use_ssl" => m.use_ssl.to_string(),
            "model.mf_bpr" => m.mf_bpr.to_string(),
            "model.activation" => m.activation.to_string(),
            "model.ssl_full_pool" => m.ssl_full_pool.to_string(),
            "model.temperature" => m.temperature.to_string(),
            "model.salton" => m.salton.to_string(),
            "model.init_std" => m.init_std.to_string(),
            "train.learning_rate" => t.learning_rate.to_string(),
            "train.batch_size" => t.batch_size.to_string(),
            "train.max_epochs" => t.max_epochs.to_string(),
            "train.patience" => t.patience.to_string(),
            "train.eval_every" => t.eval_every.to_string(),
            "train.optimizer" => t.optimizer.to_string(),
            "train.beta1" => t.beta1.to_string(),
            "train.beta2" => t.beta2.to_string(),
            "train.epsilon" => t.epsilon.to_string(),
            "train.seed" => t.seed.to_string(),
            "experiment.variant" => self.variant.to_string(),
            "experiment.variants" => join(&self.variants),
            "experiment.seeds" => join(&self.seeds),
            "experiment.levels" => join(&self.levels),
            "sweep.lambda_reweight" => join(&self.sweep.lambda_reweight),
            "sweep.layers" => join(&self.sweep.layers),
            "sweep.dim" => join(&self.sweep.dim),
            "sweep.lambda_ssl" => join(&self.sweep.lambda_ssl),
            _ => return Err(unknown_key(key)),
        })
    }

    /// Applies every `key = value` line of a config file.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, idx + 1, format!("expected `section.key = value`, got {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::parse(path, idx + 1, msg),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Every key with its current value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (key, _) in KEYS {
            s.push_str(&format!("{key} = {}\n", self.get(key).expect("listed key")));
        }
        s
    }

    /// The model configuration with the selected variant applied.
    pub fn variant_model(&self) -> ModelConfig {
        self.variant.apply(&self.model)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if let Some(l) = self.levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("experiment.levels: {l} is outside [0, 1]")));
        }
        if self.sweep.layers.contains(&0) || self.sweep.dim.contains(&0) {
            return Err(Error::Config("sweep.layers and sweep.dim must be >= 1".into()));
        }
        Ok(())
    }
}
