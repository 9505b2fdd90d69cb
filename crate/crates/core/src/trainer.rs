//! Negative sampling, the optimization loop and early stopping.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, Memberships, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::loss::{joint_loss, LossBreakdown, TrainingTriple};
use crate::model::{forward, EmbeddingState, ModelConfig};
use crate::refine::PropagationGraphs;
use crate::tensor::{Matrix, Tape};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "adam" => Ok(Self::Adam),
            "sgd" => Ok(Self::Sgd),
            _ => Err(format!("unknown optimizer {s:?} (expected adam or sgd)")),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Adam => "adam",
            Self::Sgd => "sgd",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving validation evaluations tolerated before stopping.
    pub patience: usize,
    pub eval_every: usize,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 256,
            max_epochs: 300,
            patience: 10,
            eval_every: 5,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("train.learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("train.batch_size must be >= 1".into());
        }
        if self.patience == 0 {
            return fail("train.patience must be >= 1".into());
        }
        if self.eval_every == 0 {
            return fail("train.eval_every must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail(format!("adam betas must lie in [0, 1), got ({}, {})", self.beta1, self.beta2));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return fail(format!("train.epsilon must be > 0, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Independent random streams derived from one root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init,
    Sampling,
    Perturbation,
}

pub fn rng_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match stream {
        Stream::Init => 0,
        Stream::Sampling => 1,
        Stream::Perturbation => 2,
    });
    rng
}

/// Per-parameter optimizer state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(cfg: &TrainConfig, state: &EmbeddingState) -> Self {
        let zeros = || -> Vec<Matrix> {
            match cfg.optimizer {
                OptimizerKind::Adam => state.params().iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
                OptimizerKind::Sgd => Vec::new(),
            }
        };
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `grads` follows the order of
    /// [`EmbeddingState::params_mut`].
    ///
    /// # Panics
    ///
    /// Panics if the gradients do not match the parameters in number or shape.
    pub fn step(&mut self, params: Vec<&mut Matrix>, grads: &[Matrix]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    assert_eq!(p.shape(), g.shape(), "gradient shape");
                    p.add_scaled(g, -self.lr);
                }
            }
            OptimizerKind::Adam => {
                assert_eq!(params.len(), self.first.len(), "optimizer built for a different model");
                let t = self.step as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    assert_eq!(p.shape(), g.shape(), "gradient shape");
                    let m = self.first[i].as_mut_slice();
                    let v = self.second[i].as_mut_slice();
                    for (((x, &g), m), v) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *x -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                    }
                }
            }
        }
    }
}

/// `count` groups drawn uniformly, with replacement, from the groups `user`
/// never joined in any split.
pub fn sample_negatives<R: Rng>(
    mem: &Memberships,
    num_groups: usize,
    user: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let joined = &mem.all[user];
    if joined.len() >= num_groups {
        return Err(Error::NoNegatives { user, groups: num_groups });
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let g = rng.random_range(0..num_groups);
        if !joined.contains(&g) {
            out.push(g);
        }
    }
    Ok(out)
}

/// Every train membership as a `(user, group)` pair, users ascending.
pub fn train_positives(mem: &Memberships) -> Vec<(usize, usize)> {
    mem.train.iter().enumerate().flat_map(|(u, gs)| gs.iter().map(move |&g| (u, g))).collect()
}

/// One pass over the shuffled train memberships with freshly sampled
/// negatives. Returns the batch-averaged loss components.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch<R: Rng>(
    state: &mut EmbeddingState,
    optimizer: &mut Optimizer,
    graphs: &PropagationGraphs,
    mem: &Memberships,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    rng: &mut R,
) -> Result<LossBreakdown> {
    let mut positives = train_positives(mem);
    positives.shuffle(rng);
    let mut triples = Vec::with_capacity(positives.len());
    for &(user, pos_group) in &positives {
        let neg_group = sample_negatives(mem, graphs.num_groups, user, 1, rng)?[0];
        triples.push(TrainingTriple { user, pos_group, neg_group });
    }

    let mut sum = LossBreakdown::default();
    let mut batches = 0usize;
    for batch in triples.chunks(tcfg.batch_size.max(1)) {
        let mut tape = Tape::new();
        let vars = state.register(&mut tape);
        let out = forward(&mut tape, &vars, graphs, cfg);
        let terms = joint_loss(&mut tape, &vars, &out, batch, cfg);
        let report = terms.breakdown(&tape, cfg)?;
        tape.backward(terms.total)?;
        let grads: Vec<Matrix> = vars
            .all()
            .into_iter()
            .map(|v| {
                let (r, c) = tape.shape(v);
                tape.take_grad(v).unwrap_or_else(|| Matrix::zeros(r, c))
            })
            .collect();
        optimizer.step(state.params_mut(), &grads);
        sum += report;
        batches += 1;
    }
    Ok(if batches == 0 { sum } else { sum / batches as f64 })
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub bpr: f64,
    pub reg: f64,
    pub ssl_user: f64,
    pub ssl_group: f64,
    pub total: f64,
    #[serde(rename = "recall@10_valid", skip_serializing_if = "Option::is_none", default)]
    pub recall_at_10_valid: Option<f64>,
}

impl EpochLog {
    pub fn new(epoch: usize, loss: LossBreakdown, recall: Option<f64>) -> Self {
        Self {
            epoch,
            bpr: loss.bpr,
            reg: loss.reg,
            ssl_user: loss.ssl_user,
            ssl_group: loss.ssl_group,
            total: loss.total,
            recall_at_10_valid: recall,
        }
    }
}

/// Serializes a log as JSON lines.
pub fn log_to_jsonl(log: &[EpochLog]) -> Result<String> {
    let mut s = String::new();
    for entry in log {
        s.push_str(&serde_json::to_string(entry)?);
        s.push('\n');
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters at the best validation evaluation, or the final ones when
    /// no user has validation targets.
    pub state: EmbeddingState,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_valid_recall: Option<f64>,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Trains from a fresh initialization with graphs built from `ds`.
pub fn fit(
    ds: &InteractionDataset,
    split: &SplitAssignment,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let graphs = PropagationGraphs::build(ds, split, &cfg.graph_options());
    let mem = Memberships::new(ds, split);
    fit_with_graphs(&graphs, &mem, cfg, tcfg)
}

/// [`fit`] on prebuilt propagation graphs.
pub fn fit_with_graphs(
    graphs: &PropagationGraphs,
    mem: &Memberships,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    tcfg.validate()?;
    let mut init_rng = rng_stream(tcfg.seed, Stream::Init);
    let mut sample_rng = rng_stream(tcfg.seed, Stream::Sampling);
    let mut state = EmbeddingState::init(graphs.num_users, graphs.num_groups, graphs.num_items, cfg, &mut init_rng);
    let mut optimizer = Optimizer::new(tcfg, &state);
    let has_valid = mem.valid.iter().any(|v| !v.is_empty());

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, EmbeddingState)> = None;
    let mut bad_evals = 0usize;
    let mut stopped_early = false;
    let mut epochs_run = 0usize;

    for epoch in 1..=tcfg.max_epochs {
        let loss = train_epoch(&mut state, &mut optimizer, graphs, mem, cfg, tcfg, &mut sample_rng)?;
        epochs_run = epoch;
        let recall = if has_valid && epoch % tcfg.eval_every == 0 {
            Some(evaluate(&state, graphs, cfg, mem, Split::Valid)?.recall_at(10))
        } else {
            None
        };
        log.push(EpochLog::new(epoch, loss, recall));

        if let Some(r) = recall {
            match &best {
                Some((b, _, _)) if r <= *b => {
                    bad_evals += 1;
                    if bad_evals >= tcfg.patience {
                        stopped_early = true;
                        break;
                    }
                }
                _ => {
                    best = Some((r, epoch, state.clone()));
                    bad_evals = 0;
                }
            }
        }
    }

    Ok(match best {
        Some((r, epoch, best_state)) => FitResult {
            state: best_state,
            log,
            best_epoch: epoch,
            best_valid_recall: Some(r),
            epochs_run,
            stopped_early,
        },
        None => FitResult { state, log, best_epoch: epochs_run, best_valid_recall: None, epochs_run, stopped_early },
    })
}
