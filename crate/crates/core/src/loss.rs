//! Ranking and intent-alignment objectives.

use std::ops::{AddAssign, Div};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardOutput, ModelConfig, ParamVars};
use crate::tensor::{Tape, Var};

/// A user, one of their train groups, and a group they never joined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingTriple {
    pub user: usize,
    pub pos_group: usize,
    pub neg_group: usize,
}

/// Scalar value of every objective term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub bpr: f64,
    pub reg: f64,
    pub ssl_user: f64,
    pub ssl_group: f64,
    pub total: f64,
}

impl AddAssign for LossBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.bpr += o.bpr;
        self.reg += o.reg;
        self.ssl_user += o.ssl_user;
        self.ssl_group += o.ssl_group;
        self.total += o.total;
    }
}

impl Div<f64> for LossBreakdown {
    type Output = Self;

    fn div(self, n: f64) -> Self {
        Self {
            bpr: self.bpr / n,
            reg: self.reg / n,
            ssl_user: self.ssl_user / n,
            ssl_group: self.ssl_group / n,
            total: self.total / n,
        }
    }
}

/// `total = bpr + reg + λ3·ssl_user + λ4·ssl_group`, rejecting non-finite
/// components by name.
pub fn total_loss(
    bpr: f64,
    reg: f64,
    ssl_user: f64,
    ssl_group: f64,
    lambda3: f64,
    lambda4: f64,
) -> Result<LossBreakdown> {
    for (name, v) in [("bpr", bpr), ("reg", reg), ("ssl_user", ssl_user), ("ssl_group", ssl_group)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss component `{name}` ({v})")));
        }
    }
    Ok(LossBreakdown { bpr, reg, ssl_user, ssl_group, total: bpr + reg + lambda3 * ssl_user + lambda4 * ssl_group })
}

/// `Σ −log σ(ŝ_pos − ŝ_neg)` over the batch.
///
/// # Panics
///
/// Panics on an empty batch.
pub fn bpr_loss(tape: &mut Tape, users: Var, groups: Var, batch: &[TrainingTriple]) -> Var {
    assert!(!batch.is_empty(), "bpr_loss on an empty batch");
    let u: Vec<usize> = batch.iter().map(|t| t.user).collect();
    let pos: Vec<usize> = batch.iter().map(|t| t.pos_group).collect();
    let neg: Vec<usize> = batch.iter().map(|t| t.neg_group).collect();
    let ue = tape.gather_rows(users, &u);
    let pe = tape.gather_rows(groups, &pos);
    let ne = tape.gather_rows(groups, &neg);
    let s_pos = tape.rowwise_inner(ue, pe);
    let s_neg = tape.rowwise_inner(ue, ne);
    let margin = tape.sub(s_pos, s_neg);
    let ls = tape.log_sigmoid(margin);
    let total = tape.sum(ls);
    tape.scale(total, -1.0)
}

/// `λ2 · Σ‖θ‖² / batch_size` over every parameter.
pub fn regularization(tape: &mut Tape, params: &ParamVars, lambda2: f64, batch_size: usize) -> Var {
    let mut acc: Option<Var> = None;
    for v in params.all() {
        let sq = tape.l2_norm_sq(v);
        acc = Some(match acc {
            Some(a) => tape.add(a, sq),
            None => sq,
        });
    }
    tape.scale(acc.expect("at least one parameter"), lambda2 / batch_size as f64)
}

/// Two-direction InfoNCE between rows of `a` and `b` over the anchor pool:
/// each anchor's row in one table must pick out its own row in the other
/// table against every other anchor, with inner-product similarity divided
/// by `temperature`.
///
/// # Panics
///
/// Panics on an empty anchor set or mismatched tables.
pub fn infonce(tape: &mut Tape, a: Var, b: Var, anchors: &[usize], temperature: f64) -> Var {
    assert!(!anchors.is_empty(), "infonce with an empty anchor set");
    assert_eq!(tape.shape(a), tape.shape(b), "infonce tables differ in shape");
    let ra = tape.gather_rows(a, anchors);
    let rb = tape.gather_rows(b, anchors);
    let bt = tape.transpose(rb);
    let raw = tape.matmul(ra, bt);
    let sim = tape.scale(raw, 1.0 / temperature);
    let pos_raw = tape.rowwise_inner(ra, rb);
    let pos_sum = tape.sum(pos_raw);
    let pos = tape.scale(pos_sum, 1.0 / temperature);

    let lse_ab = tape.logsumexp_rows(sim);
    let lse_ab = tape.sum(lse_ab);
    let sim_t = tape.transpose(sim);
    let lse_ba = tape.logsumexp_rows(sim_t);
    let lse_ba = tape.sum(lse_ba);

    let both = tape.add(lse_ab, lse_ba);
    let two_pos = tape.scale(pos, 2.0);
    tape.sub(both, two_pos)
}

/// User-side alignment between the social and interest user tables.
pub fn infonce_user(tape: &mut Tape, social: Var, interest: Var, anchors: &[usize], temperature: f64) -> Var {
    infonce(tape, social, interest, anchors, temperature)
}

/// Group-side alignment between the social and interest group tables.
pub fn infonce_group(tape: &mut Tape, social: Var, interest: Var, anchors: &[usize], temperature: f64) -> Var {
    infonce(tape, social, interest, anchors, temperature)
}

/// Objective terms registered on a tape.
#[derive(Clone, Debug)]
pub struct LossTerms {
    pub bpr: Var,
    pub reg: Var,
    pub ssl_user: Option<Var>,
    pub ssl_group: Option<Var>,
    pub total: Var,
}

impl LossTerms {
    pub fn breakdown(&self, tape: &Tape, cfg: &ModelConfig) -> Result<LossBreakdown> {
        let opt = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v));
        let b = total_loss(
            tape.scalar(self.bpr),
            tape.scalar(self.reg),
            opt(self.ssl_user),
            opt(self.ssl_group),
            cfg.lambda_ssl_user,
            cfg.lambda_ssl_group,
        )?;
        Ok(LossBreakdown { total: tape.scalar(self.total), ..b })
    }
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// The joint objective for one batch.
pub fn joint_loss(
    tape: &mut Tape,
    params: &ParamVars,
    out: &ForwardOutput,
    batch: &[TrainingTriple],
    cfg: &ModelConfig,
) -> LossTerms {
    let bpr = bpr_loss(tape, out.users, out.groups, batch);
    let reg = regularization(tape, params, cfg.lambda_reg, batch.len());
    let mut total = tape.add(bpr, reg);

    let mut ssl_user = None;
    let mut ssl_group = None;
    if cfg.ssl_active() {
        if let (Some(s), Some(i)) = (out.user_social, out.user_interest) {
            if cfg.lambda_ssl_user > 0.0 {
                let anchors = if cfg.ssl_full_pool {
                    (0..tape.shape(s).0).collect()
                } else {
                    sorted_unique(batch.iter().map(|t| t.user).collect())
                };
                let l = infonce_user(tape, s, i, &anchors, cfg.temperature);
                let w = tape.scale(l, cfg.lambda_ssl_user);
                total = tape.add(total, w);
                ssl_user = Some(l);
            }
        }
        if let (Some(s), Some(i)) = (out.group_social, out.group_interest) {
            if cfg.lambda_ssl_group > 0.0 {
                let anchors = if cfg.ssl_full_pool {
                    (0..tape.shape(s).0).collect()
                } else {
                    sorted_unique(batch.iter().flat_map(|t| [t.pos_group, t.neg_group]).collect())
                };
                let l = infonce_group(tape, s, i, &anchors, cfg.temperature);
                let w = tape.scale(l, cfg.lambda_ssl_group);
                total = tape.add(total, w);
                ssl_group = Some(l);
            }
        }
    }
    LossTerms { bpr, reg, ssl_user, ssl_group, total }
}
