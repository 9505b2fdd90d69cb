//! Embedding tables, the two intent branches, and user–group scoring.
//!
//! User and group tables have `2d` columns: the first `d` feed the social
//! branch (hypergraph convolution over memberships), the last `d` feed the
//! interest branch (linear propagation over the user–item and group–item
//! graphs, sharing one item table). Final representations concatenate the
//! two branch outputs and a user–group score is their inner product.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::refine::{GraphOptions, PropagationGraphs, SaltonVariant, SocialGraphKind};
use crate::tensor::{dot, Matrix, SparseMatrix, Tape, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    Identity,
    #[default]
    Relu,
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Self::Identity),
            "relu" => Ok(Self::Relu),
            _ => Err(format!("unknown activation {s:?} (expected identity|relu)")),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Per-intent embedding dimension `d`.
    pub dim: usize,
    /// Propagation depth of every branch.
    pub layers: usize,
    /// User–item reweighting coefficient `λ1`.
    pub lambda_reweight: f64,
    /// Regularization weight `λ2`.
    pub lambda_reg: f64,
    /// User-side alignment weight `λ3`.
    pub lambda_ssl_user: f64,
    /// Group-side alignment weight `λ4`.
    pub lambda_ssl_group: f64,
    pub use_social: bool,
    pub use_interest: bool,
    pub use_hypergraph: bool,
    pub use_ui_reweight: bool,
    pub use_gi_augment: bool,
    pub use_ssl: bool,
    /// Score raw `U·Gᵀ` without any propagation.
    pub mf_bpr: bool,
    pub activation: Activation,
    /// Contrast against every user/group instead of those in the batch.
    pub ssl_full_pool: bool,
    pub temperature: f64,
    pub salton: SaltonVariant,
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            layers: 2,
            lambda_reweight: 0.001,
            lambda_reg: 1e-4,
            lambda_ssl_user: 0.01,
            lambda_ssl_group: 0.01,
            use_social: true,
            use_interest: true,
            use_hypergraph: true,
            use_ui_reweight: true,
            use_gi_augment: true,
            use_ssl: true,
            mf_bpr: false,
            activation: Activation::Relu,
            ssl_full_pool: false,
            temperature: 1.0,
            salton: SaltonVariant::Union,
            init_std: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("invalid model config: {m}")));
        if self.dim == 0 {
            return fail("dim must be >= 1");
        }
        if self.layers == 0 {
            return fail("layers must be >= 1");
        }
        for (name, v) in [
            ("lambda1", self.lambda_reweight),
            ("lambda2", self.lambda_reg),
            ("lambda3", self.lambda_ssl_user),
            ("lambda4", self.lambda_ssl_group),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(&format!("{name} must be finite and >= 0"));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be > 0");
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return fail("init_std must be > 0");
        }
        if !self.mf_bpr && !self.use_social && !self.use_interest {
            return fail("at least one of use_social / use_interest must be set");
        }
        Ok(())
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            hypergraph: self.use_hypergraph,
            reweight: if self.use_ui_reweight { self.lambda_reweight } else { 0.0 },
            augment: self.use_gi_augment,
            salton: self.salton,
        }
    }

    /// Whether the alignment losses contribute to the objective.
    pub fn ssl_active(&self) -> bool {
        self.use_ssl && !self.mf_bpr
    }

    fn needs_social(&self) -> bool {
        self.use_social || self.ssl_active()
    }

    fn needs_interest(&self) -> bool {
        self.use_interest || self.ssl_active()
    }
}

/// Named model variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    SocialOnly,
    InterestOnly,
    NoHypergraph,
    NoUiReweight,
    NoGiAugment,
    NoSsl,
    MfBpr,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Full,
        Variant::SocialOnly,
        Variant::InterestOnly,
        Variant::NoHypergraph,
        Variant::NoUiReweight,
        Variant::NoGiAugment,
        Variant::NoSsl,
        Variant::MfBpr,
    ];

    /// Short table label.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full",
            Variant::SocialOnly => "Social-",
            Variant::InterestOnly => "Interest-",
            Variant::NoHypergraph => "w/o HG",
            Variant::NoUiReweight => "w/o UI Re.",
            Variant::NoGiAugment => "w/o GI Aug.",
            Variant::NoSsl => "w/o SSL",
            Variant::MfBpr => "MF-BPR",
        }
    }

    /// Identifier used in configs and file names.
    pub fn key(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::SocialOnly => "social-only",
            Variant::InterestOnly => "interest-only",
            Variant::NoHypergraph => "no-hypergraph",
            Variant::NoUiReweight => "no-ui-reweight",
            Variant::NoGiAugment => "no-gi-augment",
            Variant::NoSsl => "no-ssl",
            Variant::MfBpr => "mf-bpr",
        }
    }

    /// `base` with this variant's component switched off.
    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let mut c = base.clone();
        match self {
            Variant::Full => {}
            Variant::SocialOnly => c.use_interest = false,
            Variant::InterestOnly => c.use_social = false,
            Variant::NoHypergraph => c.use_hypergraph = false,
            Variant::NoUiReweight => c.use_ui_reweight = false,
            Variant::NoGiAugment => c.use_gi_augment = false,
            Variant::NoSsl => c.use_ssl = false,
            Variant::MfBpr => c.mf_bpr = true,
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.key() == s).ok_or_else(|| {
            let keys: Vec<_> = Variant::ALL.iter().map(|v| v.key()).collect();
            format!("unknown variant {s:?} (expected one of {})", keys.join(", "))
        })
    }
}

/// Trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingState {
    /// M×2d, `[social | interest]`.
    pub users: Matrix,
    /// K×2d, `[social | interest]`.
    pub groups: Matrix,
    /// N×d.
    pub items: Matrix,
    /// One d×d weight per hypergraph layer.
    pub hgnn_weights: Vec<Matrix>,
}

impl EmbeddingState {
    /// Normal(0, `init_std`) embeddings; hypergraph weights uniform in
    /// `±1/sqrt(d)`.
    pub fn init<R: Rng>(num_users: usize, num_groups: usize, num_items: usize, cfg: &ModelConfig, rng: &mut R) -> Self {
        let d = cfg.dim;
        let normal = Normal::new(0.0, cfg.init_std).expect("init_std validated");
        let mut table = |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| normal.sample(&mut *rng));
        let users = table(num_users, 2 * d);
        let groups = table(num_groups, 2 * d);
        let items = table(num_items, d);
        let bound = 1.0 / (d as f64).sqrt();
        let hgnn_weights =
            (0..cfg.layers).map(|_| Matrix::from_fn(d, d, |_, _| rng.random_range(-bound..=bound))).collect();
        Self { users, groups, items, hgnn_weights }
    }

    pub fn dim(&self) -> usize {
        self.items.cols()
    }

    pub fn num_params(&self) -> usize {
        3 + self.hgnn_weights.len()
    }

    /// Parameters in a fixed order: users, groups, items, layer weights.
    pub fn params(&self) -> Vec<&Matrix> {
        let mut p = vec![&self.users, &self.groups, &self.items];
        p.extend(self.hgnn_weights.iter());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p = vec![&mut self.users, &mut self.groups, &mut self.items];
        p.extend(self.hgnn_weights.iter_mut());
        p
    }

    /// Copies every parameter onto `tape` as a leaf.
    pub fn register(&self, tape: &mut Tape) -> ParamVars {
        ParamVars {
            users: tape.leaf(self.users.clone()),
            groups: tape.leaf(self.groups.clone()),
            items: tape.leaf(self.items.clone()),
            hgnn_weights: self.hgnn_weights.iter().map(|w| tape.leaf(w.clone())).collect(),
        }
    }

    /// Final user and group representations, without gradients.
    pub fn final_embeddings(&self, graphs: &PropagationGraphs, cfg: &ModelConfig) -> FinalEmbeddings {
        let mut tape = Tape::new();
        let p = self.register(&mut tape);
        let out = forward(&mut tape, &p, graphs, cfg);
        FinalEmbeddings { users: tape.value(out.users).clone(), groups: tape.value(out.groups).clone() }
    }

    fn check_dims(&self, graphs: &PropagationGraphs) -> Result<()> {
        let want = (graphs.num_users, graphs.num_groups, graphs.num_items);
        let got = (self.users.rows(), self.groups.rows(), self.items.rows());
        if want != got {
            return Err(Error::Dimension(format!("checkpoint has (M, K, N) = {got:?}, dataset has {want:?}")));
        }
        Ok(())
    }

    pub fn ensure_compatible(&self, graphs: &PropagationGraphs, cfg: &ModelConfig) -> Result<()> {
        self.check_dims(graphs)?;
        if self.dim() != cfg.dim || self.hgnn_weights.len() != cfg.layers {
            return Err(Error::Dimension(format!(
                "checkpoint has d={} L={}, config has d={} L={}",
                self.dim(),
                self.hgnn_weights.len(),
                cfg.dim,
                cfg.layers
            )));
        }
        Ok(())
    }

    /// Text checkpoint: a `M K N d L` header, then the rows of the user,
    /// group and item tables and of each layer weight, one row per line.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{} {} {} {} {}",
            self.users.rows(),
            self.groups.rows(),
            self.items.rows(),
            self.dim(),
            self.hgnn_weights.len()
        )?;
        for m in self.params() {
            for r in 0..m.rows() {
                let row = m.row(r);
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        w.write_all(b" ")?;
                    }
                    write!(w, "{v:?}")?;
                }
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(BufReader::new(file), path)
    }

    pub fn read_checkpoint<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l.map_err(|e| Error::io(path, e))?)),
                None => Err(Error::parse(path, 0, format!("unexpected end of file, expected {what}"))),
            }
        };
        let (lineno, header) = next("header")?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, lineno, "header must be `M K N d L`"))?;
        let [m, k, n, d, l] = dims[..] else {
            return Err(Error::parse(path, lineno, "header must be `M K N d L`"));
        };
        let mut read_table = |rows: usize, cols: usize, what: &str| -> Result<Matrix> {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (lineno, line) = next(what)?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    let v: f64 =
                        tok.parse().map_err(|_| Error::parse(path, lineno, format!("bad number {tok:?} in {what}")))?;
                    data.push(v);
                }
                if data.len() - before != cols {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("{what} row has {} values, expected {cols}", data.len() - before),
                    ));
                }
            }
            Ok(Matrix::from_vec(rows, cols, data))
        };
        let users = read_table(m, 2 * d, "user table")?;
        let groups = read_table(k, 2 * d, "group table")?;
        let items = read_table(n, d, "item table")?;
        let hgnn_weights = (0..l).map(|_| read_table(d, d, "layer weight")).collect::<Result<_>>()?;
        Ok(Self { users, groups, items, hgnn_weights })
    }
}

/// Parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub users: Var,
    pub groups: Var,
    pub items: Var,
    pub hgnn_weights: Vec<Var>,
}

impl ParamVars {
    /// Same order as [`EmbeddingState::params`].
    pub fn all(&self) -> Vec<Var> {
        let mut v = vec![self.users, self.groups, self.items];
        v.extend(&self.hgnn_weights);
        v
    }
}

/// Output of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Final user representations used for scoring.
    pub users: Var,
    pub groups: Var,
    pub user_social: Option<Var>,
    pub user_interest: Option<Var>,
    pub group_social: Option<Var>,
    pub group_interest: Option<Var>,
}

/// Splits a `2d`-column table into its social and interest halves.
///
/// # Panics
///
/// Panics unless the table has exactly `2d` columns.
pub fn extract_layer(tape: &mut Tape, table: Var, d: usize) -> (Var, Var) {
    let cols = tape.shape(table).1;
    assert_eq!(cols, 2 * d, "extract_layer: table has {cols} columns, expected 2*{d}");
    (tape.slice_cols(table, 0, d), tape.slice_cols(table, d, d))
}

/// Hypergraph convolution `X ← σ(P·X·Θ_l)` over the stacked `[users; groups]`
/// social embeddings; returns the last layer split back into users and groups.
pub fn hgnn_forward(
    tape: &mut Tape,
    operator: &Arc<SparseMatrix>,
    users: Var,
    groups: Var,
    weights: &[Var],
    activation: Activation,
) -> (Var, Var) {
    let m = tape.shape(users).0;
    let k = tape.shape(groups).0;
    assert_eq!(operator.rows(), m + k, "hypergraph operator does not match M+K");
    let mut x = tape.concat_rows(users, groups);
    for &theta in weights {
        let xw = tape.matmul(x, theta);
        let px = tape.spmm(operator, xw);
        x = match activation {
            Activation::Identity => px,
            Activation::Relu => tape.relu(px),
        };
    }
    (tape.slice_rows(x, 0, m), tape.slice_rows(x, m, k))
}

/// Weightless propagation `E ← op·E` for `layers` steps, returning the mean of
/// all layer outputs including the input.
pub fn lightgcn_forward(tape: &mut Tape, operator: &Arc<SparseMatrix>, input: Var, layers: usize) -> Var {
    assert_eq!(operator.rows(), operator.cols(), "propagation operator must be square");
    assert_eq!(operator.cols(), tape.shape(input).0, "propagation operator does not match input rows");
    if layers == 0 {
        return input;
    }
    let mut current = input;
    let mut total = input;
    for _ in 0..layers {
        current = tape.spmm(operator, current);
        total = tape.add(total, current);
    }
    tape.scale(total, 1.0 / (layers + 1) as f64)
}

/// Propagates over `[left; items]` and returns the first `rows(left)` rows.
fn interest_branch(tape: &mut Tape, operator: &Arc<SparseMatrix>, left: Var, items: Var, layers: usize) -> Var {
    let n_left = tape.shape(left).0;
    let stacked = tape.concat_rows(left, items);
    let out = lightgcn_forward(tape, operator, stacked, layers);
    tape.slice_rows(out, 0, n_left)
}

/// Builds the final representations for the configured variant.
///
/// # Panics
///
/// Panics when the graphs do not match the parameter shapes.
pub fn forward(tape: &mut Tape, p: &ParamVars, graphs: &PropagationGraphs, cfg: &ModelConfig) -> ForwardOutput {
    if cfg.mf_bpr {
        return ForwardOutput {
            users: p.users,
            groups: p.groups,
            user_social: None,
            user_interest: None,
            group_social: None,
            group_interest: None,
        };
    }
    let d = tape.shape(p.items).1;
    let (user_s, user_i) = extract_layer(tape, p.users, d);
    let (group_s, group_i) = extract_layer(tape, p.groups, d);

    let social = cfg.needs_social().then(|| match graphs.social_kind {
        SocialGraphKind::Hypergraph => hgnn_forward(
            tape,
            &graphs.social,
            user_s,
            group_s,
            &p.hgnn_weights[..cfg.layers.min(p.hgnn_weights.len())],
            cfg.activation,
        ),
        SocialGraphKind::Bipartite => {
            let m = tape.shape(user_s).0;
            let k = tape.shape(group_s).0;
            let stacked = tape.concat_rows(user_s, group_s);
            let out = lightgcn_forward(tape, &graphs.social, stacked, cfg.layers);
            (tape.slice_rows(out, 0, m), tape.slice_rows(out, m, k))
        }
    });
    let interest = cfg.needs_interest().then(|| {
        (
            interest_branch(tape, &graphs.user_item, user_i, p.items, cfg.layers),
            interest_branch(tape, &graphs.group_item, group_i, p.items, cfg.layers),
        )
    });

    let (users, groups) = match (cfg.use_social, cfg.use_interest) {
        (true, true) => {
            let (us, gs) = social.unwrap();
            let (ui, gi) = interest.unwrap();
            (tape.concat_cols(us, ui), tape.concat_cols(gs, gi))
        }
        (true, false) => social.unwrap(),
        (false, true) => interest.unwrap(),
        (false, false) => unreachable!("validated config has at least one intent"),
    };
    ForwardOutput {
        users,
        groups,
        user_social: social.map(|s| s.0),
        group_social: social.map(|s| s.1),
        user_interest: interest.map(|i| i.0),
        group_interest: interest.map(|i| i.1),
    }
}

/// Frozen final representations, safe to share across evaluation threads.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalEmbeddings {
    pub users: Matrix,
    pub groups: Matrix,
}

impl FinalEmbeddings {
    /// Inner product of the final user and group rows.
    ///
    /// # Panics
    ///
    /// Panics on out-of-range ids.
    pub fn score(&self, user: usize, group: usize) -> f64 {
        assert!(user < self.users.rows(), "user id {user} out of range");
        assert!(group < self.groups.rows(), "group id {group} out of range");
        dot(self.users.row(user), self.groups.row(group))
    }

    /// Scores of `user` against every group.
    pub fn user_scores(&self, user: usize) -> Vec<f64> {
        let u = self.users.row(user);
        (0..self.groups.rows()).map(|g| dot(u, self.groups.row(g))).collect()
    }
}
