use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::InteractionDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split label {other:?} (expected train|valid|test)")),
        }
    }
}

/// Partition of the user–group edge indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Per-user `(train, valid, test)` sizes for `n` memberships.
///
/// Users with fewer than three memberships keep everything in train. Otherwise
/// each share is floored, the remainder goes to train then test then valid,
/// and a user still left without a test edge gives one up from train.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    if n < 3 {
        return (n, 0, 0);
    }
    // Slots in remainder order: train, test, valid.
    let mut shares = [n * 7 / 10, n * 2 / 10, n / 10];
    let rest = n - shares.iter().sum::<usize>();
    for i in 0..rest {
        shares[i % 3] += 1;
    }
    let [mut train, mut test, valid] = shares;
    if test == 0 {
        train -= 1;
        test = 1;
    }
    (train, valid, test)
}

/// Splits memberships 70/10/20 per user; deterministic in `seed`.
pub fn split_dataset(ds: &InteractionDataset, seed: u64) -> SplitAssignment {
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); ds.num_users()];
    for (idx, &(u, _)) in ds.user_group().iter().enumerate() {
        by_user[u].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for mut edges in by_user {
        edges.shuffle(&mut rng);
        let (n_train, n_valid, _) = split_counts(edges.len());
        train.extend_from_slice(&edges[..n_train]);
        valid.extend_from_slice(&edges[n_train..n_train + n_valid]);
        test.extend_from_slice(&edges[n_train + n_valid..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();
    SplitAssignment { train, valid, test, seed }
}

impl SplitAssignment {
    /// Label for every user–group edge index.
    pub fn labels(&self, num_edges: usize) -> Vec<Option<Split>> {
        let mut labels = vec![None; num_edges];
        for (set, label) in [(&self.train, Split::Train), (&self.valid, Split::Valid), (&self.test, Split::Test)] {
            for &i in set {
                labels[i] = Some(label);
            }
        }
        labels
    }

    pub fn edges(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Writes one `edge_index split_label` line per edge, in index order.
    pub fn write_manifest<W: Write>(&self, mut w: W, num_edges: usize) -> std::io::Result<()> {
        for (i, label) in self.labels(num_edges).into_iter().enumerate() {
            if let Some(label) = label {
                writeln!(w, "{i} {label}")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, num_edges: usize) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_manifest(&mut w, num_edges).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest and checks it partitions all `num_edges` indices.
    pub fn load(path: &Path, num_edges: usize, seed: u64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut labels: Vec<Option<Split>> = vec![None; num_edges];
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = |m: String| Error::parse(path, i + 1, m);
            let idx: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(format!("expected `edge_index split_label`, got {line:?}")))?;
            let label: Split = it.next().unwrap_or("").parse().map_err(bad)?;
            if idx >= num_edges {
                return Err(bad(format!("edge index {idx} out of range (dataset has {num_edges} edges)")));
            }
            if labels[idx].replace(label).is_some() {
                return Err(bad(format!("edge index {idx} listed twice")));
            }
        }
        if let Some(missing) = labels.iter().position(Option::is_none) {
            return Err(Error::Validation(format!("{}: edge index {missing} has no split label", path.display())));
        }
        let mut out = SplitAssignment { train: vec![], valid: vec![], test: vec![], seed };
        for (i, l) in labels.into_iter().enumerate() {
            match l.unwrap() {
                Split::Train => out.train.push(i),
                Split::Valid => out.valid.push(i),
                Split::Test => out.test.push(i),
            }
        }
        Ok(out)
    }
}

/// Sorted group lists per user, by split.
#[derive(Clone, Debug)]
pub struct Memberships {
    pub train: Vec<Vec<usize>>,
    pub valid: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
    /// Union over all three splits.
    pub all: Vec<Vec<usize>>,
}

impl Memberships {
    pub fn new(ds: &InteractionDataset, split: &SplitAssignment) -> Self {
        let m = ds.num_users();
        let collect = |idx: &[usize]| {
            let mut lists = vec![Vec::new(); m];
            for &i in idx {
                let (u, g) = ds.user_group()[i];
                lists[u].push(g);
            }
            for l in &mut lists {
                l.sort_unstable();
            }
            lists
        };
        let all = {
            let idx: Vec<usize> = (0..ds.user_group().len()).collect();
            collect(&idx)
        };
        Self { train: collect(&split.train), valid: collect(&split.valid), test: collect(&split.test), all }
    }

    pub fn of(&self, which: Split) -> &[Vec<usize>] {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn num_users(&self) -> usize {
        self.all.len()
    }
}
