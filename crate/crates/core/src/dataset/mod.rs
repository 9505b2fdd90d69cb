//! User–group, user–item and group–item interaction data.
//!
//! On disk a dataset is a directory with three edge lists
//! (`user_group.txt`, `user_item.txt`, `group_item.txt`), one
//! whitespace-separated `left right` id pair per line. Lines starting with
//! `#` are comments, except that a first line of the form `# M K N` declares
//! the entity counts.

mod split;
pub mod synthetic;

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{split_counts, split_dataset, Memberships, Split, SplitAssignment};

pub const USER_GROUP_FILE: &str = "user_group.txt";
pub const USER_ITEM_FILE: &str = "user_item.txt";
pub const GROUP_ITEM_FILE: &str = "group_item.txt";

pub type Edge = (usize, usize);

/// The three binary interaction relations over dense 0-based ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionDataset {
    num_users: usize,
    num_groups: usize,
    num_items: usize,
    user_group: Vec<Edge>,
    user_item: Vec<Edge>,
    group_item: Vec<Edge>,
}

impl InteractionDataset {
    /// Validates id ranges and rejects duplicate edges.
    pub fn new(
        num_users: usize,
        num_groups: usize,
        num_items: usize,
        user_group: Vec<Edge>,
        user_item: Vec<Edge>,
        group_item: Vec<Edge>,
    ) -> Result<Self> {
        check_relation("user-group", &user_group, num_users, num_groups)?;
        check_relation("user-item", &user_item, num_users, num_items)?;
        check_relation("group-item", &group_item, num_groups, num_items)?;
        Ok(Self { num_users, num_groups, num_items, user_group, user_item, group_item })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Memberships `(user, group)`, in file order. Split indices refer to
    /// positions in this slice.
    pub fn user_group(&self) -> &[Edge] {
        &self.user_group
    }

    pub fn user_item(&self) -> &[Edge] {
        &self.user_item
    }

    pub fn group_item(&self) -> &[Edge] {
        &self.group_item
    }

    /// Returns a copy with a different user–item relation.
    pub fn with_user_item(&self, user_item: Vec<Edge>) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_groups,
            self.num_items,
            self.user_group.clone(),
            user_item,
            self.group_item.clone(),
        )
    }

    /// Sorted item lists per user.
    pub fn items_by_user(&self) -> Vec<Vec<usize>> {
        adjacency(self.num_users, &self.user_item, false)
    }

    /// Sorted user lists per item.
    pub fn users_by_item(&self) -> Vec<Vec<usize>> {
        adjacency(self.num_items, &self.user_item, true)
    }

    /// Sorted item lists per group.
    pub fn items_by_group(&self) -> Vec<Vec<usize>> {
        adjacency(self.num_groups, &self.group_item, false)
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        load_dataset(dir)
    }

    /// Writes the three edge files with a `# M K N` header.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, edges) in [
            (USER_GROUP_FILE, &self.user_group),
            (USER_ITEM_FILE, &self.user_item),
            (GROUP_ITEM_FILE, &self.group_item),
        ] {
            let path = dir.join(name);
            let write = || -> std::io::Result<()> {
                let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
                writeln!(w, "# {} {} {}", self.num_users, self.num_groups, self.num_items)?;
                for (a, b) in edges {
                    writeln!(w, "{a} {b}")?;
                }
                w.flush()
            };
            write().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn adjacency(n: usize, edges: &[Edge], reversed: bool) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        let (from, to) = if reversed { (b, a) } else { (a, b) };
        adj[from].push(to);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

fn check_relation(name: &str, edges: &[Edge], left: usize, right: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(edges.len());
    for (i, &(a, b)) in edges.iter().enumerate() {
        if a >= left || b >= right {
            return Err(Error::Validation(format!(
                "{name} edge #{i} ({a}, {b}) outside id range [0, {left}) x [0, {right})"
            )));
        }
        if !seen.insert((a, b)) {
            return Err(Error::Validation(format!("duplicate {name} edge ({a}, {b})")));
        }
    }
    Ok(())
}

struct EdgeFile {
    header: Option<[usize; 3]>,
    edges: Vec<Edge>,
    lines: Vec<usize>,
}

fn read_edge_file(path: &Path) -> Result<EdgeFile> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = EdgeFile { header: None, edges: Vec::new(), lines: Vec::new() };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if i == 0 {
                let nums: Vec<usize> = comment.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                if nums.len() == 3 && comment.split_whitespace().count() == 3 {
                    out.header = Some([nums[0], nums[1], nums[2]]);
                }
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::parse(path, lineno, format!("expected 2 ids, found {} tokens", tokens.len())));
        }
        let parse = |t: &str| {
            t.parse::<usize>().map_err(|_| Error::parse(path, lineno, format!("{t:?} is not a non-negative integer")))
        };
        out.edges.push((parse(tokens[0])?, parse(tokens[1])?));
        out.lines.push(lineno);
    }
    Ok(out)
}

/// Loads and validates the dataset in `dir`.
///
/// Entity counts come from a `# M K N` header when any file has one (all
/// headers must agree), otherwise from `1 + max id` per entity.
pub fn load_dataset(dir: &Path) -> Result<InteractionDataset> {
    let ug = read_edge_file(&dir.join(USER_GROUP_FILE))?;
    let ui = read_edge_file(&dir.join(USER_ITEM_FILE))?;
    let gi = read_edge_file(&dir.join(GROUP_ITEM_FILE))?;

    let mut header: Option<[usize; 3]> = None;
    for (name, f) in [(USER_GROUP_FILE, &ug), (USER_ITEM_FILE, &ui), (GROUP_ITEM_FILE, &gi)] {
        match (header, f.header) {
            (Some(h), Some(g)) if h != g => {
                return Err(Error::parse(dir.join(name), 1, format!("header {g:?} disagrees with {h:?}")));
            }
            (None, Some(g)) => header = Some(g),
            _ => {}
        }
    }

    let max_plus_one = |vals: &mut dyn Iterator<Item = usize>| vals.max().map_or(0, |m| m + 1);
    let [m, k, n] = header.unwrap_or_else(|| {
        [
            max_plus_one(&mut ug.edges.iter().map(|e| e.0).chain(ui.edges.iter().map(|e| e.0))),
            max_plus_one(&mut ug.edges.iter().map(|e| e.1).chain(gi.edges.iter().map(|e| e.0))),
            max_plus_one(&mut ui.edges.iter().map(|e| e.1).chain(gi.edges.iter().map(|e| e.1))),
        ]
    });

    // Range and duplicate checks with file/line context.
    for (name, f, left, right) in
        [(USER_GROUP_FILE, &ug, m, k), (USER_ITEM_FILE, &ui, m, n), (GROUP_ITEM_FILE, &gi, k, n)]
    {
        let mut seen = HashSet::with_capacity(f.edges.len());
        for (&(a, b), &line) in f.edges.iter().zip(&f.lines) {
            if a >= left || b >= right {
                return Err(Error::Validation(format!(
                    "{}:{line}: id pair ({a}, {b}) outside declared range [0, {left}) x [0, {right})",
                    dir.join(name).display()
                )));
            }
            if !seen.insert((a, b)) {
                return Err(Error::Validation(format!(
                    "{}:{line}: duplicate edge ({a}, {b})",
                    dir.join(name).display()
                )));
            }
        }
    }

    InteractionDataset::new(m, k, n, ug.edges, ui.edges, gi.edges)
}

/// Size summary of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_users: usize,
    pub num_groups: usize,
    pub num_items: usize,
    pub user_group_edges: usize,
    pub user_item_edges: usize,
    pub group_item_edges: usize,
    pub avg_groups_per_user: f64,
    pub avg_items_per_user: f64,
    pub avg_items_per_group: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn dataset_stats(ds: &InteractionDataset) -> DatasetStats {
    DatasetStats {
        num_users: ds.num_users,
        num_groups: ds.num_groups,
        num_items: ds.num_items,
        user_group_edges: ds.user_group.len(),
        user_item_edges: ds.user_item.len(),
        group_item_edges: ds.group_item.len(),
        avg_groups_per_user: ratio(ds.user_group.len(), ds.num_users),
        avg_items_per_user: ratio(ds.user_item.len(), ds.num_users),
        avg_items_per_group: ratio(ds.group_item.len(), ds.num_groups),
    }
}
