//! Planted-structure generator for tests and examples.
//!
//! Every user and group carries a latent social community and a latent
//! interest topic; items carry a topic. Users join groups of their community
//! or of their topic, and consume items of their topic, so both the
//! membership structure and the item interactions carry signal.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::InteractionDataset;

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_groups: usize,
    pub num_items: usize,
    pub communities: usize,
    pub topics: usize,
    pub groups_per_user: usize,
    pub items_per_user: usize,
    pub items_per_group: usize,
    /// Probability that a membership follows the user's community.
    pub social_share: f64,
    /// Probability that a membership follows the user's topic.
    pub interest_share: f64,
    /// Probability that an item interaction ignores the topic.
    pub item_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_users: 300,
            num_groups: 200,
            num_items: 200,
            communities: 12,
            topics: 10,
            groups_per_user: 6,
            items_per_user: 7,
            items_per_group: 3,
            social_share: 0.5,
            interest_share: 0.4,
            item_noise: 0.15,
            seed: 0,
        }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> InteractionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let user_comm: Vec<usize> = (0..cfg.num_users).map(|_| rng.random_range(0..cfg.communities)).collect();
    let user_topic: Vec<usize> = (0..cfg.num_users).map(|_| rng.random_range(0..cfg.topics)).collect();
    let group_comm: Vec<usize> = (0..cfg.num_groups).map(|g| g % cfg.communities).collect();
    let group_topic: Vec<usize> = (0..cfg.num_groups).map(|_| rng.random_range(0..cfg.topics)).collect();
    let item_topic: Vec<usize> = (0..cfg.num_items).map(|i| i % cfg.topics).collect();

    let bucket = |labels: &[usize], n: usize| {
        let mut b = vec![Vec::new(); n];
        for (i, &l) in labels.iter().enumerate() {
            b[l].push(i);
        }
        b
    };
    let groups_by_comm = bucket(&group_comm, cfg.communities);
    let groups_by_topic = bucket(&group_topic, cfg.topics);
    let items_by_topic = bucket(&item_topic, cfg.topics);

    let pick = |rng: &mut ChaCha8Rng, pool: &[usize], n: usize| -> usize {
        if pool.is_empty() {
            rng.random_range(0..n)
        } else {
            pool[rng.random_range(0..pool.len())]
        }
    };

    let mut user_group = Vec::new();
    let mut user_item = Vec::new();
    for u in 0..cfg.num_users {
        let n_groups = rng.random_range(1..=2 * cfg.groups_per_user - 1).min(cfg.num_groups);
        let mut seen = HashSet::new();
        let mut attempts = 0;
        while seen.len() < n_groups && attempts < 50 * n_groups {
            attempts += 1;
            let r: f64 = rng.random();
            let g = if r < cfg.social_share {
                pick(&mut rng, &groups_by_comm[user_comm[u]], cfg.num_groups)
            } else if r < cfg.social_share + cfg.interest_share {
                pick(&mut rng, &groups_by_topic[user_topic[u]], cfg.num_groups)
            } else {
                rng.random_range(0..cfg.num_groups)
            };
            if seen.insert(g) {
                user_group.push((u, g));
            }
        }

        let n_items = rng.random_range(1..=2 * cfg.items_per_user - 1).min(cfg.num_items);
        let mut seen = HashSet::new();
        let mut attempts = 0;
        while seen.len() < n_items && attempts < 50 * n_items {
            attempts += 1;
            let i = if rng.random::<f64>() < cfg.item_noise {
                rng.random_range(0..cfg.num_items)
            } else {
                pick(&mut rng, &items_by_topic[user_topic[u]], cfg.num_items)
            };
            if seen.insert(i) {
                user_item.push((u, i));
            }
        }
    }

    let mut group_item = Vec::new();
    for (g, &topic) in group_topic.iter().enumerate() {
        let n_items = rng.random_range(1..=2 * cfg.items_per_group - 1).min(cfg.num_items);
        let mut seen = HashSet::new();
        let mut attempts = 0;
        while seen.len() < n_items && attempts < 50 * n_items {
            attempts += 1;
            let i = pick(&mut rng, &items_by_topic[topic], cfg.num_items);
            if seen.insert(i) {
                group_item.push((g, i));
            }
        }
    }

    InteractionDataset::new(cfg.num_users, cfg.num_groups, cfg.num_items, user_group, user_item, group_item)
        .expect("generator produces valid edges")
}
