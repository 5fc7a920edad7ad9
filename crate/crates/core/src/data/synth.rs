//! Synthetic interaction logs with a controllable dominant-category bias.
//!
//! Every user has one dominant category, two secondary categories and a taste
//! position on a unit circle; every item has a category, a position on the same
//! circle and a popularity weight. An interaction picks the dominant category
//! with probability `dominant_bias`, otherwise a secondary category (two thirds
//! of the remaining mass) or any other category, then draws an unseen item of
//! that category with weight `popularity * exp(-distance(taste, position) / 0.1)`.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{write_csv, write_interactions, Interaction, RawCategories};

const TASTE_WIDTH: f64 = 0.1;
const SECONDARY_SHARE: f64 = 2.0 / 3.0;
const TIME_SPAN: i64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    pub dominant_bias: f64,
    pub per_user: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 200,
            items: 500,
            categories: 10,
            dominant_bias: 0.7,
            per_user: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub interactions: Vec<Interaction>,
    /// `(item_id, category_id)` for every generated item.
    pub categories: Vec<(String, String)>,
}

impl SynthData {
    pub fn raw_categories(&self) -> RawCategories {
        self.categories.iter().cloned().collect()
    }

    /// Writes `interactions.csv` and `categories.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at(dir))?;
        write_interactions(&dir.join("interactions.csv"), &self.interactions)?;
        write_csv(
            &dir.join("categories.csv"),
            &["item_id", "category_id"],
            self.categories.iter().map(|(i, c)| [i.clone(), c.clone()]),
        )
    }
}

fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    let SynthConfig {
        users,
        items,
        categories,
        dominant_bias,
        per_user,
        seed,
    } = *config;
    if users == 0 || items == 0 || categories == 0 {
        return Err(Error::Config("users, items and categories must be positive".into()));
    }
    if per_user > items {
        return Err(Error::Config(format!("per_user ({per_user}) exceeds the item count ({items})")));
    }
    if !(0.0..=1.0).contains(&dominant_bias) {
        return Err(Error::Config("dominant_bias must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let item_category: Vec<usize> = (0..items).map(|j| j % categories).collect();
    let position: Vec<f64> = (0..items).map(|_| rng.random::<f64>()).collect();
    let popularity: Vec<f64> = (0..items).map(|_| 0.5 + rng.random::<f64>()).collect();
    let mut members = vec![Vec::new(); categories];
    for (j, &c) in item_category.iter().enumerate() {
        members[c].push(j);
    }

    let mut interactions = Vec::with_capacity(users * per_user);
    for u in 0..users {
        let dominant = rng.random_range(0..categories);
        let others: Vec<usize> = (0..categories).filter(|&c| c != dominant).collect();
        let secondary: Vec<usize> = others.choose_multiple(&mut rng, 2.min(others.len())).copied().collect();
        let taste = rng.random::<f64>();
        let mut taken = vec![false; items];
        for _ in 0..per_user {
            let item = loop {
                let r = rng.random::<f64>();
                let category = if r < dominant_bias || others.is_empty() {
                    dominant
                } else if rng.random::<f64>() < SECONDARY_SHARE && !secondary.is_empty() {
                    *secondary.choose(&mut rng).unwrap()
                } else {
                    *others.choose(&mut rng).unwrap()
                };
                let pool: Vec<(usize, f64)> = members[category]
                    .iter()
                    .filter(|&&j| !taken[j])
                    .map(|&j| {
                        let w = popularity[j] * (-circle_distance(taste, position[j]) / TASTE_WIDTH).exp();
                        (j, w)
                    })
                    .collect();
                if pool.is_empty() {
                    continue;
                }
                let total: f64 = pool.iter().map(|p| p.1).sum();
                let mut target = rng.random::<f64>() * total;
                let mut chosen = pool[pool.len() - 1].0;
                for &(j, w) in &pool {
                    if target < w {
                        chosen = j;
                        break;
                    }
                    target -= w;
                }
                break chosen;
            };
            taken[item] = true;
            interactions.push(Interaction::new(
                format!("u{u}"),
                format!("i{item}"),
                rng.random_range(0..TIME_SPAN),
            ));
        }
    }
    let categories = (0..items)
        .map(|j| (format!("i{j}"), item_category[j].to_string()))
        .collect();
    Ok(SynthData {
        interactions,
        categories,
    })
}
