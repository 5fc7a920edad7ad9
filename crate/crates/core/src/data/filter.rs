use std::collections::HashMap;

use crate::error::{Error, Result};

use super::Interaction;

pub const DEFAULT_K_CORE: usize = 10;
pub const DEFAULT_SPLIT: [f64; 3] = [0.6, 0.2, 0.2];

/// Repeatedly drops users and items with fewer than `k` interactions until
/// every survivor has at least `k` (or nothing is left).
pub fn k_core_filter(interactions: &[Interaction], k: usize) -> Vec<Interaction> {
    let mut alive = vec![true; interactions.len()];
    loop {
        let mut user_deg: HashMap<&str, usize> = HashMap::new();
        let mut item_deg: HashMap<&str, usize> = HashMap::new();
        for (x, _) in interactions.iter().zip(&alive).filter(|(_, a)| **a) {
            *user_deg.entry(&x.user).or_default() += 1;
            *item_deg.entry(&x.item).or_default() += 1;
        }
        let mut changed = false;
        for (x, a) in interactions.iter().zip(alive.iter_mut()) {
            if *a && (user_deg[x.user.as_str()] < k || item_deg[x.item.as_str()] < k) {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    interactions
        .iter()
        .zip(&alive)
        .filter(|(_, a)| **a)
        .map(|(x, _)| x.clone())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Interaction>,
    pub validation: Vec<Interaction>,
    pub test: Vec<Interaction>,
}

/// Global chronological split. Sorting is stable, so equal timestamps keep input order.
pub fn temporal_split(interactions: &[Interaction], ratios: [f64; 3]) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config(format!("split ratios {ratios:?} must lie in [0, 1]")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {total}, expected 1")));
    }
    if interactions.is_empty() {
        return Err(Error::Empty("interactions to split"));
    }
    let mut sorted = interactions.to_vec();
    sorted.sort_by_key(|x| x.timestamp);
    let n = sorted.len() as f64;
    // the epsilon absorbs products like 0.6 * 5 = 2.9999999999999996
    let n_train = (ratios[0] * n + 1e-9).floor() as usize;
    let n_val = (ratios[1] * n + 1e-9).floor() as usize;
    let test = sorted.split_off(n_train + n_val);
    let validation = sorted.split_off(n_train);
    Ok(DatasetSplit {
        train: sorted,
        validation,
        test,
    })
}
