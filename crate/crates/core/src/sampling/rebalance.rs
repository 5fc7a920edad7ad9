use std::collections::HashMap;

use crate::data::ItemCategoryTable;
use crate::error::{Error, Result};

/// Sampling distribution over a user's item neighbors: each item is weighted by
/// `(1 / count of its category among the neighbors) ^ alpha`, then normalized.
///
/// With `alpha = 1` every category present receives the same total mass; with
/// `alpha = 0` the distribution is uniform.
pub fn histogram_and_rebalance(neighbors: &[usize], table: &ItemCategoryTable, alpha: f64) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::Empty("neighbor list"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("rebalance weight must be finite and >= 0, got {alpha}")));
    }
    let categories: Vec<usize> = neighbors.iter().map(|&i| table.category(i)).collect::<Result<_>>()?;
    let mut histogram: HashMap<usize, usize> = HashMap::new();
    for &c in &categories {
        *histogram.entry(c).or_default() += 1;
    }
    let mut p: Vec<f64> = categories
        .iter()
        .map(|c| (1.0 / histogram[c] as f64).powf(alpha))
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}
