use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub user: usize,
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Exact top-`k` items per user by inner product, skipping each user's excluded
/// items. Ties go to the lower item index.
pub fn retrieve_topk(
    user_reps: &Array2<f64>,
    item_reps: &Array2<f64>,
    k: usize,
    exclusions: Option<&[Vec<usize>]>,
) -> Result<Vec<RecommendationList>> {
    let n = item_reps.nrows();
    if user_reps.ncols() != item_reps.ncols() {
        return Err(Error::Shape("user and item representations differ in width".into()));
    }
    if let Some(ex) = exclusions {
        if ex.len() != user_reps.nrows() {
            return Err(Error::Shape(format!("{} exclusion lists for {} users", ex.len(), user_reps.nrows())));
        }
    }
    let max_excluded = exclusions.map_or(0, |ex| ex.iter().map(Vec::len).max().unwrap_or(0));
    if k == 0 || k + max_excluded > n {
        return Err(Error::Config(format!(
            "cannot retrieve {k} items from {n} with up to {max_excluded} excluded per user"
        )));
    }
    let scores = user_reps.dot(&item_reps.t());
    Ok((0..user_reps.nrows())
        .into_par_iter()
        .map(|u| {
            let row = scores.row(u);
            let mut skip = vec![false; n];
            if let Some(ex) = exclusions {
                for &i in &ex[u] {
                    skip[i] = true;
                }
            }
            let mut cand: Vec<(usize, f64)> = (0..n).filter(|&i| !skip[i]).map(|i| (i, row[i])).collect();
            let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
            if cand.len() > k {
                cand.select_nth_unstable_by(k - 1, order);
                cand.truncate(k);
            }
            cand.sort_unstable_by(order);
            RecommendationList {
                user: u,
                items: cand.iter().map(|c| c.0).collect(),
                scores: cand.iter().map(|c| c.1).collect(),
            }
        })
        .collect())
}
