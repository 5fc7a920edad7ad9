use std::collections::HashSet;

use crate::data::ItemCategoryTable;
use crate::error::Result;

use super::RecommendationList;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyMetrics {
    pub recall: f64,
    pub hit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityMetrics {
    pub coverage: f64,
    pub entropy: f64,
    pub gini: f64,
}

/// Recall and hit ratio of one list against a user's held-out items.
pub fn accuracy(recommended: &[usize], held_out: &[usize]) -> AccuracyMetrics {
    if held_out.is_empty() {
        return AccuracyMetrics { recall: 0.0, hit: 0.0 };
    }
    let rec: HashSet<usize> = recommended.iter().copied().collect();
    let truth: HashSet<usize> = held_out.iter().copied().collect();
    let hits = truth.intersection(&rec).count();
    AccuracyMetrics {
        recall: hits as f64 / truth.len() as f64,
        hit: if hits > 0 { 1.0 } else { 0.0 },
    }
}

/// Per-user accuracy for every user in `targets` that has a list in `recs`.
pub fn accuracy_metrics(recs: &[RecommendationList], targets: &[(usize, Vec<usize>)]) -> Vec<(usize, AccuracyMetrics)> {
    let by_user: std::collections::HashMap<usize, &RecommendationList> = recs.iter().map(|r| (r.user, r)).collect();
    targets
        .iter()
        .filter(|(_, items)| !items.is_empty())
        .filter_map(|(u, items)| by_user.get(u).map(|r| (*u, accuracy(&r.items, items))))
        .collect()
}

pub fn category_counts(items: &[usize], table: &ItemCategoryTable) -> Result<Vec<usize>> {
    let mut counts = vec![0; table.num_categories()];
    for &i in items {
        counts[table.category(i)?] += 1;
    }
    Ok(counts)
}

/// Shannon entropy (natural log) of the category proportions.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Gini coefficient over the whole category vocabulary, zero counts included:
/// `2 Σ r·x(r) / (C Σ x) − (C + 1) / C` with `x` ascending and `r` from 1.
pub fn gini(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 || counts.is_empty() {
        return 0.0;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let c = sorted.len() as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(r, &x)| (r + 1) as f64 * x as f64).sum();
    (2.0 * weighted / (c * total as f64) - (c + 1.0) / c).max(0.0)
}

pub fn diversity(items: &[usize], table: &ItemCategoryTable) -> Result<DiversityMetrics> {
    let counts = category_counts(items, table)?;
    Ok(DiversityMetrics {
        coverage: counts.iter().filter(|&&c| c > 0).count() as f64,
        entropy: entropy(&counts),
        gini: gini(&counts),
    })
}

pub fn diversity_metrics(recs: &[RecommendationList], table: &ItemCategoryTable) -> Result<Vec<(usize, DiversityMetrics)>> {
    recs.iter().map(|r| Ok((r.user, diversity(&r.items, table)?))).collect()
}
