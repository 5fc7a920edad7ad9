//! Greedy post-processing rerankers: maximal marginal relevance and a
//! coverage-based diversity/utility reranker.
//!
//! Both operate on any scored candidate list and return candidate item ids in
//! selection order. Ties always go to the lower item id.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub item: usize,
    pub relevance: f64,
    pub category: usize,
}

impl Candidate {
    pub fn new(item: usize, relevance: f64, category: usize) -> Self {
        Self {
            item,
            relevance,
            category,
        }
    }
}

/// Pairwise similarity used by the MMR penalty.
#[derive(Debug, Clone, Copy)]
pub enum Similarity<'a> {
    /// 1 when two candidates share a category, else 0.
    Category,
    /// Cosine of per-candidate vectors, indexed like the candidate slice.
    Cosine(&'a [Vec<f64>]),
}

impl Similarity<'_> {
    fn between(&self, cands: &[Candidate], a: usize, b: usize) -> f64 {
        match self {
            Similarity::Category => f64::from(u8::from(cands[a].category == cands[b].category)),
            Similarity::Cosine(v) => cosine(&v[a], &v[b]),
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn check(cands: &[Candidate], k_out: usize) -> Result<()> {
    if cands.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    if k_out > cands.len() {
        return Err(Error::Config(format!(
            "cannot select {k_out} items from {} candidates",
            cands.len()
        )));
    }
    if let Some(c) = cands.iter().find(|c| !c.relevance.is_finite()) {
        return Err(Error::NonFinite(format!("relevance of item {}", c.item)));
    }
    let mut seen = HashSet::with_capacity(cands.len());
    if let Some(c) = cands.iter().find(|c| !seen.insert(c.item)) {
        return Err(Error::Config(format!("item {} appears twice among the candidates", c.item)));
    }
    Ok(())
}

/// Higher value first, then lower item id.
fn better(value: f64, item: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bv, bi)) => match value.partial_cmp(&bv).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Equal => item < bi,
            Ordering::Less => false,
        },
    }
}

/// Candidates sorted by decreasing relevance, ties by lower item id.
pub fn relevance_sort(cands: &[Candidate]) -> Vec<usize> {
    let mut order: Vec<&Candidate> = cands.iter().collect();
    order.sort_by(|a, b| b.relevance.total_cmp(&a.relevance).then(a.item.cmp(&b.item)));
    order.into_iter().map(|c| c.item).collect()
}

/// Greedy MMR. Each step picks the remaining candidate maximising
/// `lambda * rel(i) - (1 - lambda) * max_sim(i, selected)`; the first pick is
/// the most relevant candidate.
pub fn mmr_rerank(cands: &[Candidate], lambda: f64, k_out: usize, sim: Similarity<'_>) -> Result<Vec<usize>> {
    check(cands, k_out)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if let Similarity::Cosine(v) = sim {
        if v.len() != cands.len() {
            return Err(Error::Shape(format!(
                "{} similarity vectors for {} candidates",
                v.len(),
                cands.len()
            )));
        }
    }
    let mut remaining: Vec<usize> = (0..cands.len()).collect();
    let mut selected: Vec<usize> = Vec::with_capacity(k_out);
    while selected.len() < k_out {
        let mut best: Option<(f64, usize)> = None;
        let mut best_pos = 0;
        for (pos, &i) in remaining.iter().enumerate() {
            let value = if selected.is_empty() {
                cands[i].relevance
            } else {
                let penalty = selected
                    .iter()
                    .map(|&j| sim.between(cands, i, j))
                    .fold(f64::NEG_INFINITY, f64::max);
                lambda * cands[i].relevance - (1.0 - lambda) * penalty
            };
            if better(value, cands[i].item, best) {
                best = Some((value, cands[i].item));
                best_pos = pos;
            }
        }
        selected.push(remaining.swap_remove(best_pos));
    }
    Ok(selected.into_iter().map(|i| cands[i].item).collect())
}

/// Greedy diversity-utility reranking with category coverage as the diversity
/// function: prefer the most relevant candidate from a category not yet
/// covered, and fall back to the most relevant overall once every remaining
/// category is covered.
pub fn dum_rerank(cands: &[Candidate], k_out: usize) -> Result<Vec<usize>> {
    check(cands, k_out)?;
    let mut remaining: Vec<usize> = (0..cands.len()).collect();
    let mut covered = HashSet::new();
    let mut out = Vec::with_capacity(k_out);
    while out.len() < k_out {
        let pick = |uncovered_only: bool| {
            let mut best: Option<(f64, usize)> = None;
            let mut best_pos = None;
            for (pos, &i) in remaining.iter().enumerate() {
                let c = &cands[i];
                if uncovered_only && covered.contains(&c.category) {
                    continue;
                }
                if better(c.relevance, c.item, best) {
                    best = Some((c.relevance, c.item));
                    best_pos = Some(pos);
                }
            }
            best_pos
        };
        let pos = pick(true).or_else(|| pick(false)).expect("k_out <= candidates");
        let i = remaining.swap_remove(pos);
        covered.insert(cands[i].category);
        out.push(cands[i].item);
    }
    Ok(out)
}

/// Number of distinct categories among `items`, looked up in `cands`.
pub fn category_coverage(cands: &[Candidate], items: &[usize]) -> usize {
    items
        .iter()
        .filter_map(|it| cands.iter().find(|c| c.item == *it))
        .map(|c| c.category)
        .collect::<HashSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> Vec<Candidate> {
        vec![
            Candidate::new(1, 1.0, 0),
            Candidate::new(2, 0.9, 0),
            Candidate::new(3, 0.2, 1),
        ]
    }

    #[test]
    fn mmr_half_lambda_trades_relevance_for_a_new_category() {
        assert_eq!(mmr_rerank(&example(), 0.5, 2, Similarity::Category).unwrap(), vec![1, 3]);
    }

    #[test]
    fn mmr_lambda_one_is_relevance_order() {
        assert_eq!(mmr_rerank(&example(), 1.0, 3, Similarity::Category).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn mmr_lambda_zero_spreads_over_categories() {
        let cands = vec![
            Candidate::new(0, 0.9, 0),
            Candidate::new(1, 0.8, 0),
            Candidate::new(2, 0.7, 1),
            Candidate::new(3, 0.6, 1),
            Candidate::new(4, 0.1, 2),
        ];
        let out = mmr_rerank(&cands, 0.0, 3, Similarity::Category).unwrap();
        assert_eq!(category_coverage(&cands, &out), 3);
        assert_eq!(out[0], 0);
    }

    #[test]
    fn mmr_with_cosine_similarity() {
        let cands = example();
        let vecs = vec![vec![1.0, 0.0], vec![1.0, 0.01], vec![0.0, 1.0]];
        assert_eq!(mmr_rerank(&cands, 0.5, 2, Similarity::Cosine(&vecs)).unwrap(), vec![1, 3]);
        assert!(mmr_rerank(&cands, 0.5, 2, Similarity::Cosine(&vecs[..2])).is_err());
    }

    #[test]
    fn dum_takes_uncovered_category_first() {
        assert_eq!(dum_rerank(&example(), 3).unwrap(), vec![1, 3, 2]);
    }

    #[test]
    fn dum_degenerate_inputs_follow_relevance() {
        let one_cat: Vec<_> = (0..5).map(|i| Candidate::new(i, (i * 7 % 5) as f64, 4)).collect();
        assert_eq!(dum_rerank(&one_cat, 5).unwrap(), relevance_sort(&one_cat));
        let distinct: Vec<_> = (0..5).map(|i| Candidate::new(i, (i * 3 % 5) as f64, i)).collect();
        assert_eq!(dum_rerank(&distinct, 5).unwrap(), relevance_sort(&distinct));
    }

    #[test]
    fn ties_go_to_lower_item() {
        let cands = vec![Candidate::new(9, 0.5, 0), Candidate::new(4, 0.5, 1)];
        assert_eq!(mmr_rerank(&cands, 1.0, 2, Similarity::Category).unwrap(), vec![4, 9]);
        assert_eq!(dum_rerank(&cands, 2).unwrap(), vec![4, 9]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(dum_rerank(&[], 0), Err(Error::Empty(_))));
        assert!(mmr_rerank(&[], 0.5, 0, Similarity::Category).is_err());
        assert!(dum_rerank(&example(), 4).is_err());
        assert!(mmr_rerank(&example(), 1.5, 2, Similarity::Category).is_err());
        assert!(dum_rerank(&[Candidate::new(0, f64::NAN, 0)], 1).is_err());
        assert!(dum_rerank(&[Candidate::new(0, 1.0, 0), Candidate::new(0, 2.0, 1)], 1).is_err());
    }

    fn candidates() -> impl Strategy<Value = Vec<Candidate>> {
        prop::collection::vec((-5.0f64..5.0, 0usize..6), 1..30).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (r, c))| Candidate::new(i * 3 + 1, r, c))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn outputs_are_distinct_candidates(cands in candidates(), lambda in 0.0f64..=1.0, frac in 0.0f64..=1.0) {
            let k = ((cands.len() as f64) * frac).round() as usize;
            let ids: HashSet<usize> = cands.iter().map(|c| c.item).collect();
            for out in [mmr_rerank(&cands, lambda, k, Similarity::Category).unwrap(), dum_rerank(&cands, k).unwrap()] {
                prop_assert_eq!(out.len(), k);
                prop_assert_eq!(out.iter().collect::<HashSet<_>>().len(), k);
                prop_assert!(out.iter().all(|i| ids.contains(i)));
            }
        }

        #[test]
        fn mmr_lambda_one_matches_sort(cands in candidates()) {
            let out = mmr_rerank(&cands, 1.0, cands.len(), Similarity::Category).unwrap();
            prop_assert_eq!(out, relevance_sort(&cands));
        }

        #[test]
        fn dum_never_loses_coverage(cands in candidates(), frac in 0.0f64..=1.0) {
            let k = ((cands.len() as f64) * frac).round() as usize;
            let dum = dum_rerank(&cands, k).unwrap();
            let base: Vec<usize> = relevance_sort(&cands).into_iter().take(k).collect();
            prop_assert!(category_coverage(&cands, &dum) >= category_coverage(&cands, &base));
        }
    }
}
