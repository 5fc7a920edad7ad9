use std::collections::HashMap;

use rand::Rng;

use crate::data::{BipartiteGraph, ItemCategoryTable};
use crate::error::{Error, Result};

/// One `(user, item, label, category)` training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainingSample {
    pub user: usize,
    pub item: usize,
    pub label: bool,
    pub category: usize,
}

impl TrainingSample {
    pub fn positive(user: usize, item: usize, table: &ItemCategoryTable) -> Result<Self> {
        Ok(Self {
            user,
            item,
            label: true,
            category: table.category(item)?,
        })
    }

    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

const EXCLUSION_ATTEMPTS: usize = 64;

/// Category-boosted negative sampler.
///
/// For each positive `(u, i)` it emits `rate` negatives. Each negative comes from
/// the items sharing `i`'s category (minus `i`) with probability `beta`, otherwise
/// from the whole universe minus `i`; an empty same-category pool falls back to
/// the universe.
#[derive(Debug, Clone)]
pub struct NegativeSampler<'a> {
    universe: Vec<usize>,
    universe_pos: HashMap<usize, usize>,
    by_category: Vec<Vec<usize>>,
    category_pos: HashMap<usize, usize>,
    table: &'a ItemCategoryTable,
    rate: usize,
    beta: f64,
    exclude_seen: Option<&'a BipartiteGraph>,
}

impl<'a> NegativeSampler<'a> {
    pub fn new(universe: &[usize], table: &'a ItemCategoryTable, rate: usize, beta: f64) -> Result<Self> {
        if rate == 0 {
            return Err(Error::Config("negative rate must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("similar sampling weight must lie in [0, 1], got {beta}")));
        }
        let mut items = universe.to_vec();
        items.sort_unstable();
        items.dedup();
        if items.len() < 2 {
            return Err(Error::Config("item universe needs at least two items".into()));
        }
        let mut by_category = vec![Vec::new(); table.num_categories()];
        let mut category_pos = HashMap::with_capacity(items.len());
        for &i in &items {
            let c = table.category(i)?;
            category_pos.insert(i, by_category[c].len());
            by_category[c].push(i);
        }
        let universe_pos = items.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        Ok(Self {
            universe: items,
            universe_pos,
            by_category,
            category_pos,
            table,
            rate,
            beta,
            exclude_seen: None,
        })
    }

    /// Reject candidates the user already interacted with in `graph` (off by default).
    pub fn excluding_seen(mut self, graph: &'a BipartiteGraph) -> Self {
        self.exclude_seen = Some(graph);
        self
    }

    /// Returns the positives followed by their negatives, `rate` per positive.
    pub fn sample<R: Rng + ?Sized>(&self, positives: &[TrainingSample], rng: &mut R) -> Result<Vec<TrainingSample>> {
        let mut out = Vec::with_capacity(positives.len() * (1 + self.rate));
        out.extend_from_slice(positives);
        for pos in positives {
            if !pos.label {
                return Err(Error::Config("negative sampling expects positive samples".into()));
            }
            for _ in 0..self.rate {
                let item = self.draw(pos, rng)?;
                out.push(TrainingSample {
                    user: pos.user,
                    item,
                    label: false,
                    category: self.table.category(item)?,
                });
            }
        }
        Ok(out)
    }

    fn draw<R: Rng + ?Sized>(&self, pos: &TrainingSample, rng: &mut R) -> Result<usize> {
        let similar = rng.random::<f64>() < self.beta;
        let category = self.table.category(pos.item)?;
        let mut candidate = self.draw_once(pos.item, category, similar, rng);
        if let Some(graph) = self.exclude_seen {
            let seen = graph.user_items(pos.user);
            for _ in 0..EXCLUSION_ATTEMPTS {
                if seen.binary_search(&candidate).is_err() {
                    break;
                }
                candidate = self.draw_once(pos.item, category, similar, rng);
            }
        }
        Ok(candidate)
    }

    fn draw_once<R: Rng + ?Sized>(&self, item: usize, category: usize, similar: bool, rng: &mut R) -> usize {
        let same = &self.by_category[category];
        let same_has_other = same.len() > usize::from(self.category_pos.contains_key(&item));
        if similar && same_has_other {
            uniform_excluding(same, self.category_pos.get(&item).copied(), rng)
        } else {
            uniform_excluding(&self.universe, self.universe_pos.get(&item).copied(), rng)
        }
    }
}

/// Uniform draw from `pool` skipping the element at `skip`.
fn uniform_excluding<R: Rng + ?Sized>(pool: &[usize], skip: Option<usize>, rng: &mut R) -> usize {
    match skip {
        Some(s) => {
            let r = rng.random_range(0..pool.len() - 1);
            pool[if r >= s { r + 1 } else { r }]
        }
        None => pool[rng.random_range(0..pool.len())],
    }
}

/// Convenience wrapper over [`NegativeSampler`].
pub fn boosted_negative_sampling<R: Rng + ?Sized>(
    positives: &[TrainingSample],
    universe: &[usize],
    rate: usize,
    table: &ItemCategoryTable,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<TrainingSample>> {
    NegativeSampler::new(universe, table, rate, beta)?.sample(positives, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    /// items 0..10 in category 0, 10..100 in category 1
    fn catalog() -> ItemCategoryTable {
        ItemCategoryTable::new((0..100).map(|i| usize::from(i >= 10)).collect(), 2).unwrap()
    }

    #[test]
    fn beta_zero_is_uniform_over_rest() {
        let t = catalog();
        let universe: Vec<usize> = (0..100).collect();
        let pos = [TrainingSample::positive(0, 3, &t).unwrap()];
        let s = NegativeSampler::new(&universe, &t, 4, 0.0).unwrap();
        let mut rng = seeded(5);
        let mut counts = vec![0usize; 100];
        let draws = 198_000;
        for _ in 0..draws / 4 {
            for x in &s.sample(&pos, &mut rng).unwrap()[1..] {
                counts[x.item] += 1;
            }
        }
        assert_eq!(counts[3], 0);
        let expect = draws as f64 / 99.0;
        let sd = (expect * (1.0 - 1.0 / 99.0)).sqrt();
        for (i, &c) in counts.iter().enumerate().filter(|(i, _)| *i != 3) {
            assert!((c as f64 - expect).abs() < 5.0 * sd, "item {i}: {c}");
        }
    }

    #[test]
    fn beta_one_stays_in_category() {
        let t = catalog();
        let universe: Vec<usize> = (0..100).collect();
        let pos = [TrainingSample::positive(0, 3, &t).unwrap(), TrainingSample::positive(1, 50, &t).unwrap()];
        let out = boosted_negative_sampling(&pos, &universe, 10, &t, 1.0, &mut seeded(1)).unwrap();
        for x in out.iter().filter(|x| !x.label) {
            let src = if x.user == 0 { 3 } else { 50 };
            assert_eq!(x.category, t.category(src).unwrap());
            assert_ne!(x.item, src);
        }
    }

    #[test]
    fn singleton_category_falls_back() {
        let t = ItemCategoryTable::new(vec![0, 1, 1], 2).unwrap();
        let pos = [TrainingSample::positive(0, 0, &t).unwrap()];
        let out = boosted_negative_sampling(&pos, &[0, 1, 2], 20, &t, 1.0, &mut seeded(2)).unwrap();
        assert!(out[1..].iter().all(|x| x.item != 0 && x.category == 1));
    }

    #[test]
    fn boosted_mixture_frequency() {
        // P(same category) = beta + (1 - beta) * 9 / 99
        let t = catalog();
        let universe: Vec<usize> = (0..100).collect();
        let pos = [TrainingSample::positive(0, 3, &t).unwrap()];
        let s = NegativeSampler::new(&universe, &t, 1, 0.3).unwrap();
        let mut rng = seeded(9);
        let draws = 100_000;
        let mut same = 0usize;
        for _ in 0..draws {
            if s.sample(&pos, &mut rng).unwrap()[1].category == 0 {
                same += 1;
            }
        }
        let p = 0.3 + 0.7 * 9.0 / 99.0;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = same as f64 / draws as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "freq {freq} vs {p}");
    }

    #[test]
    fn tiny_universe_rejected() {
        let t = ItemCategoryTable::new(vec![0], 1).unwrap();
        assert!(NegativeSampler::new(&[0], &t, 4, 0.0).is_err());
        let t = catalog();
        assert!(NegativeSampler::new(&[0, 1], &t, 0, 0.0).is_err());
        assert!(NegativeSampler::new(&[0, 1], &t, 1, 1.5).is_err());
    }

    #[test]
    fn excluding_seen_avoids_train_items() {
        let t = catalog();
        let universe: Vec<usize> = (0..100).collect();
        let g = BipartiteGraph::from_edges(1, 100, (0..9).map(|i| (0, i)));
        let s = NegativeSampler::new(&universe, &t, 50, 1.0).unwrap().excluding_seen(&g);
        let pos = [TrainingSample::positive(0, 0, &t).unwrap()];
        let out = s.sample(&pos, &mut seeded(4)).unwrap();
        assert!(out[1..].iter().all(|x| x.item == 9));
    }

    proptest! {
        #[test]
        fn counts_and_no_self_negatives(
            n_pos in 1usize..20, rate in 1usize..6, beta in 0.0..=1.0f64, seed in any::<u64>()
        ) {
            let t = catalog();
            let universe: Vec<usize> = (0..100).collect();
            let pos: Vec<_> = (0..n_pos).map(|k| TrainingSample::positive(k, (k * 37) % 100, &t).unwrap()).collect();
            let a = boosted_negative_sampling(&pos, &universe, rate, &t, beta, &mut seeded(seed)).unwrap();
            let b = boosted_negative_sampling(&pos, &universe, rate, &t, beta, &mut seeded(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), n_pos * (1 + rate));
            for (k, p) in pos.iter().enumerate() {
                let negs = &a[n_pos + k * rate..n_pos + (k + 1) * rate];
                prop_assert!(negs.iter().all(|x| !x.label && x.user == p.user && x.item != p.item));
                prop_assert!(negs.iter().all(|x| x.category == t.category(x.item).unwrap()));
            }
        }
    }
}
