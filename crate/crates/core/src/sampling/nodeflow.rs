use std::collections::HashMap;

use rand::seq::{index, IndexedRandom};
use rand::Rng;

use crate::data::{BipartiteGraph, ItemCategoryTable, NodeKind};
use crate::error::{Error, Result};

use super::histogram_and_rebalance;

/// Layered sub-graph for a depth-K model.
///
/// `hop(0)` holds the seeds. `hop(k)` starts with `hop(k - 1)` in the same order
/// and appends newly sampled nodes, so a node keeps its position across hops.
/// `block(k)[p]` lists, as positions into `hop(k)`, the nodes sampled for
/// `hop(k - 1)[p]`; the first entry is always the node itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFlow {
    hops: Vec<Vec<usize>>,
    blocks: Vec<Vec<Vec<usize>>>,
    seed_index: HashMap<usize, usize>,
}

impl NodeFlow {
    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn seeds(&self) -> &[usize] {
        &self.hops[0]
    }

    /// Global node ids at hop `k`, `0 <= k <= depth`.
    pub fn hop(&self, k: usize) -> &[usize] {
        &self.hops[k]
    }

    /// Sampled lists connecting hop `k - 1` to hop `k`, `1 <= k <= depth`.
    pub fn block(&self, k: usize) -> &[Vec<usize>] {
        &self.blocks[k - 1]
    }

    /// Global ids sampled for the node at position `p` of hop `k - 1`.
    pub fn sampled_nodes(&self, k: usize, p: usize) -> impl Iterator<Item = usize> + '_ {
        self.blocks[k - 1][p].iter().map(move |&q| self.hops[k][q])
    }

    pub fn seed_position(&self, node: usize) -> Option<usize> {
        self.seed_index.get(&node).copied()
    }

    /// Full-neighborhood flow: every node keeps all of its neighbors at every hop.
    pub fn full(graph: &BipartiteGraph, seeds: &[usize], depth: usize) -> Result<Self> {
        build(graph, seeds, depth, |_, neighbors| Ok(neighbors.to_vec()))
    }
}

/// Category-rebalanced neighbor discovery.
///
/// User nodes draw `min(fanout, degree)` distinct items with probabilities from
/// [`histogram_and_rebalance`]; item nodes draw their users uniformly. Each node is
/// always included in its own sampled list, and the union of a hop's sampled
/// nodes seeds the next hop.
pub fn discover_neighbors<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    seeds: &[usize],
    depth: usize,
    fanout: usize,
    table: &ItemCategoryTable,
    alpha: f64,
    rng: &mut R,
) -> Result<NodeFlow> {
    if fanout == 0 {
        return Err(Error::Config("fan-out must be at least 1".into()));
    }
    let m = graph.num_users();
    build(graph, seeds, depth, |v, neighbors| {
        let take = fanout.min(neighbors.len());
        if take == 0 {
            return Ok(Vec::new());
        }
        match graph.kind(v)? {
            NodeKind::User(_) => {
                let items: Vec<usize> = neighbors.iter().map(|&n| n - m).collect();
                let p = histogram_and_rebalance(&items, table, alpha)?;
                let weighted: Vec<(usize, f64)> = neighbors.iter().copied().zip(p).collect();
                let chosen = weighted
                    .choose_multiple_weighted(rng, take, |x| x.1)
                    .map_err(|e| Error::Config(format!("neighbor weights: {e}")))?;
                Ok(chosen.map(|x| x.0).collect())
            }
            NodeKind::Item(_) => Ok(index::sample(rng, neighbors.len(), take)
                .into_iter()
                .map(|j| neighbors[j])
                .collect()),
        }
    })
}

fn build(
    graph: &BipartiteGraph,
    seeds: &[usize],
    depth: usize,
    mut sample: impl FnMut(usize, &[usize]) -> Result<Vec<usize>>,
) -> Result<NodeFlow> {
    if depth == 0 {
        return Err(Error::Config("depth must be at least 1".into()));
    }
    let mut current: Vec<usize> = Vec::with_capacity(seeds.len());
    let mut position: HashMap<usize, usize> = HashMap::with_capacity(seeds.len());
    for &s in seeds {
        graph.kind(s)?;
        if let std::collections::hash_map::Entry::Vacant(slot) = position.entry(s) {
            slot.insert(current.len());
            current.push(s);
        }
    }
    let seed_index = position.clone();
    let mut hops = vec![current.clone()];
    let mut blocks = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut next = current.clone();
        let mut block = Vec::with_capacity(current.len());
        for (p, &v) in current.iter().enumerate() {
            let neighbors = graph.neighbors(v)?;
            let mut list = vec![p];
            for w in sample(v, &neighbors)? {
                let q = *position.entry(w).or_insert_with(|| {
                    next.push(w);
                    next.len() - 1
                });
                list.push(q);
            }
            block.push(list);
        }
        blocks.push(block);
        hops.push(next.clone());
        current = next;
    }
    Ok(NodeFlow {
        hops,
        blocks,
        seed_index,
    })
}
