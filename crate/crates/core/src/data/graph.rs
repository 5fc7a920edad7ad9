use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

use super::{Interaction, RawCategories};

/// Contiguous re-indexing of raw identifiers, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn get_or_insert(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.raw.len();
        self.raw.push(raw.to_owned());
        self.index.insert(raw.to_owned(), i);
        i
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, index: usize) -> &str {
        &self.raw[index]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.raw.iter().enumerate().map(|(i, r)| (i, r.as_str()))
    }
}

impl<S: AsRef<str>> FromIterator<S> for IdMap {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        let mut map = IdMap::default();
        for s in iter {
            map.get_or_insert(s.as_ref());
        }
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    User(usize),
    Item(usize),
}

/// Undirected user–item graph. Node ids are global: users occupy
/// `[0, M)` and items `[M, M + N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    user_adj: Vec<Vec<usize>>,
    item_adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds from distinct `(user, item)` index pairs; duplicates are collapsed.
    pub fn from_edges(num_users: usize, num_items: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut user_sets = vec![BTreeSet::new(); num_users];
        for (u, i) in edges {
            user_sets[u].insert(i);
        }
        let mut item_adj = vec![Vec::new(); num_items];
        for (u, items) in user_sets.iter().enumerate() {
            for &i in items {
                item_adj[i].push(u);
            }
        }
        let user_adj = user_sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Self { user_adj, item_adj }
    }

    pub fn num_users(&self) -> usize {
        self.user_adj.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_adj.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users() + self.num_items()
    }

    pub fn num_edges(&self) -> usize {
        self.user_adj.iter().map(Vec::len).sum()
    }

    /// Item indices adjacent to user `u`, ascending.
    pub fn user_items(&self, u: usize) -> &[usize] {
        &self.user_adj[u]
    }

    /// User indices adjacent to item `i`, ascending.
    pub fn item_users(&self, i: usize) -> &[usize] {
        &self.item_adj[i]
    }

    pub fn user_adjacency(&self) -> &[Vec<usize>] {
        &self.user_adj
    }

    pub fn item_node(&self, item: usize) -> usize {
        self.num_users() + item
    }

    pub fn kind(&self, node: usize) -> Result<NodeKind> {
        let m = self.num_users();
        if node < m {
            Ok(NodeKind::User(node))
        } else if node < self.num_nodes() {
            Ok(NodeKind::Item(node - m))
        } else {
            Err(Error::UnknownNode(node))
        }
    }

    /// Global ids of the neighbors of a global node id.
    pub fn neighbors(&self, node: usize) -> Result<Vec<usize>> {
        Ok(match self.kind(node)? {
            NodeKind::User(u) => self.user_adj[u].iter().map(|&i| self.item_node(i)).collect(),
            NodeKind::Item(i) => self.item_adj[i].clone(),
        })
    }

    pub fn degree(&self, node: usize) -> Result<usize> {
        Ok(match self.kind(node)? {
            NodeKind::User(u) => self.user_adj[u].len(),
            NodeKind::Item(i) => self.item_adj[i].len(),
        })
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_adj
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }
}

#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: BipartiteGraph,
    pub users: IdMap,
    pub items: IdMap,
}

/// Re-indexes users and items in order of first appearance and builds the graph.
pub fn build_graph(train: &[Interaction]) -> Result<GraphBuild> {
    if train.is_empty() {
        return Err(Error::Empty("training interactions"));
    }
    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let edges: Vec<_> = train
        .iter()
        .map(|x| (users.get_or_insert(&x.user), items.get_or_insert(&x.item)))
        .collect();
    let graph = BipartiteGraph::from_edges(users.len(), items.len(), edges);
    Ok(GraphBuild { graph, users, items })
}

/// Dense category id for every indexed item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCategoryTable {
    by_item: Vec<usize>,
    labels: Vec<String>,
}

impl ItemCategoryTable {
    pub fn new(by_item: Vec<usize>, num_categories: usize) -> Result<Self> {
        if num_categories == 0 {
            return Err(Error::Config("at least one category is required".into()));
        }
        if let Some(&c) = by_item.iter().find(|&&c| c >= num_categories) {
            return Err(Error::OutOfRange {
                what: "category",
                index: c,
                len: num_categories,
            });
        }
        let labels = (0..num_categories).map(|c| c.to_string()).collect();
        Ok(Self { by_item, labels })
    }

    /// Restricts raw labels to the indexed items. Labels are sorted (numerically when
    /// they are all integers) and numbered densely.
    pub fn from_raw(items: &IdMap, raw: &RawCategories) -> Result<Self> {
        let item_labels: Vec<&str> = items
            .iter()
            .map(|(_, id)| raw.get(id).ok_or_else(|| Error::MissingCategory(id.to_owned())))
            .collect::<Result<_>>()?;
        let mut labels: Vec<&str> = item_labels.clone();
        labels.sort_unstable();
        labels.dedup();
        if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
            labels.sort_by_key(|l| l.parse::<i64>().unwrap());
        }
        if labels.is_empty() {
            return Err(Error::Config("at least one category is required".into()));
        }
        let dense: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        Ok(Self {
            by_item: item_labels.iter().map(|l| dense[l]).collect(),
            labels: labels.into_iter().map(str::to_owned).collect(),
        })
    }

    pub fn category(&self, item: usize) -> Result<usize> {
        self.by_item.get(item).copied().ok_or(Error::OutOfRange {
            what: "item",
            index: item,
            len: self.by_item.len(),
        })
    }

    pub fn num_categories(&self) -> usize {
        self.labels.len()
    }

    pub fn num_items(&self) -> usize {
        self.by_item.len()
    }

    pub fn label(&self, category: usize) -> &str {
        &self.labels[category]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.by_item
    }

    /// Item indices grouped by category.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_categories()];
        for (i, &c) in self.by_item.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type EdgeSet = BTreeSet<(usize, usize)>;

    fn edge_sets(g: &BipartiteGraph) -> (EdgeSet, EdgeSet) {
        let from_users = g.edges().collect();
        let from_items = (0..g.num_items())
            .flat_map(|i| g.item_users(i).iter().map(move |&u| (u, i)))
            .collect();
        (from_users, from_items)
    }

    #[test]
    fn single_interaction() {
        let b = build_graph(&[Interaction::new("u", "i", 0)]).unwrap();
        assert_eq!((b.graph.num_users(), b.graph.num_items()), (1, 1));
        assert_eq!(b.graph.user_items(0), &[0]);
        assert_eq!(b.graph.item_users(0), &[0]);
    }

    #[test]
    fn duplicates_collapse() {
        let rows = vec![Interaction::new("u", "i", 0); 3];
        let b = build_graph(&rows).unwrap();
        assert_eq!(b.graph.num_edges(), 1);
    }

    #[test]
    fn complete_two_by_two() {
        let rows: Vec<_> = [("a", "x"), ("a", "y"), ("b", "x"), ("b", "y")]
            .iter()
            .map(|(u, i)| Interaction::new(*u, *i, 0))
            .collect();
        let g = build_graph(&rows).unwrap().graph;
        for n in 0..g.num_nodes() {
            assert_eq!(g.degree(n).unwrap(), 2);
        }
        let (a, b) = edge_sets(&g);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_train_rejected() {
        assert!(build_graph(&[]).is_err());
    }

    #[test]
    fn node_kinds() {
        let g = BipartiteGraph::from_edges(2, 3, [(0, 2), (1, 0)]);
        assert_eq!(g.kind(1).unwrap(), NodeKind::User(1));
        assert_eq!(g.kind(4).unwrap(), NodeKind::Item(2));
        assert!(matches!(g.kind(5), Err(Error::UnknownNode(5))));
        assert_eq!(g.neighbors(0).unwrap(), vec![4]);
        assert_eq!(g.neighbors(2).unwrap(), vec![1]);
    }

    #[test]
    fn category_labels_dense_and_numeric() {
        let items: IdMap = ["a", "b", "c"].into_iter().collect();
        let raw: RawCategories = [("a", "10"), ("b", "2"), ("c", "10"), ("z", "99")].into_iter().collect();
        let table = ItemCategoryTable::from_raw(&items, &raw).unwrap();
        assert_eq!(table.num_categories(), 2);
        assert_eq!(table.as_slice(), &[1, 0, 1]);
        assert_eq!(table.label(0), "2");
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric(edges in prop::collection::vec((0..6usize, 0..9usize), 1..40)) {
            let g = BipartiteGraph::from_edges(6, 9, edges);
            let (a, b) = edge_sets(&g);
            prop_assert_eq!(a, b);
        }
    }
}
