use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, WithPath};

use super::{
    build_graph, check_categories, k_core_filter, read_categories, read_interactions, temporal_split,
    BipartiteGraph, DatasetSplit, IdMap, Interaction, ItemCategoryTable, RawCategories,
};

pub const TRAIN_FILE: &str = "train.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const TEST_FILE: &str = "test.csv";
pub const CATEGORIES_FILE: &str = "categories.csv";
pub const USER_MAP_FILE: &str = "user_map.csv";
pub const ITEM_MAP_FILE: &str = "item_map.csv";
pub const CATEGORY_MAP_FILE: &str = "category_map.csv";
pub const GRAPH_FILE: &str = "graph.csv";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for SplitPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "validation" | "valid" | "val" => Ok(SplitPart::Validation),
            "test" => Ok(SplitPart::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub categories: usize,
    pub graph_edges: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// A processed dataset: chronological split plus the training graph built from it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: BipartiteGraph,
    pub users: IdMap,
    pub items: IdMap,
    pub categories: ItemCategoryTable,
    pub split: DatasetSplit,
    raw_categories: RawCategories,
}

impl Dataset {
    /// k-core filter, chronological split, graph build.
    pub fn prepare(
        interactions: &[Interaction],
        raw_categories: &RawCategories,
        k_core: usize,
        ratios: [f64; 3],
    ) -> Result<Self> {
        check_categories(interactions, raw_categories)?;
        let filtered = k_core_filter(interactions, k_core);
        if filtered.is_empty() {
            return Err(Error::EmptyAfterKCore(k_core));
        }
        let split = temporal_split(&filtered, ratios)?;
        Self::from_split(split, raw_categories)
    }

    pub fn from_split(split: DatasetSplit, raw_categories: &RawCategories) -> Result<Self> {
        let built = build_graph(&split.train)?;
        let categories = ItemCategoryTable::from_raw(&built.items, raw_categories)?;
        let raw_categories = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .map(|x| {
                raw_categories
                    .get(&x.item)
                    .map(|c| (x.item.clone(), c.to_owned()))
                    .ok_or_else(|| Error::MissingCategory(x.item.clone()))
            })
            .collect::<Result<RawCategories>>()?;
        Ok(Self {
            graph: built.graph,
            users: built.users,
            items: built.items,
            categories,
            split,
            raw_categories,
        })
    }

    pub fn part(&self, part: SplitPart) -> &[Interaction] {
        match part {
            SplitPart::Train => &self.split.train,
            SplitPart::Validation => &self.split.validation,
            SplitPart::Test => &self.split.test,
        }
    }

    /// Held-out items per user, in user-index order. Users or items unknown to the
    /// training graph are dropped; users left with no items are omitted.
    pub fn targets(&self, part: SplitPart) -> Vec<(usize, Vec<usize>)> {
        let mut by_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in self.part(part) {
            if let (Some(u), Some(i)) = (self.users.index_of(&x.user), self.items.index_of(&x.item)) {
                by_user.entry(u).or_default().push(i);
            }
        }
        by_user
            .into_iter()
            .map(|(u, mut items)| {
                items.sort_unstable();
                items.dedup();
                (u, items)
            })
            .collect()
    }

    pub fn stats(&self) -> DatasetStats {
        let s = &self.split;
        let mut all_users = IdMap::default();
        let mut all_items = IdMap::default();
        for x in s.train.iter().chain(&s.validation).chain(&s.test) {
            all_users.get_or_insert(&x.user);
            all_items.get_or_insert(&x.item);
        }
        DatasetStats {
            users: all_users.len(),
            items: all_items.len(),
            interactions: s.train.len() + s.validation.len() + s.test.len(),
            categories: self.categories.num_categories(),
            graph_edges: self.graph.num_edges(),
            train: s.train.len(),
            validation: s.validation.len(),
            test: s.test.len(),
        }
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_path(dir)?;
        write_interactions(&dir.join(TRAIN_FILE), &self.split.train)?;
        write_interactions(&dir.join(VALIDATION_FILE), &self.split.validation)?;
        write_interactions(&dir.join(TEST_FILE), &self.split.test)?;

        let mut seen = IdMap::default();
        let mut rows = Vec::new();
        for x in self.split.train.iter().chain(&self.split.validation).chain(&self.split.test) {
            if seen.index_of(&x.item).is_none() {
                seen.get_or_insert(&x.item);
                rows.push([x.item.clone(), self.raw_categories.get(&x.item).unwrap_or_default().to_owned()]);
            }
        }
        write_csv(&dir.join(CATEGORIES_FILE), &["item_id", "category_id"], rows)?;
        write_id_map(&dir.join(USER_MAP_FILE), self.users.iter().map(|(i, r)| (r.to_owned(), i)))?;
        write_id_map(&dir.join(ITEM_MAP_FILE), self.items.iter().map(|(i, r)| (r.to_owned(), i)))?;
        write_id_map(
            &dir.join(CATEGORY_MAP_FILE),
            (0..self.categories.num_categories()).map(|c| (self.categories.label(c).to_owned(), c)),
        )?;
        write_csv(
            &dir.join(GRAPH_FILE),
            &["user", "item"],
            self.graph.edges().map(|(u, i)| [u.to_string(), i.to_string()]),
        )?;
        let path = dir.join(STATS_FILE);
        let mut f = BufWriter::new(File::create(&path).with_path(&path)?);
        serde_json::to_writer_pretty(&mut f, &self.stats()).with_path(&path)?;
        writeln!(f).with_path(&path)?;
        Ok(())
    }

    /// Reloads a directory written by [`Dataset::write_dir`] and checks the
    /// persisted index maps against the rebuilt graph.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            let path = dir.join(name);
            File::open(&path).with_path(&path)
        };
        let read = |name: &str| read_interactions(open(name)?).with_path(&dir.join(name));
        let split = DatasetSplit {
            train: read(TRAIN_FILE)?,
            validation: read(VALIDATION_FILE)?,
            test: read(TEST_FILE)?,
        };
        let raw = read_categories(open(CATEGORIES_FILE)?).with_path(&dir.join(CATEGORIES_FILE))?;
        let data = Self::from_split(split, &raw)?;
        for (name, map) in [(USER_MAP_FILE, &data.users), (ITEM_MAP_FILE, &data.items)] {
            let path = dir.join(name);
            let persisted = read_id_map(&path)?;
            if &persisted != map {
                return Err(Error::Config("index map disagrees with the training split".into()).at(path));
            }
        }
        Ok(data)
    }
}

pub fn write_interactions(path: &Path, rows: &[Interaction]) -> Result<()> {
    write_csv(
        path,
        &["user_id", "item_id", "timestamp"],
        rows.iter().map(|x| [x.user.clone(), x.item.clone(), x.timestamp.to_string()]),
    )
}

fn write_id_map(path: &Path, rows: impl Iterator<Item = (String, usize)>) -> Result<()> {
    write_csv(path, &["raw_id", "index"], rows.map(|(r, i)| [r, i.to_string()]))
}

fn read_id_map(path: &Path) -> Result<IdMap> {
    let mut reader = csv::Reader::from_path(path).with_path(path)?;
    let mut map = IdMap::default();
    for record in reader.records() {
        let record = record.with_path(path)?;
        let index: usize = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: record.position().map(|p| p.line()).unwrap_or(0),
                message: "bad index".into(),
            })
            .with_path(path)?;
        if map.get_or_insert(&record[0]) != index {
            return Err(Error::Config("index map is not contiguous".into()).at(path));
        }
    }
    Ok(map)
}

pub(crate) fn write_csv<const W: usize>(
    path: &Path,
    header: &[&str; W],
    rows: impl IntoIterator<Item = [String; W]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_path(path)?;
    w.write_record(header).with_path(path)?;
    for row in rows {
        w.write_record(&row).with_path(path)?;
    }
    w.flush().with_path(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Interaction>, RawCategories) {
        let mut rows = Vec::new();
        let mut t = 0;
        for u in 0..3 {
            for i in 0..4 {
                rows.push(Interaction::new(format!("u{u}"), format!("i{i}"), t));
                t += 1;
            }
        }
        let cats = (0..4).map(|i| (format!("i{i}"), format!("c{}", i % 2))).collect();
        (rows, cats)
    }

    #[test]
    fn empty_after_k_core() {
        let (rows, cats) = toy();
        assert!(matches!(
            Dataset::prepare(&rows, &cats, 10, [0.6, 0.2, 0.2]),
            Err(Error::EmptyAfterKCore(10))
        ));
    }

    #[test]
    fn round_trips_through_directory() {
        let (rows, cats) = toy();
        let data = Dataset::prepare(&rows, &cats, 2, [0.6, 0.2, 0.2]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write_dir(dir.path()).unwrap();
        let back = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!(back.graph, data.graph);
        assert_eq!(back.users, data.users);
        assert_eq!(back.categories, data.categories);
        assert_eq!(back.split, data.split);
        assert_eq!(back.stats(), data.stats());
    }

    #[test]
    fn targets_drop_unknown_entities() {
        let split = DatasetSplit {
            train: vec![Interaction::new("a", "x", 0), Interaction::new("b", "y", 1)],
            validation: vec![],
            test: vec![
                Interaction::new("b", "x", 2),
                Interaction::new("b", "x", 3),
                Interaction::new("c", "x", 4),
                Interaction::new("a", "z", 5),
            ],
        };
        let cats: RawCategories = [("x", "0"), ("y", "1"), ("z", "1")].into_iter().collect();
        let data = Dataset::from_split(split, &cats).unwrap();
        assert_eq!(data.targets(SplitPart::Test), vec![(1, vec![0])]);
    }
}
