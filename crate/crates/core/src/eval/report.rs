use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, IdMap, ItemCategoryTable, SplitPart};
use crate::error::{Error, Result, WithPath};
use crate::model::ModelParameters;

use super::{accuracy, diversity, infer_all, retrieve_topk, RecommendationList};

pub const MEAN_ROW: &str = "__mean__";
pub const DEFAULT_K_EVAL: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub recall: f64,
    pub hit: f64,
    pub coverage: f64,
    pub entropy: f64,
    pub gini: f64,
}

impl MetricValues {
    fn mean<'a>(rows: impl ExactSizeIterator<Item = &'a MetricValues>) -> Self {
        let n = rows.len();
        if n == 0 {
            return Self::default();
        }
        let mut sum = Self::default();
        for r in rows {
            sum.recall += r.recall;
            sum.hit += r.hit;
            sum.coverage += r.coverage;
            sum.entropy += r.entropy;
            sum.gini += r.gini;
        }
        let n = n as f64;
        Self {
            recall: sum.recall / n,
            hit: sum.hit / n,
            coverage: sum.coverage / n,
            entropy: sum.entropy / n,
            gini: sum.gini / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub k_eval: usize,
    /// `(user index, metrics)` for every evaluated user.
    pub rows: Vec<(usize, MetricValues)>,
    pub mean: MetricValues,
}

#[derive(Serialize, Deserialize)]
struct Row {
    user: String,
    recall: f64,
    hit: f64,
    coverage: f64,
    entropy: f64,
    gini: f64,
}

impl Row {
    fn new(user: String, v: &MetricValues) -> Self {
        Self {
            user,
            recall: v.recall,
            hit: v.hit,
            coverage: v.coverage,
            entropy: v.entropy,
            gini: v.gini,
        }
    }

    fn values(&self) -> MetricValues {
        MetricValues {
            recall: self.recall,
            hit: self.hit,
            coverage: self.coverage,
            entropy: self.entropy,
            gini: self.gini,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    k_eval: usize,
    rows: Vec<Row>,
}

impl MetricsReport {
    /// Scores the lists of users that have at least one held-out item.
    pub fn build(
        recs: &[RecommendationList],
        targets: &[(usize, Vec<usize>)],
        table: &ItemCategoryTable,
        k_eval: usize,
    ) -> Result<Self> {
        let by_user: std::collections::HashMap<usize, &RecommendationList> = recs.iter().map(|r| (r.user, r)).collect();
        let mut rows = Vec::with_capacity(targets.len());
        for (u, held_out) in targets {
            let Some(rec) = by_user.get(u) else { continue };
            if held_out.is_empty() {
                continue;
            }
            let a = accuracy(&rec.items, held_out);
            let d = diversity(&rec.items, table)?;
            rows.push((
                *u,
                MetricValues {
                    recall: a.recall,
                    hit: a.hit,
                    coverage: d.coverage,
                    entropy: d.entropy,
                    gini: d.gini,
                },
            ));
        }
        let mean = MetricValues::mean(rows.iter().map(|r| &r.1));
        Ok(Self { k_eval, rows, mean })
    }

    fn labelled_rows(&self, users: &IdMap) -> Vec<Row> {
        self.rows
            .iter()
            .map(|(u, v)| Row::new(users.raw(*u).to_owned(), v))
            .chain(std::iter::once(Row::new(MEAN_ROW.to_owned(), &self.mean)))
            .collect()
    }

    /// `user,recall,hit,coverage,entropy,gini`, one row per user then `__mean__`.
    pub fn write_csv(&self, path: &Path, users: &IdMap) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_path(path)?;
        for row in self.labelled_rows(users) {
            w.serialize(row).with_path(path)?;
        }
        w.flush().with_path(path)
    }

    pub fn write_json(&self, path: &Path, users: &IdMap) -> Result<()> {
        let mut f = BufWriter::new(File::create(path).with_path(path)?);
        let report = JsonReport {
            k_eval: self.k_eval,
            rows: self.labelled_rows(users),
        };
        serde_json::to_writer_pretty(&mut f, &report).with_path(path)?;
        writeln!(f).with_path(path)?;
        f.flush().with_path(path)
    }
}

/// A metrics file read back: per-user rows keyed by raw id, plus the stored mean row.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMetrics {
    pub rows: Vec<(String, MetricValues)>,
    pub mean: MetricValues,
}

impl StoredMetrics {
    /// Mean of the per-user rows, recomputed.
    pub fn recomputed_mean(&self) -> MetricValues {
        MetricValues::mean(self.rows.iter().map(|r| &r.1))
    }
}

fn split_rows(rows: Vec<Row>) -> Result<StoredMetrics> {
    let mut mean = None;
    let mut out = Vec::new();
    for r in rows {
        if r.user == MEAN_ROW {
            mean = Some(r.values());
        } else {
            out.push((r.user.clone(), r.values()));
        }
    }
    Ok(StoredMetrics {
        rows: out,
        mean: mean.ok_or_else(|| Error::Config(format!("metrics file has no `{MEAN_ROW}` row")))?,
    })
}

pub fn read_metrics_csv(path: &Path) -> Result<StoredMetrics> {
    let mut r = csv::Reader::from_path(path).with_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<Row>, _>>().with_path(path)?;
    split_rows(rows).with_path(path)
}

pub fn read_metrics_json(path: &Path) -> Result<(usize, StoredMetrics)> {
    let f = File::open(path).with_path(path)?;
    let report: JsonReport = serde_json::from_reader(std::io::BufReader::new(f)).with_path(path)?;
    Ok((report.k_eval, split_rows(report.rows).with_path(path)?))
}

/// Full-graph inference, top-`k_eval` retrieval and metrics on one split.
/// Training items are removed from the candidates when `exclude_train` is set.
pub fn evaluate(
    data: &Dataset,
    params: &ModelParameters,
    part: SplitPart,
    k_eval: usize,
    exclude_train: bool,
) -> Result<MetricsReport> {
    if params.num_categories() != data.categories.num_categories() {
        return Err(Error::Shape(format!(
            "model has {} categories, dataset has {}",
            params.num_categories(),
            data.categories.num_categories()
        )));
    }
    let (users, items) = infer_all(&data.graph, params)?;
    let exclusions = exclude_train.then(|| data.graph.user_adjacency());
    let recs = retrieve_topk(&users, &items, k_eval, exclusions)?;
    MetricsReport::build(&recs, &data.targets(part), &data.categories, k_eval)
}
