use std::collections::HashMap;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

/// One positive implicit-feedback event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: i64,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: i64) -> Self {
        Self {
            user: user.into(),
            item: item.into(),
            timestamp,
        }
    }
}

/// Raw item id to raw category label, as read from the categories file.
#[derive(Debug, Clone, Default)]
pub struct RawCategories {
    map: HashMap<String, String>,
}

impl RawCategories {
    pub fn get(&self, item: &str) -> Option<&str> {
        self.map.get(item).map(String::as_str)
    }

    pub fn insert(&mut self, item: impl Into<String>, category: impl Into<String>) {
        self.map.insert(item.into(), category.into());
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<I, C> FromIterator<(I, C)> for RawCategories
where
    I: Into<String>,
    C: Into<String>,
{
    fn from_iter<T: IntoIterator<Item = (I, C)>>(iter: T) -> Self {
        let mut out = RawCategories::default();
        for (i, c) in iter {
            out.insert(i, c);
        }
        out
    }
}

fn reader_with_header<R: Read>(source: R, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(reader)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses an interactions CSV (`user_id,item_id,timestamp`), preserving row order.
pub fn read_interactions<R: Read>(source: R) -> Result<Vec<Interaction>> {
    let mut reader = reader_with_header(source, &["user_id", "item_id", "timestamp"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = line_of(&record);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let timestamp = record[2].parse::<i64>().map_err(|_| Error::Parse {
            line,
            message: format!("timestamp `{}` is not an integer", &record[2]),
        })?;
        if record[0].is_empty() || record[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty user or item id".into(),
            });
        }
        out.push(Interaction::new(&record[0], &record[1], timestamp));
    }
    Ok(out)
}

/// Parses a categories CSV (`item_id,category_id`).
pub fn read_categories<R: Read>(source: R) -> Result<RawCategories> {
    let mut reader = reader_with_header(source, &["item_id", "category_id"])?;
    let mut out = RawCategories::default();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = line_of(&record);
        if record.len() != 2 || record[0].is_empty() || record[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "expected `item_id,category_id`".into(),
            });
        }
        if let Some(prev) = out.get(&record[0]) {
            if prev != &record[1] {
                return Err(Error::Parse {
                    line,
                    message: format!("item `{}` mapped to two categories", &record[0]),
                });
            }
        }
        out.insert(&record[0], &record[1]);
    }
    Ok(out)
}

/// Reads both files and checks that every interacted item has a category.
pub fn ingest<R1: Read, R2: Read>(
    interactions: R1,
    categories: R2,
) -> Result<(Vec<Interaction>, RawCategories)> {
    let interactions = read_interactions(interactions)?;
    let categories = read_categories(categories)?;
    check_categories(&interactions, &categories)?;
    Ok((interactions, categories))
}

pub fn check_categories(interactions: &[Interaction], categories: &RawCategories) -> Result<()> {
    match interactions.iter().find(|x| categories.get(&x.item).is_none()) {
        Some(x) => Err(Error::MissingCategory(x.item.clone())),
        None => Ok(()),
    }
}
