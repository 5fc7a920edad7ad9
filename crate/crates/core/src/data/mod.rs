//! Interaction logs, k-core filtering, chronological splitting and the
//! training graph.

mod filter;
mod graph;
mod ingest;
mod store;
pub mod synth;

pub use filter::{k_core_filter, temporal_split, DatasetSplit, DEFAULT_K_CORE, DEFAULT_SPLIT};
pub use graph::{build_graph, BipartiteGraph, GraphBuild, IdMap, ItemCategoryTable, NodeKind};
pub use ingest::{check_categories, ingest, read_categories, read_interactions, Interaction, RawCategories};
pub use store::{write_interactions, Dataset, DatasetStats, SplitPart};
pub(crate) use store::write_csv;
