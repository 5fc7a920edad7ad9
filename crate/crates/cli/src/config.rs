//! Run configuration shared by `train`, `evaluate` and `sweep`.
//!
//! A run is described by a flat TOML file whose keys are the snake_case names
//! below; every key can also be given as a `--kebab-case` flag, and flags win.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dgcn::optim::TrainConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Prepared dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without validation improvement tolerated before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Category rebalancing exponent for neighbor sampling.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Probability of drawing a negative from the positive's category.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Weight of the adversarial category loss.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Negatives per positive.
    #[arg(long)]
    pub negative_rate: Option<usize>,
    /// Neighbors sampled per node and hop.
    #[arg(long)]
    pub fanout: Option<usize>,
    /// Number of graph convolution layers.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Embedding size.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Retrieval cut-off for validation and evaluation.
    #[arg(long)]
    pub k_eval: Option<usize>,
    /// Reject negatives the user already interacted with.
    #[arg(long)]
    pub exclude_seen_negatives: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

macro_rules! apply {
    ($cfg:expr, $run:expr, $($field:ident),+) => {
        $( if let Some(v) = $run.$field.clone() { $cfg.$field = v; } )+
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(1, |span| text[..span.start].matches('\n').count() + 1);
            anyhow::anyhow!("parsing {} at line {line}: {}", path.display(), e.message().trim_end())
        })
    }

    /// Values from `file` (when given) overridden by the flags in `self`.
    pub fn resolve(self, file: Option<&Path>) -> Result<Self> {
        let Some(file) = file else { return Ok(self) };
        let mut merged = Self::from_file(file)?;
        overlay!(
            merged, self, data, out, batch_size, epochs, patience, lr, dropout, alpha, beta, gamma, negative_rate,
            fanout, depth, dim, seed, k_eval, exclude_seen_negatives
        );
        Ok(merged)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        apply!(
            cfg, self, batch_size, epochs, patience, lr, dropout, alpha, beta, gamma, negative_rate, fanout, depth,
            dim, seed, k_eval, exclude_seen_negatives
        );
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data.as_deref().context("missing dataset directory (--data)")
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("missing output directory (--out)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "alpha = 0.5\nbeta = 0.2\nseed = 3\ndata = \"d\"\n").unwrap();
        let flags = RunConfig {
            beta: Some(0.0),
            ..Default::default()
        };
        let run = flags.resolve(Some(&path)).unwrap();
        let cfg = run.train_config().unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.beta, 0.0);
        assert_eq!(cfg.seed, 3);
        assert_eq!(run.data_dir().unwrap(), Path::new("d"));
        assert_eq!(cfg.gamma, TrainConfig::default().gamma);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "alpah = 1.0\n").unwrap();
        let err = RunConfig::default().resolve(Some(&path)).unwrap_err();
        assert!(format!("{err:#}").contains("alpah"), "{err:#}");
    }

    #[test]
    fn invalid_values_fail_validation() {
        let run = RunConfig {
            dropout: Some(1.0),
            ..Default::default()
        };
        assert!(run.train_config().is_err());
    }
}
