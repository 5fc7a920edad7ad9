mod config;

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use dgcn::data::synth::{generate, SynthConfig};
use dgcn::data::{ingest, Dataset, SplitPart, DEFAULT_K_CORE};
use dgcn::eval::{evaluate, infer_all, MetricValues, DEFAULT_K_EVAL};
use dgcn::model::{load_checkpoint, CheckpointHeader, ModelParameters};
use dgcn::optim::{fit, save_run, CHECKPOINT_FILE};
use dgcn::rerank::{dum_rerank, mmr_rerank, Candidate, Similarity};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "dgcn", version, about = "Diversified GCN matching: data prep, training, evaluation, reranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, split and index raw interaction logs.
    Prepare {
        /// CSV with header `user_id,item_id,timestamp`.
        #[arg(long)]
        interactions: PathBuf,
        /// CSV with header `item_id,category_id`.
        #[arg(long)]
        categories: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_CORE)]
        k_core: usize,
        /// Train, validation and test shares.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.2, 0.2])]
        ratios: Vec<f64>,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Write a synthetic dataset with a dominant-category bias.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 500)]
        items: usize,
        #[arg(long, default_value_t = 10)]
        categories: usize,
        /// Share of each user's interactions in their dominant category.
        #[arg(long, default_value_t = 0.7)]
        dominant_bias: f64,
        #[arg(long, default_value_t = 40)]
        per_user: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        force: bool,
    },
    /// Train a model and write its checkpoint and training log.
    Train {
        /// Flat TOML run configuration; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Retrieve top-K lists for a split and write per-user metrics.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint file or a directory holding one.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: SplitPart,
        #[arg(long, default_value_t = DEFAULT_K_EVAL)]
        k_eval: usize,
        /// Keep training items among the candidates.
        #[arg(long)]
        include_train: bool,
    },
    /// Rerank a scored candidate list read from CSV `item_id,score,category_id`.
    Rerank {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Mmr)]
        method: Method,
        /// Relevance weight for MMR.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Length of the output list; defaults to every candidate.
        #[arg(long)]
        k_out: Option<usize>,
        #[arg(long, value_enum, default_value_t = SimilarityKind::Category)]
        similarity: SimilarityKind,
        /// Model used for cosine similarity between item representations.
        #[arg(long, requires = "data")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train and evaluate one model per value of a single hyperparameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "test")]
        split: SplitPart,
        #[command(flatten)]
        run: RunConfig,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mmr,
    Dum,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityKind {
    Category,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Alpha,
    Beta,
    Gamma,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            interactions,
            categories,
            out,
            k_core,
            ratios,
            force,
        } => prepare(&interactions, &categories, &out, k_core, &ratios, force),
        Command::Synth {
            out,
            users,
            items,
            categories,
            dominant_bias,
            per_user,
            seed,
            force,
        } => {
            guard_output(&out, force)?;
            let data = generate(&SynthConfig {
                users,
                items,
                categories,
                dominant_bias,
                per_user,
                seed,
            })?;
            data.write_dir(&out)?;
            println!("wrote {} interactions to {}", data.interactions.len(), out.display());
            Ok(())
        }
        Command::Train { config, run } => train(run.resolve(config.as_deref())?),
        Command::Evaluate {
            data,
            model,
            out,
            split,
            k_eval,
            include_train,
        } => {
            let dataset = load_dataset(&data)?;
            let params = load_model(&model, &dataset)?;
            let report = evaluate(&dataset, &params, split, k_eval, !include_train)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            report.write_csv(&out.join("metrics.csv"), &dataset.users)?;
            report.write_json(&out.join("metrics.json"), &dataset.users)?;
            print_mean(&report.mean);
            Ok(())
        }
        Command::Rerank {
            input,
            out,
            method,
            lambda,
            k_out,
            similarity,
            model,
            data,
        } => rerank(&input, &out, method, lambda, k_out, similarity, model.as_deref(), data.as_deref()),
        Command::Sweep {
            config,
            param,
            values,
            split,
            run,
        } => {
            if values.is_empty() {
                Cli::command()
                    .error(clap::error::ErrorKind::TooFewValues, "the sweep grid is empty")
                    .exit();
            }
            sweep(run.resolve(config.as_deref())?, param, &values, split)
        }
    }
}

fn guard_output(dir: &Path, force: bool) -> Result<()> {
    let occupied = dir.exists()
        && std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
    if occupied && !force {
        bail!("{} already exists and is not empty; pass --force to overwrite", dir.display());
    }
    Ok(())
}

fn prepare(interactions: &Path, categories: &Path, out: &Path, k_core: usize, ratios: &[f64], force: bool) -> Result<()> {
    guard_output(out, force)?;
    let open = |p: &Path| File::open(p).with_context(|| format!("opening {}", p.display()));
    let (rows, raw) = ingest(open(interactions)?, open(categories)?)
        .with_context(|| format!("reading {} and {}", interactions.display(), categories.display()))?;
    let ratios: [f64; 3] = ratios.try_into().context("--ratios takes three values")?;
    let dataset = Dataset::prepare(&rows, &raw, k_core, ratios)?;
    dataset.write_dir(out)?;
    let s = dataset.stats();
    println!(
        "users {} items {} interactions {} (train {} validation {} test {})",
        s.users, s.items, s.interactions, s.train, s.validation, s.test
    );
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    ensure!(dir.is_dir(), "dataset directory {} does not exist", dir.display());
    Ok(Dataset::load_dir(dir)?)
}

fn load_model(path: &Path, data: &Dataset) -> Result<ModelParameters> {
    let file = if path.is_dir() { path.join(CHECKPOINT_FILE) } else { path.to_path_buf() };
    let params = load_checkpoint(&file)?;
    let h = CheckpointHeader::of(&params);
    let (m, n, c) = (data.graph.num_users(), data.graph.num_items(), data.categories.num_categories());
    ensure!(
        h.num_users == m && h.num_items == n && h.num_categories == c,
        "checkpoint {} does not match the dataset: checkpoint has {} users, {} items, {} categories; dataset has {m}, {n}, {c}",
        file.display(),
        h.num_users,
        h.num_items,
        h.num_categories,
    );
    Ok(params)
}

fn print_mean(m: &MetricValues) {
    println!(
        "recall {:.4} hit {:.4} coverage {:.4} entropy {:.4} gini {:.4}",
        m.recall, m.hit, m.coverage, m.entropy, m.gini
    );
}

fn train(run: RunConfig) -> Result<()> {
    let cfg = run.train_config()?;
    let data = load_dataset(run.data_dir()?)?;
    let out = run.out_dir()?;
    let outcome = fit(&data, &cfg)?;
    save_run(out, &outcome, &cfg)?;
    let best = &outcome.log[outcome.best_epoch - 1];
    println!(
        "trained {} epochs, best epoch {} (validation recall {:.4}, coverage {:.4}); wrote {}",
        outcome.log.len(),
        outcome.best_epoch,
        best.val_recall,
        best.val_coverage,
        out.display()
    );
    Ok(())
}

fn sweep(run: RunConfig, param: SweepParam, values: &[f64], split: SplitPart) -> Result<()> {
    let base = run.train_config()?;
    let data = load_dataset(run.data_dir()?)?;
    let out = run.out_dir()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["param", "value", "recall", "hit", "coverage", "entropy", "gini"])?;
    for &value in values {
        let mut cfg = base.clone();
        match param {
            SweepParam::Alpha => cfg.alpha = value,
            SweepParam::Beta => cfg.beta = value,
            SweepParam::Gamma => cfg.gamma = value,
        }
        cfg.validate()?;
        let outcome = fit(&data, &cfg)?;
        let m = evaluate(&data, &outcome.params, split, cfg.k_eval, true)?.mean;
        println!("{} = {value}", param.name());
        print_mean(&m);
        w.write_record(
            [param.name().to_string(), value.to_string()]
                .into_iter()
                .chain([m.recall, m.hit, m.coverage, m.entropy, m.gini].map(|x| x.to_string())),
        )?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

struct CandidateRow {
    id: String,
    score: f64,
    category: String,
}

fn read_candidates(path: &Path) -> Result<Vec<CandidateRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    ensure!(
        header.iter().collect::<Vec<_>>() == ["item_id", "score", "category_id"],
        "{}: expected header item_id,score,category_id",
        path.display()
    );
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let score: f64 = rec[1]
            .trim()
            .parse()
            .with_context(|| format!("{}: line {}: bad score {:?}", path.display(), line + 2, &rec[1]))?;
        rows.push(CandidateRow {
            id: rec[0].to_string(),
            score,
            category: rec[2].to_string(),
        });
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn rerank(
    input: &Path,
    out: &Path,
    method: Method,
    lambda: f64,
    k_out: Option<usize>,
    similarity: SimilarityKind,
    model: Option<&Path>,
    data: Option<&Path>,
) -> Result<()> {
    let rows = read_candidates(input)?;
    // Numeric item ids order ties directly; other ids fall back to file order.
    let numeric: Option<Vec<usize>> = rows.iter().map(|r| r.id.trim().parse().ok()).collect();
    let keys = numeric.unwrap_or_else(|| (0..rows.len()).collect());
    let mut categories = HashMap::new();
    let cands: Vec<Candidate> = rows
        .iter()
        .zip(&keys)
        .map(|(r, &key)| {
            let next = categories.len();
            let c = *categories.entry(r.category.as_str()).or_insert(next);
            Candidate::new(key, r.score, c)
        })
        .collect();
    let k_out = k_out.unwrap_or(cands.len());

    let order = match method {
        Method::Dum => dum_rerank(&cands, k_out)?,
        Method::Mmr => match similarity {
            SimilarityKind::Category => mmr_rerank(&cands, lambda, k_out, Similarity::Category)?,
            SimilarityKind::Cosine => {
                let (Some(model), Some(data)) = (model, data) else {
                    bail!("cosine similarity needs --model and --data");
                };
                let dataset = load_dataset(data)?;
                let params = load_model(model, &dataset)?;
                let (_, items) = infer_all(&dataset.graph, &params)?;
                let vectors = rows
                    .iter()
                    .map(|r| {
                        let i = dataset
                            .items
                            .index_of(&r.id)
                            .with_context(|| format!("item {} is not in the dataset", r.id))?;
                        Ok(items.row(i).to_vec())
                    })
                    .collect::<Result<Vec<_>>>()?;
                mmr_rerank(&cands, lambda, k_out, Similarity::Cosine(&vectors))?
            }
        },
    };

    let position: HashMap<usize, usize> = keys.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(["rank", "item_id", "score", "category_id"])?;
    for (rank, key) in order.iter().enumerate() {
        let row = &rows[position[key]];
        w.write_record([(rank + 1).to_string(), row.id.clone(), row.score.to_string(), row.category.clone()])?;
    }
    w.flush()?;
    Ok(())
}
