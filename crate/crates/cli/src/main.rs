//! File-based pipeline over the tree-learning library: simulate data,
//! compute pairwise information weights, learn trees, evaluate KL, count
//! dependencies, and run the ROC hypothesis-testing experiment.
//!
//! Every subcommand is deterministic given its flags and `--seed`; outputs
//! are written atomically (temp file + rename) and carry a manifest line
//! with the tool version, the subcommand, the seed and input digests.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/validation error,
//! 4 numerical error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use ditree::hypothesis::{run_experiment, write_roc_csv};
use ditree::info::{
    build_weights, gaussian_kl, read_weights_csv, tree_to_gaussian, write_weights_csv, WeightKind,
};
use ditree::model::{build_covariance, sample, write_samples_csv, ModelFile};
use ditree::trees::{
    best_causal_tree, count_dependencies, kruskal_max_tree, tree_to_dot, DependencyKind, TreeFile,
};

#[derive(Parser)]
#[command(name = "ditree", version, about = "Causal dependence tree toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a generative model and write them as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute a pairwise information weight matrix from a model.
    Weights {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn the best tree from a weight matrix.
    Learn {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        /// Also render the tree as Graphviz DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// KL divergence (nats) between a model's law and a tree approximation.
    Kl {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tree: PathBuf,
    },
    /// Count variable dependencies kept by each structure.
    Count {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
    },
    /// Binary hypothesis test: ROC curves under the full laws and both
    /// tree approximations.
    Roc {
        #[arg(long)]
        model0: PathBuf,
        #[arg(long)]
        model1: PathBuf,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Di,
    Mi,
    Mivar,
}

impl From<KindArg> for WeightKind {
    fn from(k: KindArg) -> WeightKind {
        match k {
            KindArg::Di => WeightKind::ProcessDi,
            KindArg::Mi => WeightKind::ProcessMi,
            KindArg::Mivar => WeightKind::VariableMi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Causal,
    Chowliu,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<ditree::Error>() {
        Some(ditree::Error::NotPositiveDefinite { .. })
        | Some(ditree::Error::NumericalInconsistency { .. }) => 4,
        _ => 3,
    }
}

/// `<file name>:<first 12 hex of sha256>` for the manifest line.
fn digest(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let hash = Sha256::digest(&bytes);
    let hex: String = hash.iter().take(6).map(|b| format!("{b:02x}")).collect();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(format!("{name}:{hex}"))
}

fn manifest(subcommand: &str, seed: u64, inputs: &[&Path]) -> Result<String> {
    let digests: Vec<String> = inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?;
    Ok(format!(
        "ditree v{} | subcommand={subcommand} | seed={seed} | inputs={}",
        env!("CARGO_PKG_VERSION"),
        digests.join(";")
    ))
}

/// Write through a temp file in the target directory, then rename, so the
/// output path either holds the complete file or nothing.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create temp file in {}", dir.display()))?;
    body(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load_model(path: &Path) -> Result<ditree::model::GenerativeModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let model = ModelFile::from_json(&text)?.into_model()?;
    Ok(model)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            model,
            out,
            count,
            seed,
        } => {
            let line = manifest("simulate", seed, &[&model])?;
            let m = load_model(&model)?;
            let samples = sample(&m, seed, count as usize);
            write_atomic(&out, |w| {
                write_samples_csv(w, &samples, &[line])?;
                Ok(())
            })
        }
        Command::Weights { model, kind, out } => {
            let line = manifest("weights", 0, &[&model])?;
            let m = load_model(&model)?;
            let cov = build_covariance(&m)?;
            let weights = build_weights(&cov, kind.into())?;
            write_atomic(&out, |w| {
                write_weights_csv(w, &weights, &[line])?;
                Ok(())
            })
        }
        Command::Learn {
            weights,
            mode,
            out,
            dot,
        } => {
            let line = manifest("learn", 0, &[&weights])?;
            let text = fs::read_to_string(&weights)
                .with_context(|| format!("cannot read {}", weights.display()))?;
            let matrix = read_weights_csv(text.as_bytes())?;
            let tree = match mode {
                ModeArg::Causal => best_causal_tree(&matrix)?,
                ModeArg::Chowliu => kruskal_max_tree(&matrix)?,
            };
            let file = TreeFile::from_tree(&tree, matrix.labels().to_vec(), Some(line));
            write_atomic(&out, |w| {
                writeln!(w, "{}", file.to_json())?;
                Ok(())
            })?;
            if let Some(dot_path) = dot {
                let rendered = tree_to_dot(&tree, matrix.labels());
                write_atomic(&dot_path, |w| {
                    w.write_all(rendered.as_bytes())?;
                    Ok(())
                })?;
            }
            Ok(())
        }
        Command::Kl { model, tree } => {
            let m = load_model(&model)?;
            let text = fs::read_to_string(&tree)
                .with_context(|| format!("cannot read {}", tree.display()))?;
            let (tree, _labels) = TreeFile::from_json(&text)?.into_tree()?;
            let cov = build_covariance(&m)?;
            let approx = tree_to_gaussian(&cov, &tree)?;
            let kl = gaussian_kl(&cov, &approx)?;
            println!("{kl}");
            Ok(())
        }
        Command::Count { m, n } => {
            if m == 0 || n == 0 {
                anyhow::bail!(ditree::Error::Parse(
                    "count needs m >= 1 and n >= 1".to_string()
                ));
            }
            let full = count_dependencies(m, n, DependencyKind::Full);
            let chowliu = count_dependencies(m, n, DependencyKind::ChowLiuVar);
            let causal = count_dependencies(m, n, DependencyKind::Causal);
            let strictly_past = m * n * (n - 1) / 2 + (m - 1) * n * (n - 1) / 2;
            println!("full: {full}");
            println!("chowliu: {chowliu}");
            println!(
                "causal: {causal} (present-inclusive cross edges; a strictly-past variant gives {strictly_past})"
            );
            Ok(())
        }
        Command::Roc {
            model0,
            model1,
            trials,
            seed,
            out,
        } => {
            let line = manifest("roc", seed, &[&model0, &model1])?;
            let m0 = load_model(&model0)?;
            let m1 = load_model(&model1)?;
            let result = run_experiment(&m0, &m1, trials as usize, seed)?;
            write_atomic(&out, |w| {
                write_roc_csv(w, &result.curves(), &[line])?;
                Ok(())
            })
        }
    }
}
