//! Command-line surface of the `monas` binary.
//!
//! Exit codes: 0 on success, 1 on a domain error (invalid architecture,
//! unfair batch, evaluator failure, ...), 2 on a usage error.
//!
//! All randomness derives from `--seed`: `sample` uses it as the master seed
//! of the batch stream, `search` uses it as the annealing seed. The synthetic
//! evaluator takes its own hidden seed from the selector (`synthetic:<seed>`).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::codec::{decode, decode_any, encode, DecodeError};
use crate::dot::to_dot;
use crate::eval::{EvalError, Evaluator, PlantedEvaluator, ProcessEvaluator, TableEvaluator};
use crate::sampler::{batch_stream, SampleError};
use crate::search::{samos, write_trace_csv, AnnealingSchedule, SearchAborted, SearchError};
use crate::space::{enumerate_valid, SearchSpaceConfig, SpaceError, DEFAULT_OPS};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("{path}: {source}")]
    Decode { path: PathBuf, source: DecodeError },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Aborted(#[from] SearchAborted),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Output(#[from] io::Error),
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "monas",
    version,
    about = "Multi-path one-shot architecture search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the edge count and the exact size of a search space.
    Size(SizeArgs),
    /// Write a stream of fair child-network batches.
    Sample(SampleArgs),
    /// Run the simulated-annealing search.
    Search(SearchArgs),
    /// Check an architecture file and print its validity report.
    Validate(FileArgs),
    /// Render an architecture file as a Graphviz DOT graph.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    /// Number of node layers L.
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    /// Number of scales D.
    #[arg(long, default_value_t = 4)]
    pub scales: usize,
    /// Comma-separated operation alphabet.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_OPS.map(String::from))]
    pub ops: Vec<String>,
}

impl SpaceArgs {
    pub fn config(&self) -> Result<SearchSpaceConfig, SpaceError> {
        SearchSpaceConfig::new(self.layers, self.scales, &self.ops)
    }
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Also count valid architectures by exhaustive enumeration.
    #[arg(long)]
    pub exact_valid: bool,
    /// Largest space `--exact-valid` will enumerate.
    #[arg(long, default_value_t = 10_000_000)]
    pub limit: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Children per batch; must be a multiple of --scales. Defaults to --scales.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of batches.
    #[arg(long, default_value_t = 1)]
    pub iters: u64,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output batch stream file.
    #[arg(long, default_value = "batches.jsonl")]
    pub out: PathBuf,
}

/// Where penalties come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluatorSpec {
    Synthetic(u64),
    Table(PathBuf),
    Exec(String),
}

impl FromStr for EvaluatorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| {
            format!("expected synthetic:<seed>, table:<path> or exec:<command>, got {s:?}")
        })?;
        match kind {
            "synthetic" => rest
                .parse()
                .map(EvaluatorSpec::Synthetic)
                .map_err(|e| format!("synthetic seed {rest:?}: {e}")),
            "table" if !rest.is_empty() => Ok(EvaluatorSpec::Table(PathBuf::from(rest))),
            "exec" if !rest.trim().is_empty() => Ok(EvaluatorSpec::Exec(rest.to_owned())),
            _ => Err(format!(
                "expected synthetic:<seed>, table:<path> or exec:<command>, got {s:?}"
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Initial annealing temperature.
    #[arg(long, default_value_t = 1024.0)]
    pub t0: f64,
    /// Temperature decay factor per round.
    #[arg(long, default_value_t = 0.85)]
    pub xi: f64,
    /// Number of annealing rounds.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub iterations: u64,
    /// Penalty source: synthetic:<seed>, table:<path> or exec:<command>.
    #[arg(long, default_value = "synthetic:0")]
    pub evaluator: EvaluatorSpec,
    /// Seconds to wait for each answer from an exec evaluator.
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
    /// Search seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from this architecture file instead of a random one.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Output file for the best architecture.
    #[arg(long, default_value = "best_architecture.json")]
    pub best_out: PathBuf,
    /// Output file for the CSV trace.
    #[arg(long, default_value = "trace.csv")]
    pub trace_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FileArgs {
    /// Architecture file.
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    /// Architecture file.
    pub file: PathBuf,
    /// Write the graph here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_architecture(path: &Path) -> Result<crate::space::ChildArchitecture, CliError> {
    decode_any(&read_file(path)?).map_err(|source| CliError::Decode {
        path: path.to_owned(),
        source,
    })
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Size(args) => cmd_size(&args, out),
        Command::Sample(args) => cmd_sample(&args, out),
        Command::Search(args) => cmd_search(&args, out),
        Command::Validate(args) => cmd_validate(&args, out),
        Command::ExportDot(args) => cmd_export_dot(&args, out),
    }
}

pub fn cmd_size(args: &SizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.space.config()?;
    writeln!(out, "layers={}", config.num_layers())?;
    writeln!(out, "scales={}", config.num_scales())?;
    writeln!(out, "ops={}", config.op_alphabet().join(","))?;
    writeln!(out, "edges={}", config.edge_count())?;
    writeln!(
        out,
        "size={}^{}={}",
        config.states_per_edge(),
        config.edge_count(),
        config.space_size_unconstrained()
    )?;
    if args.exact_valid {
        let valid = enumerate_valid(&config, args.limit)?.count();
        writeln!(out, "valid={valid}")?;
    }
    Ok(())
}

pub fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.space.config()?;
    let k = args.k.unwrap_or(config.num_scales());
    let mut buf = Vec::new();
    let summary = batch_stream(&config, k, args.iters, args.seed, &mut buf)?;
    write_atomic(&args.out, &buf)?;
    writeln!(out, "batches={}", summary.batches)?;
    writeln!(out, "k={k}")?;
    for lc in &summary.edge_counts {
        let lo = lc.counts.iter().min().copied().unwrap_or(0);
        let hi = lc.counts.iter().max().copied().unwrap_or(0);
        let name = if lc.layer == config.num_layers() {
            "gather".to_owned()
        } else {
            format!("layer {}", lc.layer)
        };
        writeln!(
            out,
            "{name}: edges={} count min={lo} max={hi}",
            lc.counts.len()
        )?;
    }
    if summary.all_fair {
        writeln!(out, "fairness=ok")?;
        Ok(())
    } else {
        writeln!(out, "fairness=VIOLATED")?;
        Err(CliError::Failed(
            "a batch violated the fairness check".to_owned(),
        ))
    }
}

fn build_evaluator(
    spec: &EvaluatorSpec,
    config: &SearchSpaceConfig,
    timeout: Duration,
) -> Result<Box<dyn Evaluator>, CliError> {
    Ok(match spec {
        EvaluatorSpec::Synthetic(seed) => Box::new(PlantedEvaluator::new(config, *seed)),
        EvaluatorSpec::Table(path) => {
            Box::new(TableEvaluator::open(path).map_err(|e| match e {
                EvalError::Io(source) => CliError::Io {
                    path: path.clone(),
                    source,
                },
                other => other.into(),
            })?)
        }
        EvaluatorSpec::Exec(command) => {
            Box::new(ProcessEvaluator::spawn(command, timeout).map_err(EvalError::from)?)
        }
    })
}

pub fn cmd_search(args: &SearchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.space.config()?;
    let schedule = AnnealingSchedule::new(args.t0, args.xi, args.iterations as usize)?;
    if !(args.timeout.is_finite() && args.timeout > 0.0) {
        return Err(CliError::Failed(format!(
            "--timeout must be a positive number of seconds, got {}",
            args.timeout
        )));
    }
    let initial = match &args.initial {
        Some(path) => {
            let text = read_file(path)?;
            Some(decode(&text, &config).map_err(|source| CliError::Decode {
                path: path.clone(),
                source,
            })?)
        }
        None => None,
    };
    let mut evaluator = build_evaluator(
        &args.evaluator,
        &config,
        Duration::from_secs_f64(args.timeout),
    )?;
    let result = match samos(
        &config,
        &mut evaluator,
        &schedule,
        args.seed,
        initial.as_ref(),
    ) {
        Ok(r) => r,
        Err(aborted) => {
            let mut csv = Vec::new();
            write_trace_csv(&aborted.trace, &mut csv)?;
            write_atomic(&args.trace_out, &csv)?;
            return Err(aborted.into());
        }
    };
    let mut best = encode(&result.best_architecture);
    best.push('\n');
    write_atomic(&args.best_out, best.as_bytes())?;
    let mut csv = Vec::new();
    write_trace_csv(&result.trace, &mut csv)?;
    write_atomic(&args.trace_out, &csv)?;
    writeln!(out, "initial_penalty={}", result.initial_penalty)?;
    writeln!(out, "best_penalty={}", result.best_penalty)?;
    writeln!(out, "evaluations={}", result.evaluations)?;
    writeln!(out, "best_architecture={}", args.best_out.display())?;
    writeln!(out, "trace={}", args.trace_out.display())?;
    Ok(())
}

pub fn cmd_validate(args: &FileArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let arch = read_architecture(&args.file)?;
    let report = arch.validate();
    writeln!(out, "{report}")?;
    if report.is_valid {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{} is not a valid architecture",
            args.file.display()
        )))
    }
}

pub fn cmd_export_dot(args: &ExportDotArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let arch = read_architecture(&args.file)?;
    let dot = to_dot(&arch);
    match &args.out {
        Some(path) => write_atomic(path, dot.as_bytes()),
        None => Ok(out.write_all(dot.as_bytes())?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_selector() {
        assert_eq!("synthetic:42".parse(), Ok(EvaluatorSpec::Synthetic(42)));
        assert_eq!(
            "table:/tmp/t.tsv".parse(),
            Ok(EvaluatorSpec::Table(PathBuf::from("/tmp/t.tsv")))
        );
        assert_eq!(
            "exec:python3 serve.py --x 1".parse(),
            Ok(EvaluatorSpec::Exec("python3 serve.py --x 1".into()))
        );
        for bad in ["synthetic", "synthetic:x", "table:", "exec: ", "grid:1"] {
            assert!(bad.parse::<EvaluatorSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
