//! `qualinfer`: infer nullness qualifiers for Java projects.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qualinfer", version, about = "Infer @Nullable annotations with graph neural networks")]
pub struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-file and per-project stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report what would be written without writing it.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
    /// Master seed for splits, initialization, sampling and clustering.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Prune configuration (JSON).
    #[arg(long, global = true)]
    pub prune: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Args, Debug)]
pub struct InOut {
    /// Project source directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inventory a source tree into a corpus manifest.
    Scan(InOut),
    /// Encode every labeled class as a pruned graph (JSON lines).
    Encode(InOut),
    /// Measure the effect of dropping each node or statement kind.
    Ablate {
        #[command(flatten)]
        io: InOut,
        /// Ablate statement subtrees instead of single nodes.
        #[arg(long)]
        statements: bool,
        #[arg(long)]
        reps: Option<usize>,
        /// Also write a prune configuration using the derived drop list.
        #[arg(long)]
        drop_list: Option<PathBuf>,
    },
    /// Group encoded graphs for per-cluster training.
    Cluster {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Train a model on encoded graphs.
    Train {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// GCN or FastGTN.
        #[arg(long)]
        model: Option<String>,
        /// Train one model per cluster of this cluster model.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Where to write the training report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predict qualifiers for a project.
    Predict {
        /// Project sources; enables pairing and the consistency rules.
        #[arg(long = "in", required_unless_present = "graphs")]
        input: Option<PathBuf>,
        /// Pre-encoded graphs, scored class by class.
        #[arg(long, conflicts_with = "input")]
        graphs: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the predictions as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write decided predictions into the sources.
    Annotate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Where to write the edit plan.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Remove every qualifier annotation.
    Erase {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write erased copies here instead of editing in place.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a project against ground truth.
    Eval {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Predictions to score; without them the project's own annotations are scored.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// `stub` or a command template containing {project_dir}.
        #[arg(long)]
        checker: Option<String>,
        #[arg(long, default_value = "warning")]
        warning_pattern: String,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train on growing fractions of a corpus and score each model.
    Study {
        /// Training corpus sources.
        #[arg(long)]
        train: PathBuf,
        /// Annotated evaluation project.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        fractions: Vec<f64>,
        #[arg(long)]
        checker: Option<String>,
        #[arg(long, default_value = "warning")]
        warning_pattern: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic annotated project.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        classes: usize,
        /// Generator spec (JSON); overrides --classes.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "gen")]
        package_prefix: String,
        /// Manifest path; defaults to manifest.json inside --out.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.log_level {
        LogLevel::Error => log::LevelFilter::Error,
        LogLevel::Warn => log::LevelFilter::Warn,
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| {
            use std::io::Write;
            writeln!(
                buf,
                "level={} target={} msg={:?}",
                record.level().as_str().to_lowercase(),
                record.target(),
                record.args().to_string()
            )
        })
        .init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error kind=UsageError msg=\"--jobs must be positive\"");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::from(1)
        }
    }
}
