mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use fuzzdx_core::evaluation::AblationMode;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

/// Fuzzy-logic differential diagnosis over versioned knowledge bases.
#[derive(Debug, Parser)]
#[command(name = "fuzzdx", version)]
pub struct Cli {
    /// TOML file with [engine], [learner] and [extractor] sections.
    #[arg(long, global = true, env = "FUZZDX_CONFIG")]
    pub config: Option<PathBuf>,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a knowledge base file.
    Parse {
        file: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Print the canonical form of the program.
        #[arg(long)]
        canonical: bool,
    },
    /// Rank diagnoses for one case.
    Diagnose(DiagnoseArgs),
    /// Score a labelled dataset under one ablation mode.
    Eval {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// JSONL cases with labels.
        #[arg(long)]
        data: PathBuf,
        /// simple_baseline, symbolic_only, sym_prob, sym_fuzzy, full_hybrid or all.
        #[arg(long, default_value = "full_hybrid", value_parser = parse_modes)]
        mode: Modes,
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Run the online learner over a labelled stream.
    Learn {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// JSONL stream of {id, symptoms, labels}.
        #[arg(long)]
        stream: PathBuf,
        /// Output directory for the final snapshot and update log.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        passes: usize,
        /// Also induce template rules from the whole stream after training.
        #[arg(long)]
        induce: bool,
    },
    /// Show the changes between two KB files, or two store versions with --store.
    Diff {
        a: String,
        b: String,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Re-run a case under two stored versions and compare the rankings.
    Audit {
        #[arg(long, env = "FUZZDX_STORE")]
        store: PathBuf,
        /// Case JSON, or a plain-text note.
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        t1: u64,
        #[arg(long)]
        t2: u64,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Create a snapshot store from a KB file.
    Init {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
    },
    /// Build a retrieval index from labelled symptom cases.
    Index {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API over a snapshot store.
    Serve {
        #[arg(long, env = "FUZZDX_STORE")]
        store: PathBuf,
        #[arg(long, env = "FUZZDX_LISTEN", default_value = fuzzdx_service::DEFAULT_LISTEN)]
        listen: SocketAddr,
        #[arg(long, env = "FUZZDX_INDEX")]
        index: Option<PathBuf>,
        /// Proof trees with more nodes are returned by reference.
        #[arg(long, default_value_t = fuzzdx_service::DEFAULT_PROOF_CAP)]
        proof_cap: usize,
    },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["note", "case", "symptoms"])))]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Plain-text clinical note.
    #[arg(long)]
    pub note: Option<PathBuf>,
    /// Case JSON with text or symptoms and demographics.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Comma-separated symptoms, each optionally `name:weight`.
    #[arg(long)]
    pub symptoms: Option<String>,
    /// Case index JSONL for retrieval.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Fuse the prior clauses of the KB into posteriors.
    #[arg(long, conflicts_with = "priors")]
    pub priors_in_kb: bool,
    /// Fuse prior clauses read from this file instead.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    #[arg(long)]
    pub age: Option<u32>,
    #[arg(long)]
    pub sex: Option<String>,
    #[arg(long)]
    pub region: Option<String>,
    /// Print explanations and the symptom weight breakdown.
    #[arg(long)]
    pub explain: bool,
    #[command(flatten)]
    pub engine: EngineFlags,
}

#[derive(Debug, Clone)]
pub struct Modes(pub Vec<AblationMode>);

fn parse_modes(s: &str) -> Result<Modes, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Modes(AblationMode::ALL.to_vec()));
    }
    s.parse().map(|m| Modes(vec![m]))
}

/// Engine settings that override the config file.
#[derive(Debug, Args, Default)]
pub struct EngineFlags {
    #[arg(long)]
    pub tnorm: Option<fuzzdx_core::inference::TNorm>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rescale: Option<fuzzdx_core::ranking::RescaleMode>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
