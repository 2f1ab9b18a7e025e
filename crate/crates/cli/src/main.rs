//! `tutorgraph`: validate fragments, simulate cohorts, refine abstract nodes
//! and run the tutor service.
//!
//! Exit codes: 0 on success, 2 when an input fails validation, 1 otherwise.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;
use tutorgraph_core::engine::{EngineConfig, DEFAULT_STEP_CAP};
use tutorgraph_core::fragment::{
    default_context_vars, load_fragment, serialize_fragment, validate_fragment, LearningFragment,
    Modality,
};
use tutorgraph_core::planner::{refine, FragmentCatalog, RefinementLimits};
use tutorgraph_core::simulator::{analytic_expected_steps, simulate, SimulationError, StudentModel};
use tutorgraph_service::{canonical, Collection, DocumentStore, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "tutorgraph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the validation report of a fragment document.
    Validate {
        #[arg(long)]
        fragment: PathBuf,
    },
    /// Run synthetic learners through a fragment and report metrics.
    Simulate {
        #[arg(long)]
        fragment: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: u32,
    },
    /// Expected submissions to completion, from the fundamental matrix.
    ExpectedSteps {
        #[arg(long)]
        fragment: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Replace abstract nodes with fragments from a library.
    Refine {
        #[arg(long)]
        fragment: PathBuf,
        /// Concrete fragment documents available for splicing.
        #[arg(long, num_args = 1.., required = true)]
        library: Vec<PathBuf>,
        /// Comma-separated modalities the learner's frontend can render.
        #[arg(long, value_delimiter = ',', value_parser = parse_modality)]
        capabilities: Option<Vec<Modality>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        /// JSON configuration file; flags and environment override it.
        #[arg(long, env = "TUTORGRAPH_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "TUTORGRAPH_LISTEN")]
        listen: Option<String>,
        #[arg(long, env = "TUTORGRAPH_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long, env = "TUTORGRAPH_STEP_CAP")]
        step_cap: Option<u32>,
        #[arg(long, env = "TUTORGRAPH_MAX_DEPTH")]
        max_depth: Option<u32>,
        #[arg(long, env = "TUTORGRAPH_MAX_CHAIN_LENGTH")]
        max_chain_length: Option<usize>,
        #[arg(long, env = "TUTORGRAPH_API_TOKEN", hide_env_values = true)]
        api_token: Option<String>,
    },
    /// Rewrite one session document forever. Used to test crash consistency
    /// by killing the process mid-write.
    #[command(hide = true)]
    StoreChurn {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn parse_modality(s: &str) -> Result<Modality, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown modality `{s}` (expected text, audio, rich or code)"))
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Failed(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).map_err(failed)
        }
    }
}

fn load(path: &Path) -> Result<LearningFragment, CliError> {
    load_fragment(&read(path)?).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Loads a fragment and insists it validates cleanly.
fn load_valid(path: &Path) -> Result<LearningFragment, CliError> {
    let fragment = load(path)?;
    let report = validate_fragment(&fragment, &default_context_vars());
    if let Some(first) = report.errors.first() {
        return Err(CliError::Invalid(format!(
            "{}: {} validation error(s), first: {} {}",
            path.display(),
            report.errors.len(),
            first.code,
            first.message
        )));
    }
    Ok(fragment)
}

fn load_model(path: &Path) -> Result<StudentModel, CliError> {
    let model: StudentModel = serde_json::from_slice(&read(path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    model
        .validate()
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(model)
}

fn simulation_error(e: SimulationError) -> CliError {
    match e {
        SimulationError::InvalidModel(_) | SimulationError::Unrefined(_) => CliError::Invalid(e.to_string()),
        _ => CliError::Failed(e.to_string()),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { fragment } => {
            let f = load(&fragment)?;
            let report = validate_fragment(&f, &default_context_vars());
            write_out(None, &canonical(&report))?;
            if !report.is_publishable() {
                return Err(CliError::Invalid(format!("{} validation error(s)", report.errors.len())));
            }
            Ok(())
        }
        Command::Simulate {
            fragment,
            model,
            trials,
            seed,
            out,
            step_cap,
        } => {
            let f = load_valid(&fragment)?;
            let model = load_model(&model)?;
            let config = EngineConfig {
                step_cap,
                ..EngineConfig::default()
            };
            let metrics = simulate(&f, &model, trials, seed, config).map_err(simulation_error)?;
            write_out(out.as_deref(), &metrics.to_canonical_json())
        }
        Command::ExpectedSteps { fragment, model } => {
            let f = load_valid(&fragment)?;
            let model = load_model(&model)?;
            let steps = analytic_expected_steps(&f, &model).map_err(simulation_error)?;
            println!("{steps}");
            Ok(())
        }
        Command::Refine {
            fragment,
            library,
            capabilities,
            out,
        } => {
            let f = load_valid(&fragment)?;
            let library = library.iter().map(|p| load_valid(p)).collect::<Result<Vec<_>, _>>()?;
            let mut catalog = FragmentCatalog::from_fragments(&library);
            catalog.fragments.retain(|e| !e.provides.is_empty());
            let caps: Option<BTreeSet<Modality>> = capabilities.map(|c| c.into_iter().collect());
            let refined = refine(&f, &catalog, &library, caps.as_ref(), &RefinementLimits::default())
                .map_err(failed)?;
            write_out(out.as_deref(), &serialize_fragment(&refined))
        }
        Command::Serve {
            config,
            listen,
            data_dir,
            step_cap,
            max_depth,
            max_chain_length,
            api_token,
        } => {
            let mut cfg: ServiceConfig = match config {
                Some(path) => serde_json::from_slice(&read(&path)?)
                    .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
                None => ServiceConfig::default(),
            };
            cfg.listen = listen.unwrap_or(cfg.listen);
            cfg.data_dir = data_dir.unwrap_or(cfg.data_dir);
            cfg.step_cap = step_cap.unwrap_or(cfg.step_cap);
            cfg.limits.max_depth = max_depth.unwrap_or(cfg.limits.max_depth);
            cfg.limits.max_chain_length = max_chain_length.unwrap_or(cfg.limits.max_chain_length);
            cfg.api_token = api_token.or(cfg.api_token);
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .init();
            tokio::runtime::Runtime::new()
                .map_err(failed)?
                .block_on(tutorgraph_service::serve(cfg))
                .map_err(failed)
        }
        Command::StoreChurn { dir } => {
            let store = DocumentStore::open(&dir).map_err(failed)?;
            let filler = "x".repeat(64 * 1024);
            for generation in 1u64.. {
                let body = canonical(&serde_json::json!({"generation": generation, "filler": filler}));
                store.replace(Collection::Sessions, "churn", &body).map_err(failed)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tutorgraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
