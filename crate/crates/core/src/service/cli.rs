use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{posterior_slice, serve, trace_csv, Campaign, Store};
use crate::bench::TestFunction;
use crate::driver::{try_run_loop, LoopConfig, NoiseSimulator};
use crate::error::{Error, Result};

/// Config file of the `run` subcommand: a loop config plus a bench objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Name of a bench test function.
    pub objective: String,
    /// Variance of simulated Gaussian observation noise.
    #[serde(default)]
    pub noise_variance: Option<f64>,
    #[serde(flatten)]
    pub config: LoopConfig,
}

#[derive(Parser)]
#[command(name = "bayesopt", version, about = "Bayesian optimization of expensive black-box functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKind {
    Trace,
    PosteriorSlice,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full loop against a bench objective and write the trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Create a campaign from a loop config and print its id.
    New {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
    /// Print the next suggestion as JSON.
    Suggest {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        id: String,
    },
    /// Record an observation.
    Tell {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Write the trace CSV or a posterior slice CSV.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long, value_enum)]
        what: ExportKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        axis: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        fixed: Option<Vec<f64>>,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out, seed } => {
            let mut spec: RunSpec = read_json(&config)?;
            if let Some(s) = seed {
                spec.config.seed = s;
            }
            let f = TestFunction::by_name(&spec.objective)?;
            if f.bounds != spec.config.bounds {
                return Err(Error::invalid(format!("config bounds differ from the bounds of {}", spec.objective)));
            }
            let noise = spec.noise_variance.map(|variance| NoiseSimulator { variance });
            let trace = try_run_loop(spec.config, |x| f.eval(x), noise)?;
            fs::write(&out, trace_csv(&trace, f.dim()))?;
            if let Some(last) = trace.last() {
                println!("{} evaluations, best observed {}", trace.len(), last.best_observed);
            }
        }
        Command::New { config, store } => {
            let config: LoopConfig = read_json(&config)?;
            let id = Store::open(store)?.save(&Campaign::new(config)?)?;
            println!("{id}");
        }
        Command::Suggest { store, id } => {
            let s = Store::open(store)?.update(&id, |c| c.suggest())?;
            println!("{}", serde_json::to_string(&s).expect("suggestion serializes"));
        }
        Command::Tell { store, id, x, y } => {
            let r = Store::open(store)?.update(&id, |c| c.tell(x, y))?;
            println!("{}", serde_json::to_string(&r).expect("trace record serializes"));
        }
        Command::Serve { store, port } => {
            let store = Store::open(store)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(store, port))?;
        }
        Command::Export { store, id, what, out, axis, fixed, points } => {
            let c = Store::open(store)?.load(&id)?;
            let text = match what {
                ExportKind::Trace => trace_csv(c.state.trace(), c.state.config().bounds.dim()),
                ExportKind::PosteriorSlice => posterior_slice(&c.state, axis, fixed, points)?.to_csv(),
            };
            fs::write(&out, text)?;
        }
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code: 0 on success, 2 on usage errors and invalid input, 1 otherwise.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Parse(_) => 2,
                _ => 1,
            }
        }
    }
}
