use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bierte::planner::{self, ConnMode, SubsetDiagnostics};
use bierte::sim::{self, Scenario};
use bierte::tables::{compile, dump, CompileOptions};
use bierte::topology::{FrrMode, Topology};
use bierte::{load_topology, perf};
use clap::{Parser, Subcommand, ValueEnum};

/// BIER-TE domain compiler, simulator and planner.
#[derive(Parser)]
#[command(name = "bierte", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a topology and print every node's tables.
    Compile {
        topology: PathBuf,
        /// Override the topology's FRR mode.
        #[arg(long)]
        frr: Option<Frr>,
    },
    /// Run a scenario and print the delivery report.
    Simulate {
        topology: PathBuf,
        scenario: PathBuf,
        /// Exit with status 1 when any verdict is false.
        #[arg(long)]
        strict: bool,
        /// Write the per-hop trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check subsets for connectivity, ingress and bitstring rules.
    ValidateSubsets {
        topology: PathBuf,
        /// Connectivity to require; defaults to vertex for node protection, edge otherwise.
        #[arg(long)]
        mode: Option<Mode>,
        /// Write the topology augmented with suggested virtual links here.
        #[arg(long)]
        repair: Option<PathBuf>,
    },
    /// Print the maximum lossless IPMC rate as CSV.
    Perf {
        /// Frame sizes in bytes.
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256, 512, 1024, 1536])]
        frames: Vec<u32>,
        /// Bitstring lengths in bits.
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256])]
        bsl: Vec<u32>,
        /// Per-frame overhead in bytes besides the bitstring.
        #[arg(long, default_value_t = perf::DEFAULT_OVERHEAD)]
        overhead: u32,
        /// Port rate in Gbit/s.
        #[arg(long, default_value_t = perf::DEFAULT_LINE_RATE)]
        line_rate: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Frr {
    None,
    Link,
    Node,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Edge,
    Vertex,
}

// Failures caused by the inputs, reported with exit status 2.
struct InputError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn topology(path: &Path) -> Result<Topology> {
    load_topology(&read(path)?).with_context(|| format!("{}", path.display()))
}

/// Returns whether all verdicts held.
fn run(cli: Cli) -> Result<bool, InputError> {
    match cli.cmd {
        Cmd::Compile {
            topology: path,
            frr,
        } => {
            let t = topology(&path)?;
            let mut opts = CompileOptions::from_topology(&t);
            if let Some(frr) = frr {
                opts.frr = match frr {
                    Frr::None => FrrMode::None,
                    Frr::Link => FrrMode::Link,
                    Frr::Node => FrrMode::Node,
                };
            }
            let tables =
                compile(&t, &opts).with_context(|| format!("compiling {}", path.display()))?;
            print!("{}", dump(&tables));
            Ok(true)
        }
        Cmd::Simulate {
            topology: path,
            scenario,
            strict,
            trace,
        } => {
            let t = topology(&path)?;
            let tables = compile(&t, &CompileOptions::from_topology(&t))
                .with_context(|| format!("compiling {}", path.display()))?;
            let s = Scenario::parse(&read(&scenario)?)
                .with_context(|| format!("{}", scenario.display()))?;
            let (report, lines) =
                sim::run(&t, &tables, &s).with_context(|| format!("{}", scenario.display()))?;
            if let Some(out) = trace {
                fs::write(&out, lines.render())
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            print!("{}", report.render());
            Ok(!strict || report.all_verdicts())
        }
        Cmd::ValidateSubsets {
            topology: path,
            mode,
            repair,
        } => {
            let t = topology(&path)?;
            let mode = match mode {
                Some(Mode::Edge) => ConnMode::Edge,
                Some(Mode::Vertex) => ConnMode::Vertex,
                None if t.frr_mode() == FrrMode::Node => ConnMode::Vertex,
                None => ConnMode::Edge,
            };
            let diags: Vec<SubsetDiagnostics> = t
                .subsets()
                .map(|s| planner::validate_subset(&t, s.si, mode))
                .collect();
            print!("{}", planner::render_diagnostics(&diags));
            if let Some(out) = repair {
                let (fixed, after) = planner::repair(&t, mode).context("applying virtual links")?;
                fs::write(&out, fixed.doc().to_toml())
                    .with_context(|| format!("writing {}", out.display()))?;
                eprintln!(
                    "wrote {} ({} of {} subsets satisfy {mode} connectivity)",
                    out.display(),
                    after
                        .iter()
                        .filter(|d| d.connectivity.satisfies(mode))
                        .count(),
                    after.len()
                );
            }
            Ok(true)
        }
        Cmd::Perf {
            frames,
            bsl,
            overhead,
            line_rate,
        } => {
            let rows = perf::curve(&frames, &bsl, overhead, line_rate)?;
            print!("{}", perf::curve_csv(&rows));
            Ok(true)
        }
    }
}
