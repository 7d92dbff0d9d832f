use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chainset::chainlab::ControlFamily;
use chainset_cli::bundle::ResultBundle;
use chainset_cli::commands::{self, ChainSetArgs, OracleArgs, Outcome, PoincareArgs};
use chainset_cli::{plot, spec, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainset", version, about = "Control sets and chain control sets of linear control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov spaces, controllability subspace and hyperbolicity.
    Decompose {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closure of the control set D0 and the chain control set E.
    ChainSet {
        spec: PathBuf,
        /// Fixed integration horizon for the reachable-set supports.
        #[arg(long)]
        horizon: Option<f64>,
        /// Relative quadrature tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force chain graph on a grid, compared against E.
    Oracle {
        spec: PathBuf,
        /// Box bounds as lo,hi per axis, e.g. -2,2,-2,2.
        #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
        bounds: Option<Vec<f64>>,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long = "T")]
        jump_t: Option<f64>,
        /// constant, two-piece or lattice:<levels>.
        #[arg(long, value_parser = parse_family)]
        family: Option<ControlFamily>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        to: Option<Vec<f64>>,
        /// Also write the full chain graph as JSON.
        #[arg(long)]
        export_graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Point cloud of the projective chain control set.
    Poincare {
        spec: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        rplot: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved bundle as SVG (or CSV).
    Plot {
        bundle: PathBuf,
        output: PathBuf,
        #[arg(long)]
        csv: bool,
        /// Coordinate axes to plot for state dimension > 2, e.g. 0,2.
        #[arg(long, value_parser = parse_axes)]
        project: Option<(usize, usize)>,
    },
}

fn parse_family(s: &str) -> Result<ControlFamily, String> {
    match s {
        "constant" => Ok(ControlFamily::Constant),
        "two-piece" => Ok(ControlFamily::TwoPiece),
        _ => s
            .strip_prefix("lattice:")
            .and_then(|n| n.parse().ok())
            .map(ControlFamily::Lattice)
            .ok_or_else(|| format!("unknown control family `{s}`")),
    }
}

fn parse_axes(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated axes")?;
    let a = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn configure_threads() {
    if let Some(n) = std::env::var("CHAINSET_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
    }
}

fn finish(outcome: Outcome, out: Option<&Path>) -> Result<(), CliError> {
    println!("{}", outcome.summary);
    if let Some(path) = out {
        outcome.bundle.save(path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose { spec, out } => finish(commands::decompose(&spec::load(&spec)?)?, out.as_deref()),
        Command::ChainSet {
            spec,
            horizon,
            tol,
            out,
        } => finish(
            commands::chain_set(&spec::load(&spec)?, ChainSetArgs { horizon, tol })?,
            out.as_deref(),
        ),
        Command::Oracle {
            spec,
            bounds,
            spacing,
            epsilon,
            jump_t,
            family,
            from,
            to,
            export_graph,
            out,
        } => {
            let args = OracleArgs {
                bounds,
                spacing,
                epsilon,
                jump_t,
                family,
                from,
                to,
            };
            let (outcome, graph) = commands::oracle(&spec::load(&spec)?, &args)?;
            if let Some(path) = export_graph {
                let text = serde_json::to_string(&graph).map_err(|e| CliError::Io(e.to_string()))?;
                std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            finish(outcome, out.as_deref())
        }
        Command::Poincare {
            spec,
            samples,
            rplot,
            seed,
            out,
        } => finish(
            commands::poincare(
                &spec::load(&spec)?,
                PoincareArgs {
                    samples,
                    r_plot: rplot,
                    seed,
                },
            )?,
            out.as_deref(),
        ),
        Command::Plot {
            bundle,
            output,
            csv,
            project,
        } => {
            let b = ResultBundle::load(&bundle)?;
            let fig = plot::figure(&b, project)?;
            let text = if csv { plot::csv(&fig) } else { plot::svg(&fig) };
            std::fs::write(&output, text).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
