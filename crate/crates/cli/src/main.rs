use std::path::PathBuf;
use std::process::ExitCode;

use bernoulli_cli::collapse::{cmd_collapse, CollapseArgs, Observable};
use bernoulli_cli::kl::{cmd_kl, KlArgs};
use bernoulli_cli::probe::{cmd_probe, Probe};
use bernoulli_cli::spec::SweepSpec;
use bernoulli_cli::sweep::{cmd_sweep, workers_from_env};
use bernoulli_cli::{CliError, Result};
use bernoulli_core::analysis::{FitWindow, KlConfig};
use bernoulli_core::circuit::{default_t_max, CircuitParams, Ensemble};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulate and analyse the Bernoulli-map control transition in monitored
/// qubit circuits.
#[derive(Parser)]
#[command(name = "bernoulli", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or resume a (backend, L, p) sweep described by a JSON spec.
    Sweep {
        spec: PathBuf,
        /// Worker threads (default: BERNOULLI_WORKERS, else all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Parent of the runs/ directory (overrides the spec).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Fit a finite-size scaling collapse to an ensemble or series table.
    Collapse(CollapseCmd),
    /// KL divergence between the quantum-variance distributions of two circuits tables.
    Kl {
        /// Reference distribution P.
        p_table: PathBuf,
        /// Model distribution Q.
        q_table: PathBuf,
        #[arg(long, default_value_t = 100)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add one pseudo-observation to the atom and continuous weights.
        #[arg(long)]
        laplace: bool,
        #[arg(long, default_value = "kl")]
        out: PathBuf,
    },
    /// One-off diagnostics; prints JSON.
    #[command(subcommand)]
    Probe(ProbeCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObservableArg {
    Mz,
    DeltaMz,
    VarQ,
}

#[derive(Args)]
struct CollapseCmd {
    /// stats/ensemble.csv (static collapse) or stats/series.csv (dynamic).
    input: PathBuf,
    #[arg(long, value_enum)]
    observable: ObservableArg,
    /// Fit window `lo:hi` on the raw abscissa.
    #[arg(long, value_parser = parse_range, conflicts_with_all = ["all", "early"])]
    window: Option<(f64, f64)>,
    /// Use every point.
    #[arg(long)]
    all: bool,
    /// Dynamic window `1 ≤ t ≤ FACTOR·L`.
    #[arg(long)]
    early: Option<f64>,
    /// Fix β instead of fitting it (Var_Q only).
    #[arg(long)]
    fix_beta: Option<f64>,
    /// ν of a dynamic fit.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// p selected from a series table.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value = "collapse")]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    ApproxHaarCz,
    ExactHaar,
}

impl From<EnsembleArg> for Ensemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::ApproxHaarCz => Ensemble::ApproxHaarCz,
            EnsembleArg::ExactHaar => Ensemble::ExactHaar,
        }
    }
}

#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    l: usize,
    #[arg(long)]
    p: f64,
    /// Circuit depth (default L²/2).
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, default_value_t = 50)]
    circuits: usize,
    #[arg(long, value_enum, default_value = "exact-haar")]
    ensemble: EnsembleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PointArgs {
    fn params(&self) -> CircuitParams {
        CircuitParams::new(self.l, self.p)
            .with_t_max(self.t_max.unwrap_or_else(|| default_t_max(self.l)))
            .with_ensemble(self.ensemble.into())
            .with_seed(self.seed)
    }
}

#[derive(Subcommand)]
enum ProbeCmd {
    /// Frame potential F_k of a two-qubit gate ensemble.
    FramePotential {
        #[arg(long, value_enum, default_value = "approx-haar-cz")]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 1_000_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Lyapunov exponent of the random Bernoulli/control map.
    Lyapunov {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2_000)]
        steps: usize,
        #[arg(long, default_value_t = 200)]
        trajectories: usize,
        #[arg(long, default_value_t = 128)]
        bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Collision probability from the replica model.
    Collision {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 1_000)]
        words: usize,
    },
    /// Late-time half-chain entanglement entropy (statevector).
    Entropy {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 40)]
        shots: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { spec, workers, output_dir } => {
            let mut s = SweepSpec::load(&spec)?;
            if let Some(d) = output_dir {
                s.output_dir = d;
            }
            let workers = match workers {
                Some(n) => Some(n),
                None => workers_from_env()?,
            };
            let out = cmd_sweep(&s, workers)?;
            println!(
                "{}: {} task(s) computed, {} reused",
                out.run_dir.display(),
                out.computed.len(),
                out.reused.len()
            );
        }
        Command::Collapse(c) => {
            let observable = match c.observable {
                ObservableArg::Mz => Observable::Mz,
                ObservableArg::DeltaMz => Observable::DeltaMz,
                ObservableArg::VarQ => Observable::VarQ,
            };
            let window = match (c.window, c.all, c.early) {
                (Some((lo, hi)), _, _) => Some(FitWindow::Range { lo, hi }),
                (None, true, _) => Some(FitWindow::All),
                (None, false, Some(factor)) => Some(FitWindow::SizeScaled { lo: 1.0, factor }),
                (None, false, None) => None,
            };
            let args = CollapseArgs {
                window,
                fix_beta: c.fix_beta,
                nu: c.nu,
                p: c.p,
                ..CollapseArgs::new(c.input, observable, c.out)
            };
            let fit = cmd_collapse(&args)?;
            println!("{}", serde_json::to_string_pretty(&fit).expect("fit results serialize"));
        }
        Command::Kl { p_table, q_table, bootstrap, seed, laplace, out } => {
            let args = KlArgs {
                p_table,
                q_table,
                config: KlConfig { n_bootstrap: bootstrap, seed, laplace },
                out_dir: out,
            };
            let report = cmd_kl(&args)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("KL reports serialize"));
        }
        Command::Probe(p) => {
            let probe = match p {
                ProbeCmd::FramePotential { ensemble, k, pairs, seed } => Probe::FramePotential {
                    ensemble: ensemble.into(),
                    k,
                    n_pairs: pairs,
                    seed,
                },
                ProbeCmd::Lyapunov { p, steps, trajectories, bits, seed } => Probe::Lyapunov {
                    p,
                    n_steps: steps,
                    n_trajectories: trajectories,
                    precision_bits: bits,
                    seed,
                },
                ProbeCmd::Collision { point, words } => Probe::Collision {
                    params: point.params(),
                    n_circuits: point.circuits,
                    n_words: words,
                },
                ProbeCmd::Entropy { point, shots } => Probe::Entropy {
                    params: point.params(),
                    n_circuits: point.circuits,
                    n_shots: shots,
                },
            };
            println!("{}", serde_json::to_string_pretty(&cmd_probe(&probe)?).expect("JSON values serialize"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // bad input (including a size beyond the statevector capacity)
            // shares the usage-error code; anything else is a runtime failure
            let input = matches!(
                e,
                CliError::Input(_)
                    | CliError::Core(bernoulli_core::Error::Parameter(_) | bernoulli_core::Error::Capacity { .. })
            );
            ExitCode::from(if input { 2 } else { 1 })
        }
    }
}
