use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use pifm_cli::commands::{barycenter_weights, cmd_barycenter, cmd_eval, cmd_generate, cmd_train, GenerateArgs};
use pifm_cli::config::SourceSpec;
use pifm_cli::{run_scenario, scenario_spec, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "pifm", version, about = "Path-independent flow matching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Training steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// independent | ot | prescribed
    #[arg(long)]
    coupling: Option<String>,
    /// order:<perm> | diagonal | path:<file>
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    all_orders: bool,
    /// e.g. "simplex:0.25;1,1;1.2,0.3"
    #[arg(long)]
    grid: Option<String>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            steps: a.steps,
            lambda: a.lambda,
            sigma: a.sigma,
            coupling: a.coupling,
            strategy: a.strategy,
            all_orders: a.all_orders,
            grid: a.grid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Integrate a trained model from a source cloud.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV source cloud (defaults to samples of the training source).
        #[arg(long)]
        source: Option<PathBuf>,
        /// Terminal parameter point, e.g. "1,1".
        #[arg(long = "t")]
        tvec: Option<String>,
        /// Euler steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        all_orders: bool,
        /// Also write every intermediate snapshot.
        #[arg(long)]
        trajectory: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario's metric battery on a trained checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Free-support Wasserstein barycenter of sampled or CSV marginals.
    Barycenter {
        /// CSV file or inline JSON shape, once per marginal.
        #[arg(long = "marginal", required = true)]
        marginals: Vec<String>,
        /// Weights, one per marginal.
        #[arg(long)]
        lambdas: Option<String>,
        /// Grid over the weights of all marginals but the first.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 512)]
        n_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate a named scenario end to end.
    Scenario {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

fn marginal_spec(s: &str) -> Result<SourceSpec> {
    if s.trim_start().starts_with('{') {
        let shape = serde_json::from_str(s).with_context(|| format!("bad shape spec {s}"))?;
        Ok(SourceSpec::Shape(shape))
    } else {
        Ok(SourceSpec::File { file: s.into() })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out, overrides } => {
            let mut cfg = RunConfig::load_over(&RunConfig::default(), &config)?;
            Overrides::from(overrides).apply(&mut cfg);
            let base = config.parent().unwrap_or(Path::new("."));
            cmd_train(&cfg, base, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Generate {
            checkpoint,
            source,
            tvec,
            steps,
            n_points,
            strategy,
            all_orders,
            trajectory,
            seed,
            out,
        } => {
            let args = GenerateArgs {
                checkpoint,
                source,
                strategy,
                tvec,
                steps,
                n_points,
                all_orders,
                trajectory,
                seed,
            };
            for f in cmd_generate(&args, &out)? {
                println!("{}", out.join(f).display());
            }
        }
        Command::Eval {
            checkpoint,
            scenario,
            out,
            overrides,
        } => {
            let outcome = cmd_eval(&checkpoint, &scenario, &overrides.into(), &out)?;
            println!("{}", serde_json::to_string_pretty(&outcome.metrics.gaps)?);
        }
        Command::Barycenter {
            marginals,
            lambdas,
            grid,
            n_points,
            seed,
            out,
        } => {
            let specs = marginals.iter().map(|m| marginal_spec(m)).collect::<Result<Vec<_>>>()?;
            let weights = barycenter_weights(lambdas.as_deref(), grid.as_deref(), specs.len())?;
            cmd_barycenter(&specs, &weights, n_points, seed, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Scenario {
            name,
            config,
            out,
            overrides,
        } => {
            let mut spec = scenario_spec(&name)?;
            let base = match &config {
                Some(path) => {
                    spec.config = RunConfig::load_over(&spec.config, path)?;
                    path.parent().unwrap_or(Path::new(".")).to_path_buf()
                }
                None => PathBuf::from("."),
            };
            Overrides::from(overrides).apply(&mut spec.config);
            let outcome = run_scenario(&spec, &base, &out, None)?;
            let m = &outcome.metrics;
            for g in &m.gaps {
                println!("{} max gap at {:?}: {:.4} (floor {:.4})", g.model, g.param_point, g.max_gap, g.sampling_floor);
            }
            for (k, v) in &m.summary {
                println!("{k}: {v:.4}");
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
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
