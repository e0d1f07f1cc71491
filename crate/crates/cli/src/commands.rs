//! The `train`, `generate`, `eval` and `barycenter` commands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use pifm::analytics::svg::{scatter_svg, Layer, PALETTE};
use pifm::field::{load_checkpoint, save_checkpoint, Checkpoint, ModelParams, VectorField};
use pifm::geometry::{io, PointCloud, RngStream, StreamId};
use pifm::inference::{
    all_axis_orders, export_trajectory, integrate_path, strategy_to_path, Integrator, Strategy,
};
use pifm::training::{train_with_observer, write_history_csv, DataSource};
use pifm::transport::{free_support_barycenter, BarycenterOptions, BarycenterReport};

use crate::config::{RunConfig, SourceSpec};
use crate::manifest::{write_manifest, Timer};
use crate::parse::{parse_grid, parse_point, parse_strategy, slug};
use crate::scenario::{endpoint_name, run_scenario, save_cloud, scenario_spec, Overrides, ScenarioOutcome};

pub const CHECKPOINT_FILE: &str = "checkpoint.pifm";

pub fn cmd_train(cfg: &RunConfig, base: &Path, out: &Path) -> Result<ModelParams> {
    std::fs::create_dir_all(out)?;
    let mut timer = Timer::default();
    let tcfg = cfg.train_config()?;
    let (source, targets) = cfg.data(base)?;
    let config_text = cfg.to_toml()?;
    std::fs::write(out.join("config.toml"), &config_text)?;
    let trained = timer
        .time("train", || train_with_observer(&tcfg, &source, &targets, |_, _| {}))
        .context("training failed")?;
    let ck = Checkpoint {
        model: trained.model.clone(),
        seed: cfg.train.seed,
        config: serde_json::to_value(cfg)?,
    };
    save_checkpoint(&ck, &out.join(CHECKPOINT_FILE))?;
    let f = std::fs::File::create(out.join("loss.csv"))?;
    write_history_csv(&trained.history, std::io::BufWriter::new(f))?;
    write_manifest(out, "train", cfg.train.seed, &config_text, &timer)?;
    Ok(trained.model)
}

/// Load a checkpoint together with the run config stored in it.
pub fn load_model(path: &Path) -> Result<(ModelParams, RunConfig)> {
    let ck = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let cfg: RunConfig = if ck.config.is_null() {
        RunConfig::default()
    } else {
        serde_json::from_value(ck.config).context("checkpoint carries an unreadable config")?
    };
    Ok((ck.model, cfg))
}

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    /// CSV cloud; defaults to the checkpoint's training source.
    pub source: Option<PathBuf>,
    pub strategy: Option<String>,
    pub tvec: Option<String>,
    pub steps: Option<usize>,
    pub n_points: Option<usize>,
    pub all_orders: bool,
    pub trajectory: bool,
    pub seed: Option<u64>,
}

pub fn cmd_generate(args: &GenerateArgs, out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let mut timer = Timer::default();
    let (model, cfg) = load_model(&args.checkpoint)?;
    let (n, d) = (model.n_params(), model.dim());
    let base = args.checkpoint.parent().unwrap_or(Path::new("."));
    let seed = args.seed.unwrap_or(cfg.train.seed);
    let source = match &args.source {
        Some(p) => io::load_csv(p).with_context(|| format!("loading source {}", p.display()))?,
        None => {
            let ds: DataSource = cfg.data.source.load(base)?;
            let k = args.n_points.unwrap_or(cfg.eval.n_points);
            ds.sample(k, &mut RngStream::new(seed, StreamId::Oracle))?
        }
    };
    if source.dim() != d {
        bail!("source has dimension {}, checkpoint expects {d}", source.dim());
    }
    let t = match &args.tvec {
        Some(s) => parse_point(s, n)?,
        None => vec![1.0; n],
    };
    let steps = args.steps.unwrap_or(cfg.eval.steps);
    let mut strategies = Vec::new();
    if args.all_orders {
        strategies.extend(all_axis_orders(n).into_iter().map(|o| Strategy::axis_order(o, t.clone())));
        strategies.push(Strategy::diagonal(t.clone()));
    } else {
        let spec = args.strategy.clone().unwrap_or_else(|| cfg.eval.strategy.clone());
        strategies.push(parse_strategy(&spec, n, Path::new("."))?.with_terminal(&t));
    }
    save_cloud(out, "source.csv", &source)?;
    let mut written = vec!["source.csv".to_string()];
    let mut ends = Vec::new();
    for s in &strategies {
        let path = strategy_to_path(s, n, steps)?;
        let traj = timer.time(&format!("generate {}", s.label()), || {
            integrate_path(&model, &source, &path, Integrator::Euler)
        })?;
        let name = endpoint_name(s);
        save_cloud(out, &name, traj.endpoint())?;
        written.push(name);
        if args.trajectory {
            let dir = out.join("trajectories").join(slug(&s.label()));
            export_trajectory(&traj, &s.label(), &dir)?;
        }
        ends.push((s.label(), traj.endpoint().clone()));
    }
    let mut layers = vec![Layer::new("source", &source, PALETTE[0])];
    for (k, (label, e)) in ends.iter().enumerate() {
        layers.push(Layer::new(label.clone(), e, PALETTE[(k + 1) % PALETTE.len()]));
    }
    std::fs::write(out.join("plot.svg"), scatter_svg(&format!("endpoints at {t:?}"), layers))?;
    written.push("plot.svg".into());
    write_manifest(out, "generate", seed, &cfg.to_toml()?, &timer)?;
    Ok(written)
}

/// Evaluate a trained checkpoint with a scenario's metric battery.
pub fn cmd_eval(checkpoint: &Path, scenario: &str, overrides: &Overrides, out: &Path) -> Result<ScenarioOutcome> {
    let (model, stored) = load_model(checkpoint)?;
    let mut spec = scenario_spec(scenario)?;
    spec.config.train.seed = stored.train.seed;
    overrides.apply(&mut spec.config);
    let n = spec.config.train.n;
    let d = spec.config.data(Path::new("."))?.0.dim();
    if model.n_params() != n || model.dim() != d {
        bail!(
            "checkpoint has n = {}, d = {} but scenario {scenario} needs n = {n}, d = {d}",
            model.n_params(),
            model.dim()
        );
    }
    run_scenario(&spec, Path::new("."), out, Some(model))
}

#[derive(Debug, Serialize)]
struct BarycenterTiming {
    weights: Vec<f64>,
    file: String,
    report: BarycenterReport,
}

/// Free-support barycenters of `marginals` for each weight vector.
pub fn cmd_barycenter(
    marginals: &[SourceSpec],
    weights: &[Vec<f64>],
    n_points: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<PointCloud>> {
    std::fs::create_dir_all(out)?;
    if marginals.is_empty() {
        bail!("barycenter needs at least one marginal");
    }
    let mut timer = Timer::default();
    let clouds: Vec<PointCloud> = marginals
        .iter()
        .enumerate()
        .map(|(j, m)| -> Result<PointCloud> {
            Ok(match m.load(Path::new("."))? {
                DataSource::Cloud(c) => c,
                ds => ds.sample(n_points, &mut RngStream::keyed(seed, StreamId::Oracle, j as u32))?,
            })
        })
        .collect::<Result<_>>()?;
    let mut outputs = Vec::new();
    let mut timings = Vec::new();
    for (k, w) in weights.iter().enumerate() {
        if w.len() != clouds.len() {
            bail!("weights {w:?} do not match {} marginals", clouds.len());
        }
        if w.iter().any(|&v| v < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!(
                "weights {w:?} lie outside the simplex; the free-support barycenter is only defined for nonnegative weights summing to 1"
            );
        }
        let (bary, report) = timer.time(&format!("barycenter {k}"), || {
            free_support_barycenter(&clouds, w, &BarycenterOptions::default())
        })?;
        let name = if weights.len() == 1 {
            "barycenter.csv".to_string()
        } else {
            format!("barycenter_{k:03}.csv")
        };
        save_cloud(out, &name, &bary)?;
        timings.push(BarycenterTiming {
            weights: w.clone(),
            file: name,
            report,
        });
        outputs.push(bary);
    }
    std::fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timings)? + "\n")?;
    let echo = serde_json::to_string(&serde_json::json!({ "marginals": marginals, "weights": weights, "n_points": n_points }))?;
    write_manifest(out, "barycenter", seed, &echo, &timer)?;
    Ok(outputs)
}

/// Weight vectors from `--lambdas a,b,..` or a `--grid` over the targets' simplex.
pub fn barycenter_weights(lambdas: Option<&str>, grid: Option<&str>, n_marginals: usize) -> Result<Vec<Vec<f64>>> {
    match (lambdas, grid) {
        (Some(l), None) => Ok(vec![parse_point(l, n_marginals)?]),
        (None, Some(g)) => {
            let pts = parse_grid(g, n_marginals.saturating_sub(1))?;
            Ok(pts
                .into_iter()
                .map(|t| {
                    let mut w = vec![1.0 - t.iter().sum::<f64>()];
                    w.extend(t);
                    w
                })
                .collect())
        }
        (None, None) => Ok(vec![vec![1.0 / n_marginals as f64; n_marginals]]),
        (Some(_), Some(_)) => bail!("give either --lambdas or --grid, not both"),
    }
}
