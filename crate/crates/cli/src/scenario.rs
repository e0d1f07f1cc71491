//! Named end-to-end experiments: training, metric battery, plots and manifest.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pifm::analytics::{
    barycenter_compare, gap_report, pifm_transport_cost, slice_barycenter_check, strategy_endpoints,
    svg::{panels_svg, Layer, Panel, PALETTE},
    BarycenterGridReport, CompareOptions, GaussianSpec, Metric, Oracle, PairGap, SliceReport,
};
use pifm::field::{save_checkpoint, Checkpoint, Composed, ModelParams, VectorField};
use pifm::geometry::{apply_map, empirical_moments, io, PointCloud, RngStream, ShapeSpec, StreamId};
use pifm::inference::{generate, integrate_with, Integrator, PathSpec, Strategy};
use pifm::training::{train, train_cfm, write_history_csv, DataSource, TrainConfig, TrainOutput};
use pifm::transport::AffineMap;

use crate::config::{RunConfig, SourceSpec};
use crate::manifest::{write_manifest, Timer};
use crate::parse::{parse_grid, parse_strategy, slug};

pub const SCENARIOS: [&str; 6] = [
    "fig1-multimarginal",
    "gaussian-oracle",
    "barycenter-grid",
    "domain-shift",
    "curly",
    "appendix-shapes",
];

/// Oracle-stream keys of evaluation draws, disjoint from the comparison module's.
const KEY_SOURCE: u32 = 3_000_000;
const KEY_SOURCE_TWIN: u32 = 3_000_001;
const KEY_TARGET: u32 = 3_000_010;
const KEY_TARGET_TWIN: u32 = 3_000_011;
const KEY_SLICE: u32 = 3_000_100;

const PLOT_POINTS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub config: RunConfig,
    /// Independent training replicates (domain shift only).
    pub replicates: usize,
}

fn disc(c: [f64; 2], r: f64) -> SourceSpec {
    ShapeSpec::disc(c.to_vec(), r).into()
}

fn gaussian_spec() -> GaussianSpec {
    GaussianSpec {
        means: vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]],
        cov: vec![vec![0.25, 0.0], vec![0.0, 0.25]],
    }
}

fn fig1_data(cfg: &mut RunConfig) {
    cfg.data.source = disc([0.0, 0.0], 1.0);
    cfg.data.targets = vec![ShapeSpec::square(vec![5.0, 0.0], 1.0).into(), disc([0.0, 5.0], 0.5)];
}

/// Default spec for a scenario name.
pub fn scenario_spec(name: &str) -> Result<ScenarioSpec> {
    let mut cfg = RunConfig::default();
    let mut replicates = 1;
    match name {
        "fig1-multimarginal" => {
            fig1_data(&mut cfg);
            cfg.eval.grid = "simplex:0.25;1,1;1.2,0.3".into();
        }
        "barycenter-grid" => {
            fig1_data(&mut cfg);
            cfg.eval.grid = "simplex:0.25;1,1;1.2,0.3;-0.25,0.5;0.5,1".into();
        }
        "gaussian-oracle" => {
            let g = gaussian_spec();
            cfg.data.source = g.marginal(0).into();
            cfg.data.targets = vec![g.marginal(1).into(), g.marginal(2).into()];
            cfg.eval.grid = "simplex:0.25;1,1;1.2,0.3".into();
        }
        "domain-shift" => {
            cfg.data.source = disc([0.0, 0.0], 1.0);
            cfg.data.targets = vec![disc([5.0, 0.0], 0.5), disc([0.0, 5.0], 1.0)];
            cfg.train.steps = 2000;
            cfg.eval.n_points = 512;
            replicates = 10;
        }
        "curly" => {
            cfg.data.source = ShapeSpec::isotropic(vec![0.0, 0.0], 1.0).into();
            cfg.data.targets = Vec::new();
            cfg.train.coupling = "prescribed".into();
            cfg.train.maps = vec![AffineMap::scaling(2, -1.0), AffineMap::scaling(2, 3.0)];
            cfg.train.path = "curly".into();
            cfg.train.lambda = 1.0;
            cfg.train.monitor_pi = true;
        }
        "appendix-shapes" => {
            cfg.data.source = ShapeSpec::isotropic(vec![0.0, 0.0], 0.25).into();
            cfg.data.targets = vec![
                ShapeSpec::Spiral {
                    center: vec![6.0, 0.0],
                    turns: 1.5,
                    scale: 1.5,
                    noise: 0.05,
                }
                .into(),
                ShapeSpec::Moons {
                    center: vec![0.0, 6.0],
                    scale: 1.0,
                    noise: 0.05,
                }
                .into(),
            ];
            cfg.eval.grid = "simplex:0.5;1,1".into();
            cfg.eval.barycenter_points = 256;
        }
        other => bail!("unknown scenario {other:?}; available: {}", SCENARIOS.join(", ")),
    }
    Ok(ScenarioSpec {
        name: name.to_string(),
        config: cfg,
        replicates,
    })
}

/// Command-line overrides applied on top of a scenario or config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub coupling: Option<String>,
    pub strategy: Option<String>,
    pub all_orders: bool,
    pub grid: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(s) = self.steps {
            cfg.train.steps = s;
        }
        if let Some(l) = self.lambda {
            cfg.train.lambda = l;
        }
        if let Some(s) = self.sigma {
            cfg.train.sigma = s;
        }
        if let Some(c) = &self.coupling {
            cfg.train.coupling = c.clone();
        }
        if let Some(s) = &self.strategy {
            cfg.eval.strategy = s.clone();
        }
        if self.all_orders {
            cfg.eval.all_orders = true;
        }
        if let Some(g) = &self.grid {
            cfg.eval.grid = g.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub model: String,
    pub param_point: Vec<f64>,
    pub strategies: Vec<String>,
    pub pairs: Vec<PairGap>,
    pub max_gap: f64,
    /// W2 between diagonal endpoints of two independent source draws.
    pub sampling_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub model: String,
    pub param_point: Vec<f64>,
    pub strategy: String,
    pub w2: f64,
    /// W2 between two independent draws of the reference.
    pub sampling_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub param_point: Vec<f64>,
    pub cost: f64,
}

/// Everything a scenario measures. Wall times live in `timing.json`, not here.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub seed: u64,
    pub lambda: f64,
    pub metric: String,
    /// Largest mean displacement between the source and a target.
    pub scale: f64,
    pub gaps: Vec<GapRecord>,
    pub target_w2: Vec<TargetRecord>,
    /// Largest floor among all reported comparisons.
    pub sampling_floor: f64,
    pub barycenter: Option<BarycenterGridReport>,
    pub slice: Option<SliceReport>,
    pub transport_cost: Vec<CostRecord>,
    pub summary: BTreeMap<String, f64>,
}

impl Metrics {
    fn new(spec: &ScenarioSpec, metric: Metric) -> Self {
        Metrics {
            scenario: spec.name.clone(),
            seed: spec.config.train.seed,
            lambda: spec.config.train.lambda,
            metric: metric.label(spec.config.eval.n_points),
            ..Default::default()
        }
    }

    fn finish(&mut self) {
        let floors = self
            .gaps
            .iter()
            .map(|g| g.sampling_floor)
            .chain(self.target_w2.iter().map(|t| t.sampling_floor))
            .chain(
                self.barycenter
                    .iter()
                    .flat_map(|b| b.entries.iter().filter_map(|e| e.sampling_floor)),
            );
        self.sampling_floor = floors.fold(0.0, f64::max);
    }

    /// Non-finite numbers anywhere in the report.
    pub fn non_finite(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for g in &self.gaps {
            if !g.max_gap.is_finite() || !g.sampling_floor.is_finite() {
                bad.push(format!("gap {} at {:?}", g.model, g.param_point));
            }
        }
        for t in &self.target_w2 {
            if !t.w2.is_finite() {
                bad.push(format!("target w2 {} {} at {:?}", t.model, t.strategy, t.param_point));
            }
        }
        if let Some(b) = &self.barycenter {
            for e in &b.entries {
                if e.w2.is_some_and(|w| !w.is_finite()) {
                    bad.push(format!("barycenter w2 at {:?}", e.param_point));
                }
            }
        }
        for (k, v) in &self.summary {
            if !v.is_finite() {
                bad.push(k.clone());
            }
        }
        bad
    }

    pub fn gap(&self, model: &str) -> Option<&GapRecord> {
        self.gaps.iter().find(|g| g.model == model)
    }
}

/// Drop every object key ending in `wall_ms`, recursively.
pub fn strip_wall_times(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|k, _| !k.ends_with("wall_ms"));
            m.values_mut().for_each(strip_wall_times);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_wall_times),
        _ => {}
    }
}

pub struct ScenarioOutcome {
    pub metrics: Metrics,
    pub timer: Timer,
}

struct Ctx<'a> {
    spec: &'a ScenarioSpec,
    out: &'a Path,
    seed: u64,
    metric: Metric,
    n_points: usize,
    steps: usize,
    timing: serde_json::Map<String, serde_json::Value>,
    panels: Vec<(String, Vec<(String, PointCloud)>)>,
}

impl Ctx<'_> {
    fn draw(&self, source: &DataSource, key: u32) -> Result<PointCloud> {
        Ok(source.sample(self.n_points, &mut RngStream::keyed(self.seed, StreamId::Oracle, key))?)
    }

    fn panel(&mut self, title: impl Into<String>, layers: Vec<(&str, &PointCloud)>) {
        let layers = layers
            .into_iter()
            .map(|(l, c)| {
                let k = c.len().min(PLOT_POINTS);
                (l.to_string(), c.select(&(0..k).collect::<Vec<_>>()))
            })
            .collect();
        self.panels.push((title.into(), layers));
    }

    fn write_plot(&mut self, name: &str, columns: usize) -> Result<()> {
        let panels: Vec<Panel> = self
            .panels
            .iter()
            .map(|(title, layers)| Panel {
                title: title.clone(),
                layers: layers
                    .iter()
                    .enumerate()
                    .map(|(k, (l, c))| Layer::new(l.clone(), c, PALETTE[k % PALETTE.len()]))
                    .collect(),
            })
            .collect();
        std::fs::create_dir_all(self.out.join("plots"))?;
        std::fs::write(self.out.join("plots").join(name), panels_svg(&panels, columns))?;
        self.panels.clear();
        Ok(())
    }

    /// Gaps between all strategies at `t`, plus W2 of every endpoint to `reference`.
    fn gaps(
        &mut self,
        metrics: &mut Metrics,
        model: &str,
        field: &dyn VectorField,
        source: &DataSource,
        t: &[f64],
        reference: Option<(&PointCloud, f64)>,
    ) -> Result<(PointCloud, Vec<(Strategy, PointCloud)>)> {
        let a = self.draw(source, KEY_SOURCE)?;
        let b = self.draw(source, KEY_SOURCE_TWIN)?;
        let ends = strategy_endpoints(field, &a, t, self.steps)?;
        let rep = gap_report(t, &ends, self.metric, reference.map(|r| r.0), self.seed)?;
        let diag = Strategy::diagonal(t.to_vec());
        let twin = generate(field, &b, &diag, self.steps, Integrator::Euler)?;
        let own = &ends.last().expect("diagonal is always included").1;
        let floor = self.metric.distance(own, &twin, self.seed, KEY_SOURCE_TWIN)?;
        if let (Some(w2s), Some((_, ref_floor))) = (&rep.target_w2, reference) {
            for (s, w2) in rep.strategies.iter().zip(w2s) {
                metrics.target_w2.push(TargetRecord {
                    model: model.to_string(),
                    param_point: t.to_vec(),
                    strategy: s.clone(),
                    w2: *w2,
                    sampling_floor: ref_floor,
                });
            }
        }
        metrics.gaps.push(GapRecord {
            model: model.to_string(),
            param_point: t.to_vec(),
            strategies: rep.strategies,
            pairs: rep.gaps,
            max_gap: rep.max_gap,
            sampling_floor: floor,
        });
        Ok((a, ends))
    }

    fn compare(
        &mut self,
        metrics: &mut Metrics,
        field: &dyn VectorField,
        marginals: &[DataSource],
        oracle: &Oracle,
        n_points: usize,
    ) -> Result<()> {
        let cfg = &self.spec.config;
        let n = field.n_params();
        let grid = parse_grid(&cfg.eval.grid, n)?;
        let opts = CompareOptions {
            n_points,
            steps: self.steps,
            strategy: parse_strategy(&cfg.eval.strategy, n, Path::new("."))?,
            metric: self.metric,
            seed: self.seed,
            ..CompareOptions::default()
        };
        let (report, clouds) = barycenter_compare(field, marginals, &grid, oracle, &opts)?;
        let timing: Vec<serde_json::Value> = report
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "param_point": e.param_point,
                    "oracle": e.oracle,
                    "model_wall_ms": e.model_wall_ms,
                    "oracle_wall_ms": e.oracle_wall_ms,
                })
            })
            .collect();
        self.timing.insert("barycenter".into(), timing.into());
        let mut all_model = Vec::new();
        let mut all_oracle = Vec::new();
        for c in &clouds {
            let k = c.model.len().min(PLOT_POINTS / 2);
            all_model.extend(c.model.select(&(0..k).collect::<Vec<_>>()).coords().iter().copied());
            if let Some(o) = &c.oracle {
                all_oracle.extend(o.select(&(0..k).collect::<Vec<_>>()).coords().iter().copied());
            }
        }
        let d = field.dim();
        let model_cloud = PointCloud::new(d, all_model)?;
        let mut layers = Vec::new();
        let margs: Vec<PointCloud> = marginals
            .iter()
            .enumerate()
            .map(|(j, m)| self.draw(m, KEY_TARGET + 100 + j as u32))
            .collect::<Result<_>>()?;
        let names = ["source", "target 1", "target 2", "target 3", "target 4"];
        for (j, m) in margs.iter().enumerate() {
            layers.push((names[j.min(4)], m));
        }
        layers.push(("model endpoints", &model_cloud));
        let oracle_cloud;
        if !all_oracle.is_empty() {
            oracle_cloud = PointCloud::new(d, all_oracle)?;
            layers.push(("oracle", &oracle_cloud));
        }
        self.panel("barycenter grid", layers);
        for (e, c) in report.entries.iter().zip(&clouds) {
            let src = &margs[0];
            let mut layers = vec![("source", src), ("model", &c.model)];
            if let Some(o) = &c.oracle {
                layers.push(("oracle", o));
            }
            let w2 = e.w2.map_or("no oracle".to_string(), |w| format!("W2 {w:.3}"));
            self.panel(format!("{:?} {w2}", e.param_point), layers);
        }
        self.write_plot("barycenter_grid.svg", 4)?;
        metrics.barycenter = Some(report);
        Ok(())
    }
}

fn scale(source: &DataSource, targets: &[DataSource], ctx: &Ctx) -> Result<f64> {
    let m0 = empirical_moments(&ctx.draw(source, KEY_TARGET + 50)?)?.0;
    let mut s: f64 = 0.0;
    for (j, t) in targets.iter().enumerate() {
        let m = empirical_moments(&ctx.draw(t, KEY_TARGET + 51 + j as u32)?)?.0;
        s = s.max(m.iter().zip(&m0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
    }
    Ok(s)
}

fn save_model(out: &Path, name: &str, model: &ModelParams, cfg: &RunConfig, trained: &TrainOutput) -> Result<()> {
    std::fs::create_dir_all(out.join("models"))?;
    let ck = Checkpoint {
        model: model.clone(),
        seed: cfg.train.seed,
        config: serde_json::to_value(cfg)?,
    };
    save_checkpoint(&ck, &out.join("models").join(format!("{name}.pifm")))?;
    let f = std::fs::File::create(out.join("models").join(format!("{name}_loss.csv")))?;
    write_history_csv(&trained.history, std::io::BufWriter::new(f))?;
    Ok(())
}

fn tail_mean(out: &TrainOutput, f: impl Fn(&pifm::training::LossBreakdown) -> f64) -> f64 {
    let k = out.history.len().min(100);
    if k == 0 {
        return f64::NAN;
    }
    out.history[out.history.len() - k..].iter().map(f).sum::<f64>() / k as f64
}

/// Train (unless `model` is given) and evaluate; writes every artifact into `out`.
pub fn run_scenario(spec: &ScenarioSpec, base: &Path, out: &Path, model: Option<ModelParams>) -> Result<ScenarioOutcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cfg = &spec.config;
    let mut timer = Timer::default();
    let metric = cfg.eval.metric()?;
    let mut metrics = Metrics::new(spec, metric);
    let mut ctx = Ctx {
        spec,
        out,
        seed: cfg.train.seed,
        metric,
        n_points: cfg.eval.n_points,
        steps: cfg.eval.steps,
        timing: serde_json::Map::new(),
        panels: Vec::new(),
    };
    let config_text = cfg.to_toml()?;
    std::fs::write(out.join("config.toml"), &config_text)?;
    let (source, targets) = cfg.data(base)?;
    let tcfg = cfg.train_config()?;
    let evaluated = model.is_some();

    let train_one = |timer: &mut Timer, name: &str, tcfg: &TrainConfig| -> Result<ModelParams> {
        let trained = timer.time(&format!("train {name}"), || train(tcfg, &source, &targets))?;
        let mut echo = cfg.clone();
        echo.train.seed = tcfg.seed;
        save_model(out, name, &trained.model, &echo, &trained)?;
        Ok(trained.model)
    };

    match spec.name.as_str() {
        "gaussian-oracle" => {
            let model = match model {
                Some(m) => m,
                None => train_one(&mut timer, "pifm", &tcfg)?,
            };
            let g = gaussian_spec();
            metrics.scale = scale(&source, &targets, &ctx)?;
            timer.time("eval", || -> Result<()> {
                let mut margs = vec![source.clone()];
                margs.extend(targets.iter().cloned());
                ctx.compare(&mut metrics, &model, &margs, &Oracle::AnalyticGaussian(g.clone()), cfg.eval.n_points)?;
                let t = [1.0, 1.0];
                let oracle = |key| pifm::analytics::sample_oracle(&g, &t, ctx.n_points, &mut RngStream::keyed(ctx.seed, StreamId::Oracle, key));
                let (r1, r2) = (oracle(KEY_TARGET)?, oracle(KEY_TARGET_TWIN)?);
                let floor = metric.distance(&r1, &r2, ctx.seed, KEY_TARGET)?;
                let (src, ends) = ctx.gaps(&mut metrics, "pifm", &model, &source, &t, Some((&r1, floor)))?;
                strategy_panels(&mut ctx, "pifm", &src, &ends, Some(&r1))?;
                ctx.write_plot("commutativity.svg", 4)?;
                // Shared-Σ Gaussians: the optimal maps are translations.
                let a = ctx.draw(&source, KEY_SLICE)?;
                let imgs: Vec<PointCloud> = g.means[1..]
                    .iter()
                    .map(|m| {
                        let shift: Vec<f64> = m.iter().zip(&g.means[0]).map(|(x, y)| x - y).collect();
                        a.translated(&shift)
                    })
                    .collect::<pifm::Result<_>>()?;
                for p in parse_grid(&cfg.eval.grid, 2)? {
                    metrics.transport_cost.push(CostRecord {
                        cost: pifm_transport_cost(&a, &imgs, &p)?,
                        param_point: p,
                    });
                }
                let k = 256.min(ctx.n_points);
                let idx: Vec<usize> = (0..k).collect();
                let m3 = [a.select(&idx), imgs[0].select(&idx), imgs[1].select(&idx)];
                metrics.slice = Some(slice_barycenter_check(&model, &m3, &[(0.6, 0.3), (0.0, 0.5)], ctx.steps, metric, ctx.seed)?);
                Ok(())
            })?;
        }
        "fig1-multimarginal" | "barycenter-grid" => {
            let model = match model {
                Some(m) => m,
                None => train_one(&mut timer, "pifm", &tcfg)?,
            };
            metrics.scale = scale(&source, &targets, &ctx)?;
            let baseline = if spec.name == "fig1-multimarginal" && !evaluated {
                let mut parts: Vec<Box<dyn VectorField>> = Vec::new();
                for (i, tgt) in targets.iter().enumerate() {
                    let mut c = tcfg.clone();
                    c.n = 1;
                    c.lambda = 0.0;
                    c.seed = tcfg.seed + i as u64;
                    let name = format!("cfm{}", i + 1);
                    let trained = timer.time(&format!("train {name}"), || train_cfm(&c, &source, tgt))?;
                    let mut echo = cfg.clone();
                    echo.train.n = 1;
                    echo.train.seed = c.seed;
                    echo.data.targets = vec![cfg.data.targets[i].clone()];
                    save_model(out, &name, &trained.model, &echo, &trained)?;
                    parts.push(Box::new(trained.model));
                }
                Some(Composed::new(parts)?)
            } else {
                None
            };
            timer.time("eval", || -> Result<()> {
                let t = vec![1.0; tcfg.n];
                let (src, ends) = ctx.gaps(&mut metrics, "pifm", &model, &source, &t, None)?;
                strategy_panels(&mut ctx, "pifm", &src, &ends, None)?;
                if let Some(b) = &baseline {
                    let (src, ends) = ctx.gaps(&mut metrics, "cfm-composition", b, &source, &t, None)?;
                    strategy_panels(&mut ctx, "cfm composition", &src, &ends, None)?;
                }
                ctx.write_plot("commutativity.svg", 3)?;
                let mut margs = vec![source.clone()];
                margs.extend(targets.iter().cloned());
                ctx.compare(&mut metrics, &model, &margs, &Oracle::FreeSupport, cfg.eval.barycenter_points)?;
                Ok(())
            })?;
        }
        "curly" => {
            let model = match model {
                Some(m) => m,
                None => {
                    let trained = timer.time("train pifm", || train(&tcfg, &source, &[]))?;
                    save_model(out, "pifm", &trained.model, cfg, &trained)?;
                    metrics.summary.insert("final_fm".into(), tail_mean(&trained, |l| l.fm));
                    metrics.summary.insert("final_pi".into(), tail_mean(&trained, |l| l.pi));
                    trained.model
                }
            };
            // Composing the prescribed maps gives the joint target.
            let joint = compose_maps(&cfg.train.maps)?;
            timer.time("eval", || -> Result<()> {
                let t = vec![1.0; tcfg.n];
                let r1 = map_cloud(&ctx.draw(&source, KEY_TARGET)?, &joint)?;
                let r2 = map_cloud(&ctx.draw(&source, KEY_TARGET_TWIN)?, &joint)?;
                let floor = metric.distance(&r1, &r2, ctx.seed, KEY_TARGET)?;
                metrics.scale = empirical_moments(&r1)?.1.trace().sqrt();
                let (src, ends) = ctx.gaps(&mut metrics, "pifm", &model, &source, &t, Some((&r1, floor)))?;
                strategy_panels(&mut ctx, "pifm", &src, &ends, Some(&r1))?;
                ctx.write_plot("curly.svg", 3)?;
                let worst = metrics.target_w2.iter().map(|r| r.w2).fold(0.0, f64::max);
                metrics.summary.insert("max_target_w2".into(), worst);
                Ok(())
            })?;
        }
        "domain-shift" => {
            let t_from = vec![0.0, 0.5];
            let t_to = vec![1.0, 0.5];
            let unseen: DataSource = ShapeSpec::disc(vec![0.0, 2.5], 1.0).into();
            let expected: DataSource = ShapeSpec::disc(vec![5.0, 2.5], 0.5).into();
            metrics.scale = scale(&source, &targets, &ctx)?;
            let replicates = if evaluated { 1 } else { spec.replicates.max(1) };
            let mut given = model;
            let mut w2s = Vec::new();
            for k in 0..replicates {
                let mut c = tcfg.clone();
                c.seed = tcfg.seed + k as u64;
                let name = format!("pifm_seed{}", c.seed);
                let model = match given.take() {
                    Some(m) => m,
                    None => train_one(&mut timer, &name, &c)?,
                };
                let rec = timer.time(&format!("eval {name}"), || -> Result<TargetRecord> {
                    let draw = |d: &DataSource, key| d.sample(ctx.n_points, &mut RngStream::keyed(c.seed, StreamId::Oracle, key));
                    let src = draw(&unseen, KEY_SOURCE)?;
                    let want = draw(&expected, KEY_TARGET)?;
                    let twin = draw(&expected, KEY_TARGET_TWIN)?;
                    let path = PathSpec::new(vec![t_from.clone(), t_to.clone()], ctx.steps)?;
                    let end = integrate_with(&model, &src, &path, Integrator::Euler, |_, _| {})?;
                    if k == 0 {
                        let train_src = draw(&source, KEY_SOURCE_TWIN)?;
                        let t1 = draw(&targets[0], KEY_TARGET + 200)?;
                        let t2 = draw(&targets[1], KEY_TARGET + 201)?;
                        ctx.panel(
                            format!("seed {}", c.seed),
                            vec![
                                ("training source", &train_src),
                                ("training target t", &t1),
                                ("training target s", &t2),
                                ("unseen source", &src),
                                ("expected", &want),
                                ("model", &end),
                            ],
                        );
                    }
                    Ok(TargetRecord {
                        model: name.clone(),
                        param_point: t_to.clone(),
                        strategy: format!("path:{t_from:?}->{t_to:?}"),
                        w2: metric.distance(&end, &want, c.seed, KEY_TARGET)?,
                        sampling_floor: metric.distance(&twin, &want, c.seed, KEY_TARGET_TWIN)?,
                    })
                })?;
                w2s.push(rec.w2);
                metrics.target_w2.push(rec);
            }
            ctx.write_plot("domain_shift.svg", 1)?;
            let mean = w2s.iter().sum::<f64>() / w2s.len() as f64;
            let var = w2s.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (w2s.len().max(2) - 1) as f64;
            metrics.summary.insert("w2_mean".into(), mean);
            metrics.summary.insert("w2_std".into(), if w2s.len() > 1 { var.sqrt() } else { 0.0 });
            metrics.summary.insert("replicates".into(), w2s.len() as f64);
        }
        "appendix-shapes" => {
            let model = match model {
                Some(m) => m,
                None => train_one(&mut timer, "pifm", &tcfg)?,
            };
            metrics.scale = scale(&source, &targets, &ctx)?;
            timer.time("eval", || -> Result<()> {
                let t = vec![1.0; tcfg.n];
                let (src, ends) = ctx.gaps(&mut metrics, "pifm", &model, &source, &t, None)?;
                strategy_panels(&mut ctx, "pifm", &src, &ends, None)?;
                ctx.write_plot("commutativity.svg", 3)?;
                let mut margs = vec![source.clone()];
                margs.extend(targets.iter().cloned());
                ctx.compare(&mut metrics, &model, &margs, &Oracle::FreeSupport, cfg.eval.barycenter_points)?;
                Ok(())
            })?;
        }
        other => bail!("unknown scenario {other:?}; available: {}", SCENARIOS.join(", ")),
    }
    metrics.finish();
    write_reports(out, &metrics, ctx.timing, &timer)?;
    let bad = metrics.non_finite();
    if !bad.is_empty() {
        bail!("non-finite metrics: {}", bad.join("; "));
    }
    let command = if evaluated { "eval" } else { "scenario" };
    write_manifest(out, &format!("{command} {}", spec.name), cfg.train.seed, &config_text, &timer)?;
    Ok(ScenarioOutcome { metrics, timer })
}

fn compose_maps(maps: &[AffineMap]) -> Result<AffineMap> {
    let Some(first) = maps.first() else {
        bail!("the curly scenario needs prescribed maps");
    };
    let mut acc = first.clone();
    for m in &maps[1..] {
        // x ↦ M (A x + a) + m
        let d = acc.dim();
        let matrix = (0..d)
            .map(|r| (0..d).map(|c| (0..d).map(|k| m.matrix[r][k] * acc.matrix[k][c]).sum()).collect())
            .collect();
        let offset = m.apply(&acc.offset);
        acc = AffineMap { matrix, offset };
    }
    Ok(acc)
}

fn map_cloud(c: &PointCloud, m: &AffineMap) -> Result<PointCloud> {
    let d = m.dim();
    let a = nalgebra::DMatrix::from_fn(d, d, |r, k| m.matrix[r][k]);
    Ok(apply_map(c, &a, &m.offset)?)
}

fn strategy_panels(
    ctx: &mut Ctx,
    model: &str,
    source: &PointCloud,
    ends: &[(Strategy, PointCloud)],
    reference: Option<&PointCloud>,
) -> Result<()> {
    for (s, e) in ends {
        let mut layers = vec![("source", source)];
        if let Some(r) = reference {
            layers.push(("target", r));
        }
        layers.push(("endpoint", e));
        ctx.panel(format!("{model} {}", s.label()), layers);
    }
    Ok(())
}

fn write_reports(
    out: &Path,
    metrics: &Metrics,
    mut timing: serde_json::Map<String, serde_json::Value>,
    timer: &Timer,
) -> Result<()> {
    let mut v = serde_json::to_value(metrics)?;
    strip_wall_times(&mut v);
    std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&v)? + "\n")?;
    timing.insert("phases".into(), serde_json::to_value(timer.phases())?);
    std::fs::write(
        out.join("timing.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(timing))? + "\n",
    )?;
    let mut w = csv::Writer::from_path(out.join("metrics.csv"))?;
    w.write_record(["kind", "model", "param_point", "label", "value", "sampling_floor"])?;
    let pt = |p: &[f64]| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    for g in &metrics.gaps {
        for p in &g.pairs {
            w.write_record([
                "gap",
                &g.model,
                &pt(&g.param_point),
                &format!("{}|{}", p.a, p.b),
                &p.w2.to_string(),
                &g.sampling_floor.to_string(),
            ])?;
        }
    }
    for t in &metrics.target_w2 {
        w.write_record([
            "target_w2",
            &t.model,
            &pt(&t.param_point),
            &t.strategy,
            &t.w2.to_string(),
            &t.sampling_floor.to_string(),
        ])?;
    }
    if let Some(b) = &metrics.barycenter {
        for e in &b.entries {
            let kind = serde_json::to_value(e.oracle)?;
            w.write_record([
                "barycenter_w2",
                "pifm",
                &pt(&e.param_point),
                kind.as_str().unwrap_or("none"),
                &e.w2.map_or(String::new(), |v| v.to_string()),
                &e.sampling_floor.map_or(String::new(), |v| v.to_string()),
            ])?;
        }
    }
    for c in &metrics.transport_cost {
        w.write_record(["transport_cost", "", &pt(&c.param_point), "", &c.cost.to_string(), ""])?;
    }
    for (k, v) in &metrics.summary {
        w.write_record(["summary", "", "", k, &v.to_string(), ""])?;
    }
    w.flush()?;
    Ok(())
}

/// Write `cloud` as CSV under `out`.
pub fn save_cloud(out: &Path, name: &str, cloud: &PointCloud) -> Result<()> {
    io::save_csv(cloud, !cloud.is_uniform(), &out.join(name))?;
    Ok(())
}

pub fn endpoint_name(s: &Strategy) -> String {
    format!("endpoint_{}.csv", slug(&s.label()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_has_a_valid_spec() {
        for name in SCENARIOS {
            let s = scenario_spec(name).unwrap();
            s.config.train_config().unwrap();
            let text = s.config.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), s.config, "{name}");
        }
        let err = scenario_spec("fig9").unwrap_err().to_string();
        assert!(err.contains("curly") && err.contains("domain-shift"), "{err}");
    }

    #[test]
    fn curly_joint_map_is_minus_three() {
        let s = scenario_spec("curly").unwrap();
        let m = compose_maps(&s.config.train.maps).unwrap();
        assert_eq!(m.apply(&[1.0, 2.0]), vec![-3.0, -6.0]);
    }

    #[test]
    fn wall_times_are_stripped() {
        let mut v = serde_json::json!({"a": 1, "model_wall_ms": 2.0, "x": [{"oracle_wall_ms": 1, "w2": 0.5}]});
        strip_wall_times(&mut v);
        assert_eq!(v, serde_json::json!({"a": 1, "x": [{"w2": 0.5}]}));
    }
}
