use std::io::Write;

use super::adam::{clip_grad_norm, Adam};
use super::config::{DataSource, TrainConfig};
use super::conditional::sample_conditional_x;
use super::losses::{loss_and_grad, LossBreakdown, LossWorkspace, PiMode, Sample};
use crate::error::{check_dim, param, Error, Result};
use crate::field::ModelParams;
use crate::geometry::{PointCloud, RngStream, StreamId};
use crate::transport::{minibatch_couple, CouplingMode};

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelParams,
    /// Loss of the batch seen at each step, before that step's update.
    pub history: Vec<LossBreakdown>,
}

fn check_inputs(cfg: &TrainConfig, source: &DataSource, targets: &[DataSource]) -> Result<usize> {
    cfg.validate()?;
    source.validate()?;
    let d = source.dim();
    let prescribed = matches!(cfg.coupling, CouplingMode::PrescribedMap { .. });
    if !(prescribed && targets.is_empty()) && targets.len() != cfg.n {
        return param(format!("expected {} targets, got {}", cfg.n, targets.len()));
    }
    for t in targets {
        t.validate()?;
        check_dim(d, t.dim(), "target dimension")?;
    }
    cfg.path.check_dim(d)?;
    Ok(d)
}

/// Draw one training batch: couple, sample `t ~ U([0,1]^n)`, then `x ~ N(μ_t(z), σ²)`.
pub fn draw_batch(
    cfg: &TrainConfig,
    source: &DataSource,
    targets: &[DataSource],
    data_rng: &mut RngStream,
    noise_rng: &mut RngStream,
) -> Result<Vec<Sample>> {
    let b = cfg.batch_size;
    let a = source.sample(b, data_rng)?;
    let tb: Vec<PointCloud> = match cfg.coupling {
        CouplingMode::PrescribedMap { .. } => Vec::new(),
        _ => targets
            .iter()
            .map(|t| t.sample(b, data_rng))
            .collect::<Result<_>>()?,
    };
    let tuples = minibatch_couple(&a, &tb, &cfg.coupling, data_rng)?;
    let d = a.dim();
    Ok(tuples
        .iter()
        .map(|z| {
            let t: Vec<f64> = (0..cfg.n).map(|_| noise_rng.uniform()).collect();
            let mu = cfg.path.mu(z, &t);
            let x = sample_conditional_x(&mu, cfg.sigma, noise_rng);
            let mut target = vec![0.0; cfg.n * d];
            cfg.path.targets(z, &t, &mut target);
            Sample { x, t, target }
        })
        .collect())
}

/// Train a PiFM model; `observer` sees every step's losses.
pub fn train_with_observer(
    cfg: &TrainConfig,
    source: &DataSource,
    targets: &[DataSource],
    mut observer: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainOutput> {
    let d = check_inputs(cfg, source, targets)?;
    let mut params_rng = RngStream::new(cfg.seed, StreamId::Params);
    let mut model = ModelParams::init(cfg.model_config(d), &mut params_rng)?;
    let mut data_rng = RngStream::new(cfg.seed, StreamId::Data);
    let mut noise_rng = RngStream::new(cfg.seed, StreamId::Noise);
    let mut adam = Adam::new(model.len(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut ws = LossWorkspace::default();
    let pi_mode = if cfg.lambda > 0.0 {
        PiMode::WithGradient
    } else if cfg.monitor_pi && cfg.n >= 2 {
        PiMode::ValueOnly
    } else {
        PiMode::Skip
    };
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = draw_batch(cfg, source, targets, &mut data_rng, &mut noise_rng)?;
        let (mut loss, mut grad) = loss_and_grad(&model, &batch, cfg.lambda, pi_mode, &mut ws)?;
        if pi_mode == PiMode::ValueOnly {
            loss = LossBreakdown::new(loss.fm, loss.pi, cfg.lambda);
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                step,
                fm: loss.fm,
                pi: loss.pi,
            });
        }
        if let Some(c) = cfg.grad_clip {
            clip_grad_norm(&mut grad, c);
        }
        let ramp = if cfg.warmup_steps > 0 {
            ((step + 1) as f64 / cfg.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        adam.step(model.theta_mut(), &grad, cfg.learning_rate * ramp);
        observer(step, &loss);
        history.push(loss);
    }
    Ok(TrainOutput { model, history })
}

pub fn train(cfg: &TrainConfig, source: &DataSource, targets: &[DataSource]) -> Result<TrainOutput> {
    train_with_observer(cfg, source, targets, |_, _| {})
}

/// Single-parameter conditional flow matching baseline (`n = 1`, no regularizer).
pub fn train_cfm(cfg: &TrainConfig, source: &DataSource, target: &DataSource) -> Result<TrainOutput> {
    if cfg.n != 1 {
        return param(format!("train_cfm needs n = 1, got {}", cfg.n));
    }
    if cfg.lambda != 0.0 {
        return param("train_cfm has no regularizer; set lambda = 0");
    }
    if !matches!(cfg.coupling, CouplingMode::Independent | CouplingMode::OtToSource) {
        return param("train_cfm supports independent or ot-to-source coupling");
    }
    train(cfg, source, std::slice::from_ref(target))
}

/// `step,fm,pi,total` rows.
pub fn write_history_csv<W: Write>(history: &[LossBreakdown], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "fm", "pi", "total"])?;
    for (i, l) in history.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:?}", l.fm),
            format!("{:?}", l.pi),
            format!("{:?}", l.total),
        ])?;
    }
    w.flush()?;
    Ok(())
}
