use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::field::{ModelParams, Scratch, Tape};

/// One training sample: state, parameter point and per-head regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// Head-major `n·d`.
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub fm: f64,
    pub pi: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(fm: f64, pi: f64, lambda: f64) -> Self {
        Self {
            fm,
            pi,
            total: fm + lambda * pi,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.fm.is_finite() && self.pi.is_finite() && self.total.is_finite()
    }
}

/// What to compute for the bracket term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiMode {
    Skip,
    ValueOnly,
    WithGradient,
}

/// Reusable per-thread buffers for loss evaluation.
#[derive(Debug, Default)]
pub struct LossWorkspace {
    tape: Tape,
    tan_a: Tape,
    tan_b: Tape,
    scratch: Scratch,
    ybar: Vec<f64>,
    dx_bar: Vec<f64>,
    neg: Vec<f64>,
    e: Vec<f64>,
    rbar: Vec<f64>,
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Flow-matching loss `mean_b Σ_i ‖u_i − target_i‖²` and bracket loss
/// `mean_b mean_{i<j} ‖r_ij‖²`; the gradient returned is that of `fm + lambda·pi`
/// (only the fm part when `pi_mode` is not `WithGradient`).
pub fn loss_and_grad(
    model: &ModelParams,
    batch: &[Sample],
    lambda: f64,
    pi_mode: PiMode,
    ws: &mut LossWorkspace,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if batch.is_empty() {
        return param("loss needs a non-empty batch");
    }
    let cfg = *model.config();
    let (n, d) = (cfg.n, cfg.d);
    if pi_mode != PiMode::Skip && n < 2 {
        return param("the bracket loss needs at least two heads");
    }
    let inv_b = 1.0 / batch.len() as f64;
    let n_pairs = (n * n.saturating_sub(1) / 2).max(1) as f64;
    let mut grad = vec![0.0; model.len()];
    let (mut fm, mut pi) = (0.0, 0.0);
    ws.ybar.resize(n * d, 0.0);
    ws.dx_bar.resize(d, 0.0);
    ws.neg.resize(d, 0.0);
    ws.e.resize(n, 0.0);
    ws.rbar.resize(n * d, 0.0);
    for s in batch {
        model.forward_tape(&s.x, &s.t, &mut ws.tape);
        let y = ws.tape.output();
        for ((yb, yv), tv) in ws.ybar.iter_mut().zip(y).zip(&s.target) {
            let diff = yv - tv;
            fm += diff * diff;
            *yb = 2.0 * diff * inv_b;
        }
        if pi_mode != PiMode::Skip {
            for (i, j) in pairs(n) {
                // Tangent A: head i along (−u_j, e_j). Tangent B: head j along (−u_i, e_i).
                let y = ws.tape.output();
                ws.neg.iter_mut().zip(&y[j * d..(j + 1) * d]).for_each(|(o, v)| *o = -v);
                ws.e.iter_mut().for_each(|v| *v = 0.0);
                ws.e[j] = 1.0;
                model.tangent_tape(&ws.tape, &s.t, &ws.neg, &ws.e, &mut ws.tan_a);
                let y = ws.tape.output();
                ws.neg.iter_mut().zip(&y[i * d..(i + 1) * d]).for_each(|(o, v)| *o = -v);
                ws.e[j] = 0.0;
                ws.e[i] = 1.0;
                model.tangent_tape(&ws.tape, &s.t, &ws.neg, &ws.e, &mut ws.tan_b);
                let (ta, tb) = (ws.tan_a.output(), ws.tan_b.output());
                let mut sq = 0.0;
                ws.rbar.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..d {
                    let r = ta[i * d + k] - tb[j * d + k];
                    sq += r * r;
                    ws.rbar[i * d + k] = 2.0 * lambda * r * inv_b / n_pairs;
                }
                pi += sq / n_pairs;
                if pi_mode == PiMode::WithGradient && lambda != 0.0 {
                    // d r / d(tangent A head i) = +1; dx of A is −u_j.
                    model.reverse(&ws.tape, Some(&ws.tan_a), None, Some(&ws.rbar), &mut grad, Some(&mut ws.dx_bar), &mut ws.scratch);
                    for k in 0..d {
                        ws.ybar[j * d + k] -= ws.dx_bar[k];
                    }
                    // d r / d(tangent B head j) = −1; dx of B is −u_i.
                    for k in 0..d {
                        ws.rbar[j * d + k] = -ws.rbar[i * d + k];
                        ws.rbar[i * d + k] = 0.0;
                    }
                    model.reverse(&ws.tape, Some(&ws.tan_b), None, Some(&ws.rbar), &mut grad, Some(&mut ws.dx_bar), &mut ws.scratch);
                    for k in 0..d {
                        ws.ybar[i * d + k] -= ws.dx_bar[k];
                    }
                }
            }
        }
        model.reverse(&ws.tape, None, Some(&ws.ybar), None, &mut grad, None, &mut ws.scratch);
    }
    let fm = fm * inv_b;
    let pi = pi * inv_b;
    let lam_eff = if pi_mode == PiMode::Skip { 0.0 } else { lambda };
    Ok((LossBreakdown::new(fm, pi, lam_eff), grad))
}

/// Flow-matching loss and its gradient.
pub fn fm_loss(model: &ModelParams, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
    let (l, g) = loss_and_grad(model, batch, 0.0, PiMode::Skip, &mut LossWorkspace::default())?;
    Ok((l.fm, g))
}

/// Bracket loss and its gradient (the fm part is excluded).
pub fn pi_loss(model: &ModelParams, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
    let cfg = model.config();
    if cfg.n < 2 {
        return param("the bracket loss needs at least two heads");
    }
    let mut ws = LossWorkspace::default();
    let (l0, g0) = loss_and_grad(model, batch, 0.0, PiMode::Skip, &mut ws)?;
    let (l1, g1) = loss_and_grad(model, batch, 1.0, PiMode::WithGradient, &mut ws)?;
    debug_assert_eq!(l0.fm, l1.fm);
    Ok((l1.pi, g1.iter().zip(&g0).map(|(a, b)| a - b).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{lie_residual, ModelConfig, VectorField};
    use crate::geometry::{RngStream, StreamId};

    fn model(n: usize, width: usize) -> ModelParams {
        let mut cfg = ModelConfig::new(n, 2, width, 2);
        cfg.activation = crate::field::Activation::Tanh;
        let mut m = ModelParams::init(cfg, &mut RngStream::new(11, StreamId::Params)).unwrap();
        // Larger weights make the bracket term non-trivial.
        m.theta_mut().iter_mut().for_each(|v| *v *= 1.5);
        m
    }

    fn batch(n: usize, size: usize) -> Vec<Sample> {
        let mut r = RngStream::new(12, StreamId::Noise);
        (0..size)
            .map(|_| Sample {
                x: vec![r.normal(), r.normal()],
                t: (0..n).map(|_| r.uniform()).collect(),
                target: (0..2 * n).map(|_| r.normal()).collect(),
            })
            .collect()
    }

    fn fd(m: &ModelParams, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
        let h = 1e-6;
        let mut p = m.clone();
        (0..m.len())
            .map(|k| {
                let o = p.theta()[k];
                p.theta_mut()[k] = o + h;
                let up = f(&p);
                p.theta_mut()[k] = o - h;
                let dn = f(&p);
                p.theta_mut()[k] = o;
                (up - dn) / (2.0 * h)
            })
            .collect()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / na.max(nb)
    }

    #[test]
    fn fm_loss_direct_value() {
        let m = ModelParams::zeros(ModelConfig::new(2, 2, 4, 1)).unwrap();
        let b = vec![Sample {
            x: vec![0.0, 0.0],
            t: vec![0.3, 0.3],
            target: vec![1.0, 0.0, 0.0, 1.0],
        }];
        assert_eq!(fm_loss(&m, &b).unwrap().0, 2.0);
    }

    #[test]
    fn fm_loss_zero_at_targets() {
        let m = model(2, 8);
        let mut b = batch(2, 4);
        for s in &mut b {
            let mut out = vec![0.0; 4];
            m.eval(&s.x, &s.t, &mut out);
            s.target = out;
        }
        assert_eq!(fm_loss(&m, &b).unwrap().0, 0.0);
    }

    #[test]
    fn pi_value_matches_residual() {
        let m = model(3, 8);
        let b = batch(3, 3);
        let (pi, _) = pi_loss(&m, &b).unwrap();
        let mut want = 0.0;
        for s in &b {
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let r = lie_residual(&m, i, j, &s.x, &s.t).unwrap();
                want += r.iter().map(|v| v * v).sum::<f64>() / 3.0;
            }
        }
        want /= 3.0;
        assert!((pi - want).abs() < 1e-12 * want.max(1.0));
        assert!(pi > 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (n, width) in [(2, 16), (3, 6)] {
            let m = model(n, width);
            let b = batch(n, 3);
            let (_, g) = fm_loss(&m, &b).unwrap();
            let e = rel(&g, &fd(&m, |p| fm_loss(p, &b).unwrap().0));
            assert!(e < 1e-5, "fm {e}");
            let (_, g) = pi_loss(&m, &b).unwrap();
            let e = rel(&g, &fd(&m, |p| pi_loss(p, &b).unwrap().0));
            assert!(e < 1e-5, "pi n={n}: {e}");
            for lambda in [0.0, 1.0, 0.3] {
                let mut ws = LossWorkspace::default();
                let (l, g) = loss_and_grad(&m, &b, lambda, PiMode::WithGradient, &mut ws).unwrap();
                assert!((l.total - (l.fm + lambda * l.pi)).abs() < 1e-12);
                let e = rel(
                    &g,
                    &fd(&m, |p| {
                        loss_and_grad(p, &b, lambda, PiMode::WithGradient, &mut LossWorkspace::default())
                            .unwrap()
                            .0
                            .total
                    }),
                );
                assert!(e < 1e-5, "total λ={lambda}: {e}");
            }
        }
    }

    #[test]
    fn pi_needs_two_heads() {
        let m = model(1, 4);
        assert!(pi_loss(&m, &batch(1, 1)).is_err());
    }
}
