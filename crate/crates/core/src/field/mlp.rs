//! Shared-backbone MLP with one linear head per flow parameter.
//!
//! All weights live in one flat vector. Each dense block is stored as its weight
//! matrix (row-major, `rows × cols`) followed by its bias. Blocks are ordered
//! backbone layers first, then heads in parameter order.
//!
//! Besides the usual forward/reverse passes the network supports a tangent
//! (dual-number) pass along an input direction, and reverse mode through that
//! tangent pass, which is what the bracket regularizer needs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::VectorField;
use crate::error::{check_dim, param, Result};
use crate::geometry::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of flow parameters, one head each.
    pub n: usize,
    /// State dimension.
    pub d: usize,
    pub width: usize,
    pub depth: usize,
    #[serde(default)]
    pub activation: Activation,
    /// Frequencies per parameter for `sin/cos(πk t_i)` features; 0 feeds `t` raw only.
    #[serde(default)]
    pub fourier_features: usize,
}

impl ModelConfig {
    pub fn new(n: usize, d: usize, width: usize, depth: usize) -> Self {
        Self {
            n,
            d,
            width,
            depth,
            activation: Activation::Silu,
            fourier_features: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return param("model needs n ≥ 1 and d ≥ 1");
        }
        if self.width == 0 || self.depth == 0 {
            return param("model needs width ≥ 1 and depth ≥ 1");
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.d + self.n + 2 * self.n * self.fourier_features
    }
}

/// One affine block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub w: usize,
    pub b: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }
}

fn layout(cfg: &ModelConfig) -> (Vec<Block>, Vec<Block>, usize) {
    let mut off = 0;
    let mut block = |rows, cols| {
        let b = Block {
            w: off,
            b: off + rows * cols,
            rows,
            cols,
        };
        off += b.len();
        b
    };
    let mut backbone = Vec::with_capacity(cfg.depth);
    let mut cols = cfg.input_dim();
    for _ in 0..cfg.depth {
        backbone.push(block(cfg.width, cols));
        cols = cfg.width;
    }
    let heads = (0..cfg.n).map(|_| block(cfg.d, cfg.width)).collect();
    (backbone, heads, off)
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    config: ModelConfig,
    theta: Vec<f64>,
    backbone: Vec<Block>,
    heads: Vec<Block>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.theta == other.theta
    }
}

/// Activations recorded by a forward or tangent pass.
///
/// For a tangent pass `acts`, `pre` and `out` hold the directional derivatives.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl Tape {
    fn ensure(&mut self, cfg: &ModelConfig) {
        if self.acts.len() == cfg.depth + 1 && self.acts[0].len() == cfg.input_dim() {
            return;
        }
        self.acts = std::iter::once(vec![0.0; cfg.input_dim()])
            .chain((0..cfg.depth).map(|_| vec![0.0; cfg.width]))
            .collect();
        self.pre = (0..cfg.depth).map(|_| vec![0.0; cfg.width]).collect();
        self.out = vec![0.0; cfg.n * cfg.d];
    }

    /// Head outputs, head-major (`n × d`).
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

/// Reusable adjoint buffers.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    hbar: Vec<f64>,
    hdbar: Vec<f64>,
    zbar: Vec<f64>,
    zdbar: Vec<f64>,
}

#[inline]
fn affine(theta: &[f64], blk: &Block, input: &[f64], bias: bool, out: &mut [f64]) {
    let w = &theta[blk.w..blk.b];
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * blk.cols..(r + 1) * blk.cols];
        let mut acc = if bias { theta[blk.b + r] } else { 0.0 };
        for (a, x) in row.iter().zip(input) {
            acc += a * x;
        }
        *o = acc;
    }
}

/// `grad_W += ū ⊗ input`, optional `grad_b += ū`, and `back += Wᵀ ū`.
#[inline]
fn affine_adjoint(
    theta: &[f64],
    blk: &Block,
    input: &[f64],
    ubar: &[f64],
    bias: bool,
    grad: &mut [f64],
    back: Option<&mut [f64]>,
) {
    let cols = blk.cols;
    {
        let gw = &mut grad[blk.w..blk.b];
        for (r, &u) in ubar.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            for (g, x) in gw[r * cols..(r + 1) * cols].iter_mut().zip(input) {
                *g += u * x;
            }
        }
    }
    if bias {
        for (g, u) in grad[blk.b..blk.b + blk.rows].iter_mut().zip(ubar) {
            *g += u;
        }
    }
    if let Some(back) = back {
        let w = &theta[blk.w..blk.b];
        for (r, &u) in ubar.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            for (o, a) in back.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *o += u * a;
            }
        }
    }
}

impl ModelParams {
    /// Fan-in scaled Gaussian weights (`std = 1/√fan_in`), zero biases.
    pub fn init(config: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let blocks: Vec<Block> = p.backbone.iter().chain(&p.heads).copied().collect();
        for blk in blocks {
            let std = (1.0 / blk.cols as f64).sqrt();
            for w in &mut p.theta[blk.w..blk.b] {
                *w = std * rng.normal();
            }
        }
        Ok(p)
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (backbone, heads, len) = layout(&config);
        Ok(Self {
            config,
            theta: vec![0.0; len],
            backbone,
            heads,
        })
    }

    pub fn from_flat(config: ModelConfig, theta: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        check_dim(p.theta.len(), theta.len(), "flat parameter vector")?;
        p.theta = theta;
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn backbone_blocks(&self) -> &[Block] {
        &self.backbone
    }

    pub fn head_blocks(&self) -> &[Block] {
        &self.heads
    }

    /// Parameter index range owned by head `k`.
    pub fn head_range(&self, k: usize) -> std::ops::Range<usize> {
        let h = &self.heads[k];
        h.w..h.w + h.len()
    }

    fn features(&self, x: &[f64], t: &[f64], out: &mut [f64]) {
        let (d, n, k) = (self.config.d, self.config.n, self.config.fourier_features);
        out[..d].copy_from_slice(x);
        out[d..d + n].copy_from_slice(t);
        let mut o = d + n;
        for &ti in t {
            for f in 1..=k {
                let w = PI * f as f64;
                out[o] = (w * ti).sin();
                out[o + 1] = (w * ti).cos();
                o += 2;
            }
        }
    }

    fn feature_tangent(&self, t: &[f64], dx: &[f64], dt: &[f64], out: &mut [f64]) {
        let (d, n, k) = (self.config.d, self.config.n, self.config.fourier_features);
        out[..d].copy_from_slice(dx);
        out[d..d + n].copy_from_slice(dt);
        let mut o = d + n;
        for (&ti, &dti) in t.iter().zip(dt) {
            for f in 1..=k {
                let w = PI * f as f64;
                out[o] = w * (w * ti).cos() * dti;
                out[o + 1] = -w * (w * ti).sin() * dti;
                o += 2;
            }
        }
    }

    /// Primal pass; outputs land in `tape.output()`.
    pub fn forward_tape(&self, x: &[f64], t: &[f64], tape: &mut Tape) {
        debug_assert_eq!(x.len(), self.config.d);
        debug_assert_eq!(t.len(), self.config.n);
        tape.ensure(&self.config);
        self.features(x, t, &mut tape.acts[0]);
        let act = self.config.activation;
        for (l, blk) in self.backbone.iter().enumerate() {
            affine(&self.theta, blk, &tape.acts[l], true, &mut tape.pre[l]);
            for (h, &z) in tape.acts[l + 1].iter_mut().zip(&tape.pre[l]) {
                *h = act.value(z);
            }
        }
        let d = self.config.d;
        let top = &tape.acts[self.config.depth];
        for (k, blk) in self.heads.iter().enumerate() {
            affine(&self.theta, blk, top, true, &mut tape.out[k * d..(k + 1) * d]);
        }
    }

    /// Tangent pass along `(dx, dt)` on top of a recorded primal `tape`.
    pub fn tangent_tape(&self, tape: &Tape, t: &[f64], dx: &[f64], dt: &[f64], tan: &mut Tape) {
        tan.ensure(&self.config);
        self.feature_tangent(t, dx, dt, &mut tan.acts[0]);
        let act = self.config.activation;
        for (l, blk) in self.backbone.iter().enumerate() {
            affine(&self.theta, blk, &tan.acts[l], false, &mut tan.pre[l]);
            for ((hd, &zd), &z) in tan.acts[l + 1]
                .iter_mut()
                .zip(&tan.pre[l])
                .zip(&tape.pre[l])
            {
                *hd = act.eval3(z).1 * zd;
            }
        }
        let d = self.config.d;
        let top = &tan.acts[self.config.depth];
        for (k, blk) in self.heads.iter().enumerate() {
            affine(&self.theta, blk, top, false, &mut tan.out[k * d..(k + 1) * d]);
        }
    }

    /// Reverse pass. Seeds `ybar` on the outputs and/or `ydot_bar` on the tangent
    /// outputs (the latter needs `tan`). Parameter adjoints are added to `grad`.
    /// When `dx_bar` is given it receives the adjoint of the tangent input `dx`.
    #[allow(clippy::too_many_arguments)]
    pub fn reverse(
        &self,
        tape: &Tape,
        tan: Option<&Tape>,
        ybar: Option<&[f64]>,
        ydot_bar: Option<&[f64]>,
        grad: &mut [f64],
        dx_bar: Option<&mut [f64]>,
        s: &mut Scratch,
    ) {
        let cfg = &self.config;
        let (d, w) = (cfg.d, cfg.width);
        let act = cfg.activation;
        let with_tan = ydot_bar.is_some();
        debug_assert!(!with_tan || tan.is_some());
        s.hbar.clear();
        s.hbar.resize(w.max(cfg.input_dim()), 0.0);
        s.hdbar.clear();
        s.hdbar.resize(w.max(cfg.input_dim()), 0.0);
        s.zbar.resize(w, 0.0);
        s.zdbar.resize(w, 0.0);
        let top = cfg.depth;
        for (k, blk) in self.heads.iter().enumerate() {
            if let Some(yb) = ybar {
                let ub = &yb[k * d..(k + 1) * d];
                affine_adjoint(&self.theta, blk, &tape.acts[top], ub, true, grad, Some(&mut s.hbar[..w]));
            }
            if let Some(ydb) = ydot_bar {
                let tan = tan.expect("tangent seed needs a tangent tape");
                let ub = &ydb[k * d..(k + 1) * d];
                affine_adjoint(&self.theta, blk, &tan.acts[top], ub, false, grad, Some(&mut s.hdbar[..w]));
            }
        }
        for l in (0..cfg.depth).rev() {
            let blk = &self.backbone[l];
            let z = &tape.pre[l];
            for r in 0..w {
                let (_, d1, d2) = act.eval3(z[r]);
                let mut zb = d1 * s.hbar[r];
                if let (true, Some(tan)) = (with_tan, tan) {
                    zb += d2 * tan.pre[l][r] * s.hdbar[r];
                    s.zdbar[r] = d1 * s.hdbar[r];
                }
                s.zbar[r] = zb;
            }
            let need_back = l > 0 || (with_tan && dx_bar.is_some());
            let cols = blk.cols;
            s.hbar[..cols].iter_mut().for_each(|v| *v = 0.0);
            affine_adjoint(
                &self.theta,
                blk,
                &tape.acts[l],
                &s.zbar,
                true,
                grad,
                if l > 0 { Some(&mut s.hbar[..cols]) } else { None },
            );
            if let (true, Some(tan)) = (with_tan, tan) {
                s.hdbar[..cols].iter_mut().for_each(|v| *v = 0.0);
                affine_adjoint(
                    &self.theta,
                    blk,
                    &tan.acts[l],
                    &s.zdbar,
                    false,
                    grad,
                    if need_back { Some(&mut s.hdbar[..cols]) } else { None },
                );
            }
        }
        if let Some(out) = dx_bar {
            if with_tan {
                out.copy_from_slice(&s.hdbar[..d]);
            } else {
                out.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Gradient of `Σ_samples Σ_heads ⟨upstream, head output⟩` with respect to all parameters.
    pub fn backward_batch(&self, xs: &[Vec<f64>], ts: &[Vec<f64>], upstream: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_dim(xs.len(), ts.len(), "batch tvec count")?;
        check_dim(xs.len(), upstream.len(), "batch upstream count")?;
        let (n, d) = (self.config.n, self.config.d);
        let mut grad = vec![0.0; self.len()];
        let mut tape = Tape::default();
        let mut scratch = Scratch::default();
        for ((x, t), u) in xs.iter().zip(ts).zip(upstream) {
            check_dim(d, x.len(), "batch state")?;
            check_dim(n, t.len(), "batch tvec")?;
            check_dim(n * d, u.len(), "upstream gradient")?;
            self.forward_tape(x, t, &mut tape);
            self.reverse(&tape, None, Some(u), None, &mut grad, None, &mut scratch);
        }
        Ok(grad)
    }
}

impl VectorField for ModelParams {
    fn dim(&self) -> usize {
        self.config.d
    }

    fn n_params(&self) -> usize {
        self.config.n
    }

    fn eval(&self, x: &[f64], t: &[f64], out: &mut [f64]) {
        let mut tape = Tape::default();
        self.forward_tape(x, t, &mut tape);
        out.copy_from_slice(&tape.out);
    }

    fn jvp(&self, x: &[f64], t: &[f64], dx: &[f64], dt: &[f64], value: &mut [f64], tangent: &mut [f64]) {
        let mut tape = Tape::default();
        let mut tan = Tape::default();
        self.forward_tape(x, t, &mut tape);
        self.tangent_tape(&tape, t, dx, dt, &mut tan);
        value.copy_from_slice(&tape.out);
        tangent.copy_from_slice(&tan.out);
    }
}
