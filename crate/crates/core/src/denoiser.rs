//! A small trainable conditional denoiser for 1D trajectory windows.
//!
//! Multilayer perceptron over the flattened window: the input vector packs
//! the (preconditioned) window values, the conditioning mask as 0/1, the
//! normalized window time offsets, and a log-noise embedding. Input, output
//! and skip connections are scaled so the network only has to learn the
//! residual against the optimal linear shrinkage of the noisy input:
//!
//! * `c_in  = 1 / sqrt(sigma^2 + data_std^2)`
//! * `c_skip = data_std^2 / (sigma^2 + data_std^2)`
//! * `c_out = sigma * data_std / sqrt(sigma^2 + data_std^2)`
//! * `c_noise = ln(sigma) / 4`
//!
//! With a zero network the denoiser is exactly `c_skip(sigma) * x`, which is
//! already the posterior mean for Gaussian data — training starts from a
//! sane baseline (the final layer is zero-initialized).
//!
//! Gradients are accumulated by explicit reverse-mode passes; no autodiff.

use serde::{Deserialize, Serialize};

use crate::diffusion::{mix_conditioning, Denoise};
use crate::exec::{map_indexed, Parallelism};
use crate::rng::{self, rng_stream, Rng};
use crate::scheme::InferenceScheme;
use crate::synthetic::Trajectory;
use crate::templates::Template;
use crate::{Error, Result};

/// Items per deterministic accumulation chunk. Fixed so that gradient sums
/// are bit-identical for any thread count and for the sequential fallback.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_prime(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// The preconditioned MLP denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    layers: Vec<Layer>,
    /// Window length `2K + 1`.
    window: usize,
    /// Scale of the training data; drives the preconditioning.
    data_std: f64,
    /// Divisor applied to window time offsets before they enter the network.
    time_scale: f64,
}

impl Denoiser {
    /// Fresh network for `window`-sized samples with the given hidden widths.
    /// Hidden layers use scaled normal init; the output layer starts at zero
    /// so the initial model is pure skip path.
    pub fn new(
        window: usize,
        hidden: &[usize],
        data_std: f64,
        time_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if window < 1 {
            return Err(Error::Domain("window must hold at least one value".into()));
        }
        if !(data_std > 0.0) || !(time_scale > 0.0) {
            return Err(Error::Domain(
                "data_std and time_scale must be positive".into(),
            ));
        }
        if hidden.iter().any(|&h| h == 0) {
            return Err(Error::Domain("hidden widths must be nonzero".into()));
        }
        let mut dims = vec![3 * window + 1];
        dims.extend_from_slice(hidden);
        dims.push(window);

        let mut rng = rng_stream(seed, 0);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (in_dim, out_dim) = (dims[l], dims[l + 1]);
            let last = l == dims.len() - 2;
            let scale = (2.0 / in_dim as f64).sqrt();
            let w = (0..in_dim * out_dim)
                .map(|_| {
                    if last {
                        // Draw anyway so layer shapes do not change the stream
                        // alignment of later layers.
                        rng::standard_normal(&mut rng);
                        0.0
                    } else {
                        scale * rng::standard_normal(&mut rng)
                    }
                })
                .collect();
            layers.push(Layer {
                in_dim,
                out_dim,
                w,
                b: vec![0.0; out_dim],
            });
        }
        Ok(Self {
            layers,
            window,
            data_std,
            time_scale,
        })
    }

    /// Standard architecture: 3 hidden layers of width 128.
    pub fn standard(window: usize, data_std: f64, time_scale: f64, seed: u64) -> Result<Self> {
        Self::new(window, &[128, 128, 128], data_std, time_scale, seed)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn data_std(&self) -> f64 {
        self.data_std
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    /// Layer widths including input and output dims.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].in_dim];
        w.extend(self.layers.iter().map(|l| l.out_dim));
        w
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len())
            .sum()
    }

    /// Flat parameter accessor (weights row-major then bias, layer by layer).
    pub fn param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.w.len() {
                l.w[idx] = value;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = value;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// All parameters in checkpoint order: per layer, weights row-major then
    /// bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    /// Rebuild a denoiser from checkpoint fields. `widths` includes the input
    /// and output dimensions.
    pub fn from_parts(
        widths: &[usize],
        data_std: f64,
        time_scale: f64,
        params: &[f64],
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Domain("need at least input and output widths".into()));
        }
        let window = *widths.last().unwrap();
        if widths[0] != 3 * window + 1 {
            return Err(Error::Domain(format!(
                "input width {} does not match 3 * {window} + 1",
                widths[0]
            )));
        }
        let mut d = Self::new(
            window,
            &widths[1..widths.len() - 1],
            data_std,
            time_scale,
            0,
        )?;
        if params.len() != d.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a network of {}",
                params.len(),
                d.param_count()
            )));
        }
        let mut it = params.iter();
        for l in &mut d.layers {
            for w in &mut l.w {
                *w = *it.next().unwrap();
            }
            for b in &mut l.b {
                *b = *it.next().unwrap();
            }
        }
        Ok(d)
    }

    fn preconditioning(&self, sigma: f64) -> (f64, f64, f64, f64) {
        let s2 = sigma * sigma;
        let d2 = self.data_std * self.data_std;
        let c_in = 1.0 / (s2 + d2).sqrt();
        let c_skip = d2 / (s2 + d2);
        let c_out = sigma * self.data_std / (s2 + d2).sqrt();
        let c_noise = 0.25 * sigma.ln();
        (c_in, c_skip, c_out, c_noise)
    }

    fn pack_input(
        &self,
        x_in: &[f64],
        c_in: f64,
        c_noise: f64,
        mask: &[bool],
        time_indices: &[i64],
    ) -> Vec<f64> {
        let mut u = Vec::with_capacity(3 * self.window + 1);
        u.extend(x_in.iter().map(|&v| c_in * v));
        u.extend(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }));
        u.extend(time_indices.iter().map(|&t| t as f64 / self.time_scale));
        u.push(c_noise);
        u
    }

    fn net(&self, input: &[f64], pre_acts: Option<&mut Vec<Vec<f64>>>) -> Vec<f64> {
        let mut keep = pre_acts;
        let mut a = input.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&a, &mut z);
            if let Some(store) = keep.as_deref_mut() {
                store.push(z.clone());
            }
            if l < last {
                a.clear();
                a.extend(z.iter().map(|&v| silu(v)));
            } else {
                a = z.clone();
            }
        }
        a
    }

    /// Denoised estimate of the clean window.
    pub fn forward(
        &self,
        x_in: &[f64],
        sigma: f64,
        mask: &[bool],
        time_indices: &[i64],
    ) -> Result<Vec<f64>> {
        if x_in.len() != self.window || mask.len() != self.window || time_indices.len() != self.window
        {
            return Err(Error::DimensionMismatch(format!(
                "window {} / mask {} / indices {} for a size-{} denoiser",
                x_in.len(),
                mask.len(),
                time_indices.len(),
                self.window
            )));
        }
        if sigma == 0.0 {
            // c_out vanishes and c_skip = 1: the network contributes nothing.
            return Ok(x_in.to_vec());
        }
        let (c_in, c_skip, c_out, c_noise) = self.preconditioning(sigma);
        let u = self.pack_input(x_in, c_in, c_noise, mask, time_indices);
        let f = self.net(&u, None);
        Ok(x_in
            .iter()
            .zip(&f)
            .map(|(&x, &fv)| c_skip * x + c_out * fv)
            .collect())
    }
}

impl Denoise for Denoiser {
    fn denoise(
        &self,
        values: &[f64],
        sigma: f64,
        mask: &[bool],
        time_indices: &[i64],
    ) -> Result<Vec<f64>> {
        self.forward(values, sigma, mask, time_indices)
    }
}

/// Parameter gradients, same layout as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    fn zeros_like(d: &Denoiser) -> Self {
        Self {
            layers: d
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                *x += y;
            }
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            for x in &mut l.0 {
                *x *= s;
            }
            for x in &mut l.1 {
                *x *= s;
            }
        }
    }

    /// Flat accessor matching [`Denoiser::param`].
    pub fn at(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.0.len() {
                return l.0[idx];
            }
            idx -= l.0.len();
            if idx < l.1.len() {
                return l.1[idx];
            }
            idx -= l.1.len();
        }
        panic!("gradient index out of range");
    }
}

/// One training sample: a clean window, its noisy version at `sigma`, and the
/// conditioning layout. `input` is the spliced window the denoiser sees.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub clean: Vec<f64>,
    pub input: Vec<f64>,
    pub mask: Vec<bool>,
    pub time_indices: Vec<i64>,
    pub sigma: f64,
}

impl TrainItem {
    /// Build an item from a clean window and unit noise draws.
    pub fn from_noise(
        clean: Vec<f64>,
        eps: &[f64],
        mask: Vec<bool>,
        time_indices: Vec<i64>,
        sigma: f64,
    ) -> Self {
        let noisy: Vec<f64> = clean
            .iter()
            .zip(eps)
            .map(|(&c, &e)| c + sigma * e)
            .collect();
        let input = mix_conditioning(&noisy, &clean, &mask);
        Self {
            clean,
            input,
            mask,
            time_indices,
            sigma,
        }
    }
}

impl Denoiser {
    fn item_loss_and_grad(&self, item: &TrainItem, grad: &mut Gradients) -> f64 {
        let w = self.window as f64;
        if item.sigma == 0.0 {
            // Pure skip path (c_skip = 1, c_out = 0): no parameter dependence.
            return item
                .input
                .iter()
                .zip(&item.clean)
                .map(|(&x, &c)| (x - c) * (x - c))
                .sum::<f64>()
                / w;
        }
        let (c_in, c_skip, c_out, c_noise) = self.preconditioning(item.sigma);
        let u = self.pack_input(&item.input, c_in, c_noise, &item.mask, &item.time_indices);

        let mut pre = Vec::with_capacity(self.layers.len());
        let f = self.net(&u, Some(&mut pre));

        let residual: Vec<f64> = item
            .input
            .iter()
            .zip(&f)
            .zip(&item.clean)
            .map(|((&x, &fv), &c)| c_skip * x + c_out * fv - c)
            .collect();
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / w;

        // dL/dF_j = 2 r_j c_out / w
        let mut delta: Vec<f64> = residual.iter().map(|r| 2.0 * r * c_out / w).collect();

        // Activations entering each layer: a_0 = u, a_l = silu(z_l).
        for l in (0..self.layers.len()).rev() {
            let a_prev: Vec<f64> = if l == 0 {
                u.clone()
            } else {
                pre[l - 1].iter().map(|&z| silu(z)).collect()
            };
            let layer = &self.layers[l];
            let (gw, gb) = &mut grad.layers[l];
            for o in 0..layer.out_dim {
                let d = delta[o];
                gb[o] += d;
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &a) in row.iter_mut().zip(&a_prev) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (n, &wv) in next.iter_mut().zip(row) {
                        *n += d * wv;
                    }
                }
                for (n, &z) in next.iter_mut().zip(&pre[l - 1]) {
                    *n *= silu_prime(z);
                }
                delta = next;
            }
        }
        loss
    }

    /// Mean loss and exact parameter gradients over a batch.
    ///
    /// Items are accumulated in fixed-size chunks combined in index order, so
    /// the result is bit-identical whatever the parallelism.
    pub fn backward(&self, items: &[TrainItem]) -> Result<(f64, Gradients)> {
        self.backward_with(items, Parallelism::default())
    }

    pub fn backward_with(
        &self,
        items: &[TrainItem],
        mode: Parallelism,
    ) -> Result<(f64, Gradients)> {
        if items.is_empty() {
            return Err(Error::Domain("empty training batch".into()));
        }
        for item in items {
            if item.clean.len() != self.window
                || item.input.len() != self.window
                || item.mask.len() != self.window
                || item.time_indices.len() != self.window
            {
                return Err(Error::DimensionMismatch(
                    "training item does not match the denoiser window".into(),
                ));
            }
        }
        let n_chunks = items.len().div_ceil(GRAD_CHUNK);
        let partials = map_indexed(mode, n_chunks, |c| {
            let lo = c * GRAD_CHUNK;
            let hi = (lo + GRAD_CHUNK).min(items.len());
            let mut grad = Gradients::zeros_like(self);
            let mut loss = 0.0;
            for item in &items[lo..hi] {
                loss += self.item_loss_and_grad(item, &mut grad);
            }
            (loss, grad)
        });
        let mut total = Gradients::zeros_like(self);
        let mut loss = 0.0;
        for (l, g) in &partials {
            loss += l;
            total.add_assign(g);
        }
        let inv = 1.0 / items.len() as f64;
        total.scale(inv);
        Ok((loss * inv, total))
    }

    /// Batch loss without gradients (finite-difference probes).
    pub fn batch_loss(&self, items: &[TrainItem]) -> Result<f64> {
        let mut grad = Gradients::zeros_like(self);
        if items.is_empty() {
            return Err(Error::Domain("empty training batch".into()));
        }
        let loss: f64 = items
            .iter()
            .map(|it| self.item_loss_and_grad(it, &mut grad))
            .sum();
        Ok(loss / items.len() as f64)
    }
}

/// A (window, mask) pair the trainer may draw, in relative indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMask {
    pub indices: Vec<i64>,
    pub mask: Vec<bool>,
}

/// The pool of (window, mask) pairs seen during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    pub pairs: Vec<WindowMask>,
}

impl MaskPolicy {
    /// Deduplicated pairs from the actions of the given schemes. Extended
    /// schemes repeat the same pairs, so one block per scheme is enough.
    pub fn from_schemes(schemes: &[&InferenceScheme]) -> Result<Self> {
        let mut pairs: Vec<WindowMask> = Vec::new();
        for s in schemes {
            for (i, action) in s.actions.iter().enumerate() {
                let pair = WindowMask {
                    indices: s.template_indices(i).to_vec(),
                    mask: action.cond_mask.clone(),
                };
                if !pairs.contains(&pair) {
                    pairs.push(pair);
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::Domain("no (window, mask) pairs to train on".into()));
        }
        Ok(Self { pairs })
    }

    /// Bare windows from a template list (masks drawn at random during
    /// training when `MaskSampling::UniformRandom` is selected).
    pub fn from_templates(templates: &[Template]) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Domain("no templates to train on".into()));
        }
        Ok(Self {
            pairs: templates
                .iter()
                .map(|t| WindowMask {
                    indices: t.indices().to_vec(),
                    mask: vec![false; t.len()],
                })
                .collect(),
        })
    }

    fn max_reach(&self) -> (i64, i64) {
        let lo = self
            .pairs
            .iter()
            .map(|p| *p.indices.first().unwrap())
            .min()
            .unwrap();
        let hi = self
            .pairs
            .iter()
            .map(|p| *p.indices.last().unwrap())
            .max()
            .unwrap();
        (lo, hi)
    }
}

/// How conditioning masks are drawn during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSampling {
    /// Use the (window, mask) pairs of the planned schemes.
    SchemeTemplates,
    /// Keep the windows but draw each mask bit as a fair coin (ablation).
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub mask_sampling: MaskSampling,
    /// Cosine-decay the learning rate to zero over the run.
    pub cosine_lr: bool,
    /// Training noise range as multiples of `data_std`.
    pub sigma_lo_frac: f64,
    pub sigma_hi_frac: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            steps_per_epoch: 400,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            mask_sampling: MaskSampling::SchemeTemplates,
            cosine_lr: true,
            sigma_lo_frac: 0.01,
            sigma_hi_frac: 80.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.sigma_lo_frac > 0.0 && self.sigma_hi_frac > self.sigma_lo_frac) {
            return Err(Error::Config("need 0 < sigma_lo_frac < sigma_hi_frac".into()));
        }
        Ok(())
    }
}

/// Per-step and per-epoch training losses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, d: &mut Denoiser, grads: &Gradients, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let b1c = 1.0 - cfg.beta1.powi(self.t as i32);
        let b2c = 1.0 - cfg.beta2.powi(self.t as i32);
        let mut idx = 0;
        for l in 0..d.layers.len() {
            let (gw, gb) = (&grads.layers[l].0, &grads.layers[l].1);
            let layer = &mut d.layers[l];
            for (slot, g) in layer
                .w
                .iter_mut()
                .chain(layer.b.iter_mut())
                .zip(gw.iter().chain(gb.iter()))
            {
                let m = &mut self.m[idx];
                let v = &mut self.v[idx];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let mhat = *m / b1c;
                let vhat = *v / b2c;
                *slot -= lr * mhat / (vhat.sqrt() + cfg.adam_eps);
                idx += 1;
            }
        }
    }
}

fn draw_index(rng: &mut Rng, n: usize) -> usize {
    use rand::RngCore;
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Minimize the masked denoising loss over the dataset with Adam.
///
/// Each step draws `batch_size` samples: a trajectory, a (window, mask) pair,
/// an admissible window position, a log-uniform noise level and the noise
/// itself — all from one master stream, so a fixed seed reproduces the loss
/// curve bit-exactly.
pub fn train_with_policy(
    denoiser: &mut Denoiser,
    dataset: &[Trajectory],
    policy: &MaskPolicy,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("empty training dataset".into()));
    }
    let (lo_rel, hi_rel) = policy.max_reach();
    for pair in &policy.pairs {
        if pair.indices.len() != denoiser.window {
            return Err(Error::Config(format!(
                "window {:?} does not match the denoiser size {}",
                pair.indices, denoiser.window
            )));
        }
    }
    let span = (hi_rel - lo_rel) as usize + 1;
    for t in dataset {
        if t.len() < span {
            return Err(Error::Config(format!(
                "trajectory of length {} is too short for windows spanning [{lo_rel}, {hi_rel}]",
                t.len()
            )));
        }
    }

    let sigma_lo = cfg.sigma_lo_frac * denoiser.data_std;
    let sigma_hi = cfg.sigma_hi_frac * denoiser.data_std;
    let total_steps = cfg.epochs * cfg.steps_per_epoch;
    let mut rng = rng_stream(cfg.seed, 0);
    let mut adam = AdamState::new(denoiser.param_count());
    let mut report = TrainReport {
        step_losses: Vec::with_capacity(total_steps),
        epoch_losses: Vec::with_capacity(cfg.epochs),
    };

    for _ in 0..cfg.epochs {
        let mut epoch_acc = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            let step = report.step_losses.len();
            let mut items = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let traj = &dataset[draw_index(&mut rng, dataset.len())];
                let pair = &policy.pairs[draw_index(&mut rng, policy.pairs.len())];
                let p_lo = -pair.indices.first().unwrap();
                let p_hi = traj.len() as i64 - 1 - pair.indices.last().unwrap();
                let center = p_lo + draw_index(&mut rng, (p_hi - p_lo + 1) as usize) as i64;
                let mask: Vec<bool> = match cfg.mask_sampling {
                    MaskSampling::SchemeTemplates => pair.mask.clone(),
                    MaskSampling::UniformRandom => (0..pair.indices.len())
                        .map(|_| rng::uniform_open01(&mut rng) < 0.5)
                        .collect(),
                };
                let sigma =
                    (rng::uniform_in(&mut rng, sigma_lo.ln(), sigma_hi.ln())).exp();
                let clean: Vec<f64> = pair
                    .indices
                    .iter()
                    .map(|&rel| traj.values[(center + rel) as usize])
                    .collect();
                let eps = rng::standard_normal_vec(&mut rng, clean.len());
                items.push(TrainItem::from_noise(
                    clean,
                    &eps,
                    mask,
                    pair.indices.clone(),
                    sigma,
                ));
            }
            let (loss, grads) = denoiser.backward(&items)?;
            let lr = if cfg.cosine_lr {
                let f = step as f64 / total_steps.max(1) as f64;
                cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * f).cos())
            } else {
                cfg.learning_rate
            };
            adam.step(denoiser, &grads, lr, cfg);
            epoch_acc += loss;
            report.step_losses.push(loss);
        }
        report
            .epoch_losses
            .push(epoch_acc / cfg.steps_per_epoch.max(1) as f64);
    }
    Ok(report)
}

/// [`train_with_policy`] with the mask pool derived from a template list: the
/// multiscale scheme for the largest template horizon is planned and its
/// (window, mask) pairs are used.
pub fn train(
    denoiser: &mut Denoiser,
    dataset: &[Trajectory],
    templates: &[Template],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let policy = match cfg.mask_sampling {
        MaskSampling::SchemeTemplates => {
            let horizon = templates.iter().map(|t| t.horizon()).max().ok_or_else(|| {
                Error::Config("no templates to train on".into())
            })?;
            let k = (templates[0].len() - 1) / 2;
            let scheme = crate::scheme::plan_multiscale(horizon, k, templates)?;
            MaskPolicy::from_schemes(&[&scheme])?
        }
        MaskSampling::UniformRandom => MaskPolicy::from_templates(templates)?,
    };
    train_with_policy(denoiser, dataset, &policy, cfg)
}
