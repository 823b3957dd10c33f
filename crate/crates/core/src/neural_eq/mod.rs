//! Neural semantic precoder `f_θ` and decoder `g_ψ`, trained end to end
//! through the simulated channel:
//!
//! ```text
//! ŷ = g_ψ(H · normalize(f_θ(x)) + v),   v ~ CN(0, σ² I)
//! ```
//!
//! Training is proximal gradient descent on the mean squared error, with a
//! hard-thresholding proximal step standing in for the `ℓ0` penalties on
//! the two weight sets.

mod mlp;

pub use mlp::{
    normalize_power, phase_amplitude, phase_amplitude_activation, Activation, ComplexMlp, Gradients, Layer, Magnitude, EPS_NORM,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{noise_from, MimoChannel};
use crate::codec::{pair_rows, unpair_columns, LatentDataset, WhitenOptions, Whitener};
use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, C64};
use crate::linear_eq::{training_channel, ChannelKnowledge};
use crate::seed::{self, stream};
use mlp::{normalize_columns, normalize_columns_backward};

/// Precoder and decoder trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralPair {
    pub precoder: ComplexMlp,
    pub decoder: ComplexMlp,
    pub p_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    /// Hidden width of the precoder; `None` means `d/2`.
    pub hidden_p: Option<usize>,
    pub layers_p: usize,
    /// Hidden width of the decoder; `None` means `m/2`.
    pub hidden_d: Option<usize>,
    pub layers_d: usize,
    pub activation: Magnitude,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture { hidden_p: None, layers_p: 1, hidden_d: None, layers_d: 1, activation: Magnitude::Tanh }
    }
}

impl Architecture {
    /// `(precoder widths, decoder widths)` for the given problem sizes.
    pub fn widths(&self, half_d: usize, half_m: usize, tx_syms: usize, rx_syms: usize) -> (Vec<usize>, Vec<usize>) {
        let hp = self.hidden_p.unwrap_or(half_d);
        let hd = self.hidden_d.unwrap_or(half_m);
        let mut p = vec![half_d];
        p.extend(std::iter::repeat_n(hp, self.layers_p));
        p.push(tx_syms);
        let mut d = vec![rx_syms];
        d.extend(std::iter::repeat_n(hd, self.layers_d));
        d.push(half_m);
        (p, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCadence {
    /// Threshold once at the end of every epoch.
    #[default]
    Epoch,
    /// Threshold after every gradient step.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub eta: f64,
    pub epochs: usize,
    pub beta: f64,
    pub gamma: f64,
    pub p_t: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub arch: Architecture,
    pub cadence: ThresholdCadence,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 1e-3,
            epochs: 50,
            beta: 0.0,
            gamma: 0.0,
            p_t: 1.0,
            batch_size: 64,
            seed: 0,
            arch: Architecture::default(),
            cadence: ThresholdCadence::Epoch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::param("eta", format!("must be > 0, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be >= 1"));
        }
        if !(self.beta >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::param("beta/gamma", "must be >= 0"));
        }
        if !(self.p_t > 0.0) {
            return Err(Error::param("p_t", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        if self.arch.layers_p == 0 || self.arch.layers_d == 0 {
            return Err(Error::param("arch", "need at least one hidden layer on each side"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> ThresholdSchedule {
        ThresholdSchedule { tau_theta: self.beta * self.eta, tau_psi: self.gamma * self.eta }
    }
}

/// Thresholds `τ_θ = β·η` (precoder weights) and `τ_ψ = γ·η` (decoder weights).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSchedule {
    pub tau_theta: f64,
    pub tau_psi: f64,
}

pub fn hard_threshold(nets: &mut NeuralPair, schedule: ThresholdSchedule) {
    nets.precoder.hard_threshold(schedule.tau_theta);
    nets.decoder.hard_threshold(schedule.tau_psi);
}

pub(crate) struct PairTrace {
    pre_trace: mlp::Trace,
    dec_trace: mlp::Trace,
    raw_tx: CMat,
}

impl NeuralPair {
    pub fn init(widths_p: &[usize], widths_d: &[usize], alpha: Magnitude, p_t: f64, seed_val: u64) -> Result<Self> {
        let mut rng = seed::rng_at(seed_val, &[stream::INIT]);
        Ok(NeuralPair {
            precoder: ComplexMlp::new(widths_p, alpha, &mut rng)?,
            decoder: ComplexMlp::new(widths_d, alpha, &mut rng)?,
            p_t,
        })
    }

    fn check(&self, h: &CMat) -> Result<()> {
        if h.ncols() != self.precoder.output_dim() || h.nrows() != self.decoder.input_dim() {
            return Err(Error::dim(
                "neural pair vs channel",
                format!("{}x{}", self.decoder.input_dim(), self.precoder.output_dim()),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        Ok(())
    }

    /// Power-normalized transmit symbols for every column of `x`.
    pub fn transmit_symbols(&self, x: &CMat) -> Result<CMat> {
        Ok(normalize_columns(&self.precoder.forward(x)?, self.p_t))
    }

    /// `decoder(H · normalize(precoder(x)) + v)` column-wise.
    pub fn forward(&self, x: &CMat, h: &CMat, noise: &CMat) -> Result<CMat> {
        Ok(self.forward_traced(x, h, noise)?.0)
    }

    pub(crate) fn forward_traced(&self, x: &CMat, h: &CMat, noise: &CMat) -> Result<(CMat, PairTrace)> {
        self.check(h)?;
        if noise.shape() != (h.nrows(), x.ncols()) {
            return Err(Error::dim("neural forward (noise)", format!("{}x{}", h.nrows(), x.ncols()), format!("{:?}", noise.shape())));
        }
        let (raw_tx, pre_trace) = self.precoder.forward_traced(x)?;
        let sent = normalize_columns(&raw_tx, self.p_t);
        let received = h * sent + noise;
        let (out, dec_trace) = self.decoder.forward_traced(&received)?;
        Ok((out, PairTrace { pre_trace, dec_trace, raw_tx }))
    }

    /// Gradients of the batch-mean loss `(1/B) Σ ‖y - ŷ‖²`, given a traced
    /// forward pass that produced `y_hat`.
    pub(crate) fn backward_traced(&self, trace: &PairTrace, y_hat: &CMat, y: &CMat, h: &CMat) -> (Gradients, Gradients) {
        let b = y.ncols() as f64;
        let g_out = (y_hat - y) * C64::new(2.0 / b, 0.0);
        let mut gd = Gradients::zeros_like(&self.decoder);
        let g_rx = self.decoder.backward(&trace.dec_trace, g_out, &mut gd);
        let g_sent = h.adjoint() * g_rx;
        let g_raw = normalize_columns_backward(&trace.raw_tx, &g_sent, self.p_t);
        let mut gp = Gradients::zeros_like(&self.precoder);
        self.precoder.backward(&trace.pre_trace, g_raw, &mut gp);
        (gp, gd)
    }

    /// Fraction of zero entries over both weight sets.
    pub fn sparsity(&self) -> f64 {
        let total = self.precoder.weight_count() + self.decoder.weight_count();
        (self.precoder.zero_weight_count() + self.decoder.zero_weight_count()) as f64 / total as f64
    }
}

/// Batch noise: one fresh CN(0, σ²) vector per column.
pub fn draw_noise(rows: usize, cols: usize, sigma2: f64, seed_val: u64) -> CMat {
    let mut rng = seed::rng(seed_val);
    let mut out = CMat::zeros(rows, cols);
    for j in 0..cols {
        out.set_column(j, &noise_from(&mut rng, rows, sigma2));
    }
    out
}

/// Mean over the batch of `‖y - ŷ‖²` with seeded fresh noise per sample.
/// The sparsity penalties are not part of this value.
pub fn loss(x: &CMat, y: &CMat, h: &CMat, sigma2: f64, nets: &NeuralPair, seed_val: u64) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::dim("loss (X vs Y)", x.ncols(), y.ncols()));
    }
    let noise = draw_noise(h.nrows(), x.ncols(), sigma2, seed_val);
    let y_hat = nets.forward(x, h, &noise)?;
    Ok((y - y_hat).norm_squared() / x.ncols() as f64)
}

/// Gradients of [`loss`] (same seed, same noise) for precoder and decoder,
/// plus the loss value itself.
pub fn backward(nets: &NeuralPair, x: &CMat, y: &CMat, h: &CMat, sigma2: f64, seed_val: u64) -> Result<(Gradients, Gradients, f64)> {
    if x.ncols() != y.ncols() {
        return Err(Error::dim("backward (X vs Y)", x.ncols(), y.ncols()));
    }
    let noise = draw_noise(h.nrows(), x.ncols(), sigma2, seed_val);
    let (y_hat, trace) = nets.forward_traced(x, h, &noise)?;
    let l = (y - &y_hat).norm_squared() / x.ncols() as f64;
    let (gp, gd) = nets.backward_traced(&trace, &y_hat, y, h);
    Ok((gp, gd, l))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean minibatch loss over the epoch.
    pub loss: f64,
    pub sparsity: f64,
}

/// Proximal gradient descent with hard thresholding.
///
/// `x` and `y` hold samples as columns (whitened complex TX latents and
/// complex RX latents). Returns the trained pair and per-epoch statistics.
pub fn train(x: &CMat, y: &CMat, h: &CMat, sigma2: f64, cfg: &TrainConfig) -> Result<(NeuralPair, Vec<EpochStats>)> {
    cfg.validate()?;
    if x.ncols() != y.ncols() || x.ncols() == 0 {
        return Err(Error::dim("train (X vs Y)", x.ncols(), y.ncols()));
    }
    let (wp, wd) = cfg.arch.widths(x.nrows(), y.nrows(), h.ncols(), h.nrows());
    let nets = NeuralPair::init(&wp, &wd, cfg.arch.activation, cfg.p_t, cfg.seed)?;
    train_from(nets, x, y, h, sigma2, cfg)
}

/// Like [`train`] but starting from the given networks.
pub fn train_from(mut nets: NeuralPair, x: &CMat, y: &CMat, h: &CMat, sigma2: f64, cfg: &TrainConfig) -> Result<(NeuralPair, Vec<EpochStats>)> {
    cfg.validate()?;
    nets.check(h)?;
    let n = x.ncols();
    let schedule = cfg.schedule();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng_at(cfg.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select_columns(batch.iter());
            let yb = y.select_columns(batch.iter());
            let noise_seed = seed::derive(cfg.seed, &[stream::NOISE, epoch as u64, step as u64]);
            let (gp, gd, l) = backward(&nets, &xb, &yb, h, sigma2, noise_seed)?;
            if !l.is_finite() {
                return Err(Error::Diverged { epoch, loss: l });
            }
            total += l * batch.len() as f64;
            nets.precoder.descend(&gp, cfg.eta);
            nets.decoder.descend(&gd, cfg.eta);
            if cfg.cadence == ThresholdCadence::Step {
                hard_threshold(&mut nets, schedule);
            }
        }
        if cfg.cadence == ThresholdCadence::Epoch {
            hard_threshold(&mut nets, schedule);
        }
        let epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: epoch_loss });
        }
        history.push(EpochStats { loss: epoch_loss, sparsity: nets.sparsity() });
    }
    Ok((nets, history))
}

/// A trained pair together with the TX whitener it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralEqualizer {
    pub nets: NeuralPair,
    pub whitener: Whitener,
}

impl NeuralEqualizer {
    pub fn forward(&self, x: &CMat, h: &CMat, noise: &CMat) -> Result<CMat> {
        self.nets.forward(&self.whitener.apply_columns(x)?, h, noise)
    }

    pub fn apply_rows(&self, tx: &RMat, h: &CMat, noise: &CMat) -> Result<RMat> {
        Ok(unpair_columns(&self.forward(&pair_rows(tx)?, h, noise)?))
    }
}

pub fn train_neural(
    ds: &LatentDataset,
    ch: &MimoChannel,
    sigma2: f64,
    cfg: &TrainConfig,
    whiten: Option<WhitenOptions>,
    knowledge: ChannelKnowledge,
) -> Result<(NeuralEqualizer, Vec<EpochStats>)> {
    let x_raw = pair_rows(&ds.tx)?;
    let y = pair_rows(&ds.rx)?;
    let whitener = match whiten {
        Some(opts) => crate::codec::fit_whitener(&x_raw, opts)?,
        None => Whitener::identity(x_raw.nrows()),
    };
    let x = whitener.apply_columns(&x_raw)?;
    let h = training_channel(ch, knowledge);
    let (nets, hist) = train(&x, &y, &h, sigma2, cfg)?;
    Ok((NeuralEqualizer { nets, whitener }, hist))
}
