//! End-to-end scoring and Monte-Carlo sweeps.
//!
//! A sweep expands into independent [`Job`]s, one per (grid point,
//! realization). Every random draw inside a job is seeded from the base seed
//! and the job's coordinates, so jobs can run in any order or in parallel and
//! still produce the same records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineOptions, BaselinePipeline};
use crate::channel::{sample_channel, sigma2_from_snr, MimoChannel, SnrSpec};
use crate::codec::{compression_factor, ChannelDims, ClassifierHead, LatentDataset, WhitenOptions};
use crate::error::{Error, Result};
use crate::flops::{complex_matvec_flops, exact_neural_flops, linear_model_flops, DEFAULT_ACTIVATION_COST};
use crate::linalg::{CMat, RMat};
use crate::linear_eq::{train_linear, AdmmConfig, ChannelKnowledge, LinearEqualizer};
use crate::neural_eq::{draw_noise, train_neural, NeuralEqualizer, TrainConfig};
use crate::seed::{derive, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub zeta: f64,
    pub snr_db: f64,
    pub n_pilots: usize,
    pub seed: u64,
    pub mse: f64,
    pub accuracy: f64,
    pub flops: u64,
    pub sparsity: f64,
}

pub const CSV_HEADER: &str = "method,zeta,snr_db,n_pilots,seed,mse,accuracy,flops,sparsity";

/// `x` with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        let s = format!("{:.*}", (8 - exp).max(0) as usize, x);
        // rounding can carry into a new digit, e.g. 9.999999999 -> 10.00000000
        trim(s)
    } else {
        let s = format!("{:.8e}", x);
        let (mant, e) = s.split_once('e').expect("exponent form");
        format!("{}e{}", trim(mant.to_string()), e)
    }
}

impl EvalRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            fmt_sig9(self.zeta),
            fmt_sig9(self.snr_db),
            self.n_pilots,
            self.seed,
            fmt_sig9(self.mse),
            fmt_sig9(self.accuracy),
            self.flops,
            fmt_sig9(self.sparsity)
        )
    }
}

pub fn write_csv<W: Write>(records: &[EvalRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn to_csv(records: &[EvalRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Anything that maps TX latents (rows) to RX latent estimates through a
/// channel `h` with additive noise (one column per sample).
pub trait Equalizer {
    fn reconstruct(&self, tx: &RMat, h: &CMat, noise: &CMat) -> Result<RMat>;
}

impl Equalizer for LinearEqualizer {
    fn reconstruct(&self, tx: &RMat, h: &CMat, noise: &CMat) -> Result<RMat> {
        self.apply_rows(tx, h, noise)
    }
}

impl Equalizer for NeuralEqualizer {
    fn reconstruct(&self, tx: &RMat, h: &CMat, noise: &CMat) -> Result<RMat> {
        self.apply_rows(tx, h, noise)
    }
}

impl Equalizer for BaselinePipeline {
    fn reconstruct(&self, tx: &RMat, h: &CMat, noise: &CMat) -> Result<RMat> {
        self.apply_rows(tx, h, noise)
    }
}

/// One fresh CN(0, σ²) vector per evaluated sample.
pub fn eval_noise(rows: usize, n: usize, sigma2: f64, noise_seed: u64) -> CMat {
    draw_noise(rows, n, sigma2, derive(noise_seed, &[stream::EVAL_NOISE]))
}

/// Mean of `‖s_R - ŝ_R‖²` over rows.
pub fn mse_of(pred: &RMat, truth: &RMat) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::dim("mse", format!("{:?}", truth.shape()), format!("{:?}", pred.shape())));
    }
    if pred.nrows() == 0 {
        return Ok(0.0);
    }
    Ok((pred - truth).norm_squared() / pred.nrows() as f64)
}

/// Fraction of rows the head assigns to their label.
pub fn accuracy_of(pred: &RMat, labels: &[u32], head: &ClassifierHead) -> Result<f64> {
    if pred.nrows() != labels.len() {
        return Err(Error::dim("accuracy labels", pred.nrows(), labels.len()));
    }
    if pred.ncols() != head.w.ncols() {
        return Err(Error::dim("accuracy head", head.w.ncols(), pred.ncols()));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = (0..pred.nrows())
        .filter(|&i| {
            let s: Vec<f64> = pred.row(i).iter().copied().collect();
            head.predict(&s) == labels[i] as usize
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

fn predictions(model: &dyn Equalizer, ds: &LatentDataset, h: &CMat, sigma2: f64, noise_seed: u64) -> Result<RMat> {
    let noise = eval_noise(h.nrows(), ds.n(), sigma2, noise_seed);
    model.reconstruct(&ds.tx, h, &noise)
}

pub fn mse_eval(model: &dyn Equalizer, ds: &LatentDataset, h: &CMat, sigma2: f64, noise_seed: u64) -> Result<f64> {
    mse_of(&predictions(model, ds, h, sigma2, noise_seed)?, &ds.rx)
}

pub fn accuracy_eval(
    model: &dyn Equalizer,
    ds: &LatentDataset,
    head: &ClassifierHead,
    h: &CMat,
    sigma2: f64,
    noise_seed: u64,
) -> Result<f64> {
    accuracy_of(&predictions(model, ds, h, sigma2, noise_seed)?, &ds.labels, head)
}

/// `(mse, accuracy)` from a single noise draw.
pub fn score(model: &dyn Equalizer, ds: &LatentDataset, h: &CMat, sigma2: f64, noise_seed: u64) -> Result<(f64, f64)> {
    let head = ds.head.as_ref().ok_or_else(|| Error::Validation("accuracy needs a classifier head in the dataset".into()))?;
    let pred = predictions(model, ds, h, sigma2, noise_seed)?;
    Ok((mse_of(&pred, &ds.rx)?, accuracy_of(&pred, &ds.labels, head)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Linear,
    LinearUnaware,
    Neural,
    NeuralUnaware,
    FirstK,
    TopK,
    EigenK,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Linear,
        Method::LinearUnaware,
        Method::Neural,
        Method::NeuralUnaware,
        Method::FirstK,
        Method::TopK,
        Method::EigenK,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::LinearUnaware => "linear_unaware",
            Method::Neural => "neural",
            Method::NeuralUnaware => "neural_unaware",
            Method::FirstK => "first_k",
            Method::TopK => "top_k",
            Method::EigenK => "eigen_k",
        }
    }

    fn tag(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::FirstK => Some(BaselineKind::FirstK),
            Method::TopK => Some(BaselineKind::TopK),
            Method::EigenK => Some(BaselineKind::EigenK),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    /// Antenna/use configurations; each sets one compression factor.
    pub antennas: Vec<ChannelDims>,
    pub snr_db: Vec<f64>,
    /// Values of `β = γ` for the neural methods.
    pub sparsity: Vec<f64>,
    pub n_realizations: usize,
    /// Leading rows of the dataset used as pilots.
    pub n_pilots: usize,
    /// Rows after the pilots used for scoring; `None` takes the rest.
    pub n_test: Option<usize>,
    pub p_t: f64,
    pub admm: AdmmConfig,
    pub neural: TrainConfig,
    /// `None` disables pre-whitening.
    pub whiten: Option<WhitenOptions>,
    pub baseline: BaselineOptions,
    pub activation_cost: u64,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            methods: vec![Method::Linear],
            antennas: vec![ChannelDims { k: 1, n_t: 2, n_r: 2 }],
            snr_db: vec![20.0],
            sparsity: vec![0.0],
            n_realizations: 6,
            n_pilots: 420,
            n_test: None,
            p_t: 1.0,
            admm: AdmmConfig::default(),
            neural: TrainConfig::default(),
            whiten: Some(WhitenOptions::default()),
            baseline: BaselineOptions::default(),
            activation_cost: DEFAULT_ACTIVATION_COST,
            base_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self, ds: &LatentDataset) -> Result<()> {
        fn nonempty(name: &'static str, len: usize) -> Result<()> {
            if len == 0 {
                return Err(Error::param(name, "must not be empty"));
            }
            Ok(())
        }
        nonempty("methods", self.methods.len())?;
        nonempty("antennas", self.antennas.len())?;
        nonempty("snr_db", self.snr_db.len())?;
        nonempty("sparsity", self.sparsity.len())?;
        if self.n_realizations == 0 {
            return Err(Error::param("n_realizations", "must be >= 1"));
        }
        for a in &self.antennas {
            a.validate()?;
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("snr_db", "values must be finite"));
        }
        if self.sparsity.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::param("sparsity", "values must be >= 0"));
        }
        if !(self.p_t > 0.0) {
            return Err(Error::param("p_t", "must be > 0"));
        }
        self.admm.validate()?;
        self.neural.validate()?;
        let (train, test) = self.split_sizes(ds)?;
        if train < 2 || test == 0 {
            return Err(Error::InsufficientData(format!("need >= 2 pilots and >= 1 test row, got {train} and {test}")));
        }
        if self.methods.iter().any(|m| m.baseline().is_some()) {
            for a in &self.antennas {
                let streams = match self.baseline.lifting {
                    crate::baselines::Lifting::Multiplex => a.tx_symbols(),
                    crate::baselines::Lifting::Repeat => a.n_t,
                };
                if 2 * streams > ds.d() {
                    return Err(Error::param("antennas", format!("baseline budget 2x{streams} exceeds d = {}", ds.d())));
                }
            }
        }
        if ds.head.is_none() {
            return Err(Error::Validation("sweeps score accuracy and need a classifier head".into()));
        }
        Ok(())
    }

    fn split_sizes(&self, ds: &LatentDataset) -> Result<(usize, usize)> {
        if self.n_pilots > ds.n() {
            return Err(Error::InsufficientData(format!("{} pilots requested, dataset has {} rows", self.n_pilots, ds.n())));
        }
        let rest = ds.n() - self.n_pilots;
        let test = self.n_test.unwrap_or(rest);
        if test > rest {
            return Err(Error::InsufficientData(format!("{test} test rows requested, only {rest} remain after the pilots")));
        }
        Ok((self.n_pilots, test))
    }

    /// `|methods| x |antennas| x |snr_db| x |sparsity| x n_realizations`.
    pub fn record_count(&self) -> usize {
        self.methods.len() * self.antennas.len() * self.snr_db.len() * self.sparsity.len() * self.n_realizations
    }
}

/// One grid point and realization; produces one record per method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub dims: ChannelDims,
    pub snr_db: f64,
    pub sparsity: f64,
    pub realization: usize,
}

impl Job {
    /// Shared by every SNR and sparsity value at the same antenna point.
    pub fn channel_seed(&self, base: u64) -> u64 {
        derive(base, &[stream::CHANNEL, self.dims.k as u64, self.dims.n_t as u64, self.dims.n_r as u64, self.realization as u64])
    }

    /// Seed recorded in the CSV, identifying the realization.
    pub fn realization_seed(&self, base: u64) -> u64 {
        derive(base, &[self.realization as u64])
    }

    /// Antenna point and realization. SNR and sparsity are left out so that
    /// every point of a realization sees the same initializations and noise
    /// directions (common random numbers along those axes).
    fn point_path(&self) -> [u64; 4] {
        [self.dims.k as u64, self.dims.n_t as u64, self.dims.n_r as u64, self.realization as u64]
    }

    fn noise_seed(&self, base: u64) -> u64 {
        let mut path = vec![stream::EVAL_NOISE];
        path.extend(self.point_path());
        derive(base, &path)
    }

    fn method_seed(&self, base: u64, method: Method, tag: u64) -> u64 {
        let mut path = vec![tag, method.tag()];
        path.extend(self.point_path());
        derive(base, &path)
    }
}

/// Grid expansion in output order: antennas, then SNR, then sparsity, then
/// realization.
pub fn jobs(cfg: &SweepConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &dims in &cfg.antennas {
        for &snr_db in &cfg.snr_db {
            for &sparsity in &cfg.sparsity {
                for realization in 0..cfg.n_realizations {
                    out.push(Job { dims, snr_db, sparsity, realization });
                }
            }
        }
    }
    out
}

/// Pilot and test splits used by every job.
pub fn split(cfg: &SweepConfig, ds: &LatentDataset) -> Result<(LatentDataset, LatentDataset)> {
    let (train, test) = cfg.split_sizes(ds)?;
    Ok((ds.slice(0, train)?, ds.slice(train, train + test)?))
}

fn baseline_flops(pipe: &BaselinePipeline, d: usize, m: usize) -> u64 {
    let streams = pipe.equalizer.streams() as u64;
    let f = pipe.equalizer.f();
    let g = pipe.equalizer.g();
    let mut total = complex_matvec_flops(f.nrows() as u64, streams, false, 0.0).expect("dense")
        + complex_matvec_flops(streams, g.ncols() as u64, false, 0.0).expect("dense");
    // real matvecs: a x b costs a(2b - 1)
    let real = |a: u64, b: u64| a * (2 * b).saturating_sub(1);
    total += match &pipe.eigen {
        Some((f_t, g_t)) => real(f_t.nrows() as u64, d as u64) + real(m as u64, g_t.ncols() as u64),
        None => real(m as u64, d as u64),
    };
    total
}

/// Trains and scores every method of `cfg` for one job.
pub fn run_job(cfg: &SweepConfig, pilots: &LatentDataset, test: &LatentDataset, job: &Job) -> Result<Vec<EvalRecord>> {
    let base = cfg.base_seed;
    let ch: MimoChannel = sample_channel(job.dims, job.channel_seed(base));
    let h = ch.lift();
    let snr = SnrSpec::new(job.snr_db, cfg.p_t)?;
    let sigma2 = sigma2_from_snr(snr);
    let zeta = compression_factor(job.dims, pilots.d())?;
    let noise_seed = job.noise_seed(base);
    let (d, m) = (pilots.d(), pilots.m());
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let knowledge = match method {
            Method::LinearUnaware | Method::NeuralUnaware => ChannelKnowledge::Unaware,
            _ => ChannelKnowledge::Aware,
        };
        let (mse, accuracy, flops, sparsity) = match method {
            Method::Linear | Method::LinearUnaware => {
                let admm = AdmmConfig { p_t: cfg.p_t, ..cfg.admm };
                let seed = job.method_seed(base, method, stream::INIT);
                let (eq, _) = train_linear(pilots, &ch, sigma2, &admm, cfg.whiten, knowledge, seed)?;
                let (mse, acc) = score(&eq, test, &h, sigma2, noise_seed)?;
                (mse, acc, linear_model_flops(job.dims, d as u64, m as u64), 0.0)
            }
            Method::Neural | Method::NeuralUnaware => {
                let train_cfg = TrainConfig {
                    p_t: cfg.p_t,
                    beta: job.sparsity,
                    gamma: job.sparsity,
                    seed: job.method_seed(base, method, stream::INIT),
                    ..cfg.neural
                };
                let (eq, _) = train_neural(pilots, &ch, sigma2, &train_cfg, cfg.whiten, knowledge)?;
                let (mse, acc) = score(&eq, test, &h, sigma2, noise_seed)?;
                let report = exact_neural_flops(&eq.nets, cfg.activation_cost);
                (mse, acc, report.total, report.sparsity_used)
            }
            Method::FirstK | Method::TopK | Method::EigenK => {
                let kind = method.baseline().expect("baseline method");
                let pipe = BaselinePipeline::fit(kind, pilots, &ch, snr.linear(), cfg.p_t, cfg.baseline)?;
                let (mse, acc) = score(&pipe, test, &h, sigma2, noise_seed)?;
                (mse, acc, baseline_flops(&pipe, d, m), 0.0)
            }
        };
        out.push(EvalRecord {
            method: method.name().to_string(),
            zeta,
            snr_db: job.snr_db,
            n_pilots: pilots.n(),
            seed: job.realization_seed(base),
            mse,
            accuracy,
            flops,
            sparsity,
        });
    }
    Ok(out)
}

/// Sequential sweep. Callers wanting parallelism can map [`run_job`] over
/// [`jobs`] themselves and concatenate in job order.
pub fn monte_carlo(cfg: &SweepConfig, ds: &LatentDataset) -> Result<Vec<EvalRecord>> {
    cfg.validate(ds)?;
    let (pilots, test) = split(cfg, ds)?;
    let mut out = Vec::with_capacity(cfg.record_count());
    for job in jobs(cfg) {
        out.extend(run_job(cfg, &pilots, &test, &job)?);
    }
    Ok(out)
}

/// Mean accuracy per `(method, zeta, snr_db)` in first-seen order.
pub fn mean_accuracy(records: &[EvalRecord]) -> Vec<(String, f64, f64, f64)> {
    let mut keys: Vec<(String, u64, u64)> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for r in records {
        let key = (r.method.clone(), r.zeta.to_bits(), r.snr_db.to_bits());
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                sums.push((0.0, 0));
                keys.len() - 1
            }
        };
        sums[idx].0 += r.accuracy;
        sums[idx].1 += 1;
    }
    keys.into_iter()
        .zip(sums)
        .map(|((m, z, s), (sum, n))| (m, f64::from_bits(z), f64::from_bits(s), sum / n as f64))
        .collect()
}
