//! Disjoint baselines: a least-squares alignment map at the receiver and an
//! SVD-equalized channel carrying a selected subset of TX features.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::channel::MimoChannel;
use crate::codec::{pair_rows, unpair_columns, LatentDataset};
use crate::error::{Error, Result};
use crate::linalg::{kron_identity, CMat, RMat, C64};

/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Real `m x d` map from TX latents to RX latents.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub q: RMat,
}

impl AlignmentMap {
    /// Applies `Q` to latents stored as rows.
    pub fn apply_rows(&self, s: &RMat) -> RMat {
        s * self.q.transpose()
    }
}

fn pinv(a: &RMat) -> RMat {
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let cutoff = PINV_RCOND * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = RMat::zeros(a.ncols(), a.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += vt.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    out
}

/// Minimum-norm least-squares `Q = S_R S_T^+` over the pilots.
pub fn fit_alignment(ds: &LatentDataset) -> Result<AlignmentMap> {
    if ds.n() == 0 {
        return Err(Error::InsufficientData("alignment needs at least one pilot".into()));
    }
    // rows are samples: Q^T = S_T^+ S_R in row layout
    let q = (pinv(&ds.tx) * &ds.rx).transpose();
    if !q.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite alignment map".into()));
    }
    Ok(AlignmentMap { q })
}

/// How the per-use SVD blocks are spread across the `K` channel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifting {
    /// `I_K ⊗ block`: distinct symbols on every use.
    #[default]
    Multiplex,
    /// `1_K ⊗ block`: the same symbols repeated, averaged at the receiver.
    Repeat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdEqualizer {
    /// `N_T x N_T`, columns beyond the channel rank are zero.
    pub f_block: CMat,
    /// `N_T x N_R`, rows beyond the channel rank are zero.
    pub g_block: CMat,
    pub k: usize,
    pub lifting: Lifting,
}

/// `f = V`, `g = (Σ^HΣ + I/snr)^(-1) (UΣ)^H` per channel use. `snr_linear`
/// may be `f64::INFINITY` for zero forcing.
pub fn svd_equalizer(h_bar: &CMat, snr_linear: f64, k: usize, lifting: Lifting) -> Result<SvdEqualizer> {
    if !(snr_linear > 0.0) {
        return Err(Error::param("snr_linear", format!("must be > 0, got {snr_linear}")));
    }
    if k == 0 {
        return Err(Error::param("K", "must be >= 1"));
    }
    let (n_r, n_t) = h_bar.shape();
    let svd = SVD::new(h_bar.clone(), true, true);
    let (u, v_t) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical("SVD of the channel failed".into())),
    };
    if !svd.singular_values.iter().all(|s| s.is_finite()) {
        return Err(Error::Numerical("non-finite channel singular values".into()));
    }
    let inv_snr = 1.0 / snr_linear;
    let mut f_block = CMat::zeros(n_t, n_t);
    let mut g_block = CMat::zeros(n_t, n_r);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let v_col = v_t.row(i).adjoint();
        f_block.set_column(i, &v_col);
        let gain = s / (s * s + inv_snr);
        let row = u.column(i).adjoint() * C64::new(gain, 0.0);
        g_block.set_row(i, &row);
    }
    Ok(SvdEqualizer { f_block, g_block, k, lifting })
}

impl SvdEqualizer {
    /// Number of complex symbols carried per block of `K` uses.
    pub fn streams(&self) -> usize {
        match self.lifting {
            Lifting::Multiplex => self.k * self.f_block.ncols(),
            Lifting::Repeat => self.f_block.ncols(),
        }
    }

    /// Lifted precoder, `KN_T x streams`.
    pub fn f(&self) -> CMat {
        match self.lifting {
            Lifting::Multiplex => kron_identity(self.k, &self.f_block),
            Lifting::Repeat => {
                let (r, c) = self.f_block.shape();
                let mut out = CMat::zeros(self.k * r, c);
                for u in 0..self.k {
                    out.view_mut((u * r, 0), (r, c)).copy_from(&self.f_block);
                }
                out
            }
        }
    }

    /// Lifted receiver, `streams x KN_R`.
    pub fn g(&self) -> CMat {
        match self.lifting {
            Lifting::Multiplex => kron_identity(self.k, &self.g_block),
            Lifting::Repeat => {
                let (r, c) = self.g_block.shape();
                let scale = C64::new(1.0 / self.k as f64, 0.0);
                let mut out = CMat::zeros(r, self.k * c);
                for u in 0..self.k {
                    out.view_mut((0, u * c), (r, c)).copy_from(&(&self.g_block * scale));
                }
                out
            }
        }
    }
}

/// First `budget` features, and the zero-filled reconstruction.
pub fn select_first_k(s: &[f64], budget: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if budget > s.len() {
        return Err(Error::param("budget", format!("{budget} exceeds latent size {}", s.len())));
    }
    let payload = s[..budget].to_vec();
    let mut rec = vec![0.0; s.len()];
    rec[..budget].copy_from_slice(&payload);
    Ok((payload, rec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub values: Vec<f64>,
    /// Increasing order.
    pub indices: Vec<usize>,
    pub reconstruct: Vec<f64>,
}

/// The `budget/2` largest-magnitude features. The other half of the budget
/// pays for their indices, which are assumed to arrive intact.
pub fn select_top_k(s: &[f64], budget: usize) -> Result<TopK> {
    if !budget.is_multiple_of(2) {
        return Err(Error::param("budget", format!("top-k needs an even budget, got {budget}")));
    }
    if budget > s.len() {
        return Err(Error::param("budget", format!("{budget} exceeds latent size {}", s.len())));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&a, &b| s[b].abs().total_cmp(&s[a].abs()));
    let mut indices = order[..budget / 2].to_vec();
    indices.sort_unstable();
    let values: Vec<f64> = indices.iter().map(|&i| s[i]).collect();
    let mut reconstruct = vec![0.0; s.len()];
    for (&i, &v) in indices.iter().zip(&values) {
        reconstruct[i] = v;
    }
    Ok(TopK { values, indices, reconstruct })
}

/// Where the singular values of `Q` go in the truncated factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenVariant {
    /// `Σ` on both sides, so the composition carries `Σ²`.
    #[default]
    AsWritten,
    /// `Σ^(1/2)` on each side.
    SplitSqrt,
    /// `Σ` on the transmit side only.
    SigmaTxOnly,
}

/// Truncated-SVD encoder `f̃` (`budget x d`) and decoder `g̃` (`m x budget`).
pub fn eigen_k_codecs(q: &RMat, budget: usize, variant: EigenVariant) -> Result<(RMat, RMat)> {
    let (m, d) = q.shape();
    if budget > m.min(d) {
        return Err(Error::param("budget", format!("{budget} exceeds min(m, d) = {}", m.min(d))));
    }
    let svd = SVD::new(q.clone(), true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD of Q failed".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD of Q failed".into()))?;
    // nalgebra does not promise sorted singular values
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut f = RMat::zeros(budget, d);
    let mut g = RMat::zeros(m, budget);
    for (r, &i) in order.iter().take(budget).enumerate() {
        let s = svd.singular_values[i];
        let (tx, rx) = match variant {
            EigenVariant::AsWritten => (s, s),
            EigenVariant::SplitSqrt => (s.sqrt(), s.sqrt()),
            EigenVariant::SigmaTxOnly => (s, 1.0),
        };
        f.set_row(r, &(vt.row(i) * tx));
        g.set_column(r, &(u.column(i) * rx));
    }
    Ok((f, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    FirstK,
    TopK,
    EigenK,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::FirstK => "first_k",
            BaselineKind::TopK => "top_k",
            BaselineKind::EigenK => "eigen_k",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineOptions {
    pub lifting: Lifting,
    pub eigen_variant: EigenVariant,
}

/// A fitted baseline: selection, SVD-equalized transport, reconstruction,
/// then alignment (or the Eigen-κ decoder).
#[derive(Debug, Clone)]
pub struct BaselinePipeline {
    pub kind: BaselineKind,
    pub budget: usize,
    pub align: AlignmentMap,
    pub eigen: Option<(RMat, RMat)>,
    pub equalizer: SvdEqualizer,
    /// Scales payloads so the pilots carry average power `p_t`.
    pub gain: f64,
}

impl BaselinePipeline {
    /// Fits `Q` (and `f̃, g̃`) on the pilots, and the SVD equalizer for `ch`.
    pub fn fit(
        kind: BaselineKind,
        pilots: &LatentDataset,
        ch: &MimoChannel,
        snr_linear: f64,
        p_t: f64,
        opts: BaselineOptions,
    ) -> Result<Self> {
        let equalizer = svd_equalizer(&ch.h_bar, snr_linear, ch.dims.k, opts.lifting)?;
        let budget = 2 * equalizer.streams();
        let d = pilots.d();
        if budget > d {
            return Err(Error::param("budget", format!("2 x streams = {budget} exceeds d = {d}")));
        }
        let align = fit_alignment(pilots)?;
        let eigen = match kind {
            BaselineKind::EigenK => Some(eigen_k_codecs(&align.q, budget, opts.eigen_variant)?),
            _ => None,
        };
        let mut pipe = BaselinePipeline { kind, budget, align, eigen, equalizer, gain: 1.0 };
        let payload = pipe.payload_rows(&pilots.tx)?;
        let mean_power = payload.norm_squared() / pilots.n() as f64;
        pipe.gain = if mean_power > 0.0 { (p_t / mean_power).sqrt() } else { 1.0 };
        Ok(pipe)
    }

    /// Real payloads of width `budget`, one row per sample.
    pub fn payload_rows(&self, tx: &RMat) -> Result<RMat> {
        let n = tx.nrows();
        let mut out = RMat::zeros(n, self.budget);
        for i in 0..n {
            let s: Vec<f64> = tx.row(i).iter().copied().collect();
            let p = match self.kind {
                BaselineKind::FirstK => select_first_k(&s, self.budget)?.0,
                BaselineKind::TopK => {
                    let mut v = select_top_k(&s, self.budget)?.values;
                    v.resize(self.budget, 0.0);
                    v
                }
                BaselineKind::EigenK => {
                    let (f, _) = self.eigen.as_ref().expect("eigen codecs fitted");
                    (f * tx.row(i).transpose()).iter().copied().collect()
                }
            };
            out.set_row(i, &nalgebra::RowDVector::from_vec(p));
        }
        Ok(out)
    }

    /// End-to-end RX estimates for TX latents stored as rows.
    pub fn apply_rows(&self, tx: &RMat, h: &CMat, noise: &CMat) -> Result<RMat> {
        let f = self.equalizer.f();
        let g = self.equalizer.g();
        if h.shape() != (g.ncols(), f.nrows()) {
            return Err(Error::dim("baseline channel", format!("{}x{}", g.ncols(), f.nrows()), format!("{:?}", h.shape())));
        }
        if noise.shape() != (h.nrows(), tx.nrows()) {
            return Err(Error::dim("baseline noise", format!("{}x{}", h.nrows(), tx.nrows()), format!("{:?}", noise.shape())));
        }
        let payload = self.payload_rows(tx)?;
        let x = pair_rows(&payload)? * C64::new(self.gain, 0.0);
        let x_hat = (&g * (h * (&f * x) + noise)) / C64::new(self.gain, 0.0);
        let received = unpair_columns(&x_hat);
        let d = tx.ncols();
        let mut rec = RMat::zeros(tx.nrows(), d);
        for i in 0..tx.nrows() {
            match self.kind {
                BaselineKind::FirstK => rec.view_mut((i, 0), (1, self.budget)).copy_from(&received.row(i)),
                BaselineKind::TopK => {
                    let s: Vec<f64> = tx.row(i).iter().copied().collect();
                    let idx = select_top_k(&s, self.budget)?.indices;
                    for (slot, &j) in idx.iter().enumerate() {
                        rec[(i, j)] = received[(i, slot)];
                    }
                }
                BaselineKind::EigenK => {
                    let (_, g_t) = self.eigen.as_ref().expect("eigen codecs fitted");
                    return Ok(received * g_t.transpose());
                }
            }
        }
        Ok(self.align.apply_rows(&rec))
    }
}
