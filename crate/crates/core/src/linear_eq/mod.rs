//! Linear semantic precoder `F` and decoder `G` learned with scaled ADMM on
//!
//! ```text
//! min_{G,F} (1/n) ‖Y - G H F X‖_F² + tr(G Σ_v G^H)   s.t. tr(F F^H) ≤ P_T
//! ```
//!
//! using the splitting `F = Z` with `Z` restricted to the power ball. One
//! iteration runs the closed-form G update, the F normal equation, the
//! projection onto the ball and the scaled dual update, in that order.

pub mod fstep;

pub use fstep::{normal_equation_residual, solve_bartels_stewart, solve_kron};

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::channel::MimoChannel;
use crate::codec::{pair_rows, pair_to_complex, unpair_columns, unpair_to_real, ChannelDims, LatentDataset, WhitenOptions, Whitener};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, eye_rect, power, CMat, CVec, C64};
use crate::seed::{self, stream};

/// Noise variance used in the G update when the caller passes zero.
pub const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FSolver {
    Kron,
    Sylvester,
    /// Kronecker for small unknowns, Bartels–Stewart otherwise.
    Auto,
}

/// Largest `vec(F)` length for which [`FSolver::Auto`] picks the dense route.
pub const AUTO_KRON_MAX_UNKNOWNS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub rho: f64,
    pub iters: usize,
    pub p_t: f64,
    pub f_solver: FSolver,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig { rho: 100.0, iters: 20, p_t: 1.0, f_solver: FSolver::Auto }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::param("rho", format!("must be > 0, got {}", self.rho)));
        }
        if !(self.p_t > 0.0) || !self.p_t.is_finite() {
            return Err(Error::param("p_t", format!("must be > 0, got {}", self.p_t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub f: CMat,
    pub z: CMat,
    pub u: CMat,
    pub g: CMat,
    /// Objective at `(G^(t+1), F^(t+1))`, recorded after each U update.
    pub objective_history: Vec<f64>,
    /// Objective `(before, after)` the G update of each iteration.
    pub g_step_history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEqualizer {
    /// `K·N_T x d/2`
    pub f: CMat,
    /// `m/2 x K·N_R`
    pub g: CMat,
    pub whitener: Whitener,
    pub p_t: f64,
}

fn check_cols(context: &'static str, a: &CMat, b: &CMat) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::dim(context, a.ncols(), b.ncols()));
    }
    Ok(())
}

/// `(1/n) ‖Y - G H F X‖_F² + σ² tr(G G^H)`.
pub fn objective(g: &CMat, f: &CMat, x: &CMat, y: &CMat, h: &CMat, sigma2: f64, n: usize) -> Result<f64> {
    check_cols("objective (X vs Y)", x, y)?;
    if f.ncols() != x.nrows() || h.ncols() != f.nrows() || g.ncols() != h.nrows() || g.nrows() != y.nrows() {
        return Err(Error::dim(
            "objective",
            "chain G·H·F·X -> Y",
            format!("G {:?}, H {:?}, F {:?}, X {:?}, Y {:?}", g.shape(), h.shape(), f.shape(), x.shape(), y.shape()),
        ));
    }
    let resid = y - g * (h * (f * x));
    Ok(resid.norm_squared() / n as f64 + sigma2 * power(g))
}

/// `G = Y (HFX)^H ((HFX)(HFX)^H + n σ² I)⁻¹`, with `σ²` floored at
/// [`SIGMA2_FLOOR`].
pub fn g_step(f: &CMat, x: &CMat, y: &CMat, h: &CMat, sigma2: f64, n: usize) -> Result<CMat> {
    if !(sigma2 >= 0.0) {
        return Err(Error::param("sigma2", format!("must be >= 0, got {sigma2}")));
    }
    check_cols("g_step (X vs Y)", x, y)?;
    if h.ncols() != f.nrows() || f.ncols() != x.nrows() {
        return Err(Error::dim("g_step", "chain H·F·X", format!("H {:?}, F {:?}, X {:?}", h.shape(), f.shape(), x.shape())));
    }
    let s2 = sigma2.max(SIGMA2_FLOOR);
    let p = h * (f * x);
    let mut gram = &p * p.adjoint();
    for i in 0..gram.nrows() {
        gram[(i, i)] += C64::new(n as f64 * s2, 0.0);
    }
    let chol = Cholesky::new(gram).ok_or_else(|| Error::Singular {
        context: "g_step",
        reason: "(HFX)(HFX)^H + nΣ_v is not positive definite; check for non-finite inputs".into(),
    })?;
    // G^H = M⁻¹ (HFX) Y^H with M Hermitian.
    let g = chol.solve(&(&p * y.adjoint())).adjoint();
    if !g.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Singular { context: "g_step", reason: "solution is not finite".into() });
    }
    Ok(g)
}

/// Pieces of the precoder normal equation `A F B + nρ F = C`.
#[allow(clippy::too_many_arguments)]
pub fn f_step_system(g: &CMat, x: &CMat, y: &CMat, h: &CMat, z: &CMat, u: &CMat, rho: f64, n: usize) -> (CMat, CMat, CMat) {
    let gh = g * h;
    let a = gh.adjoint() * &gh;
    let b = x * x.adjoint();
    let c = (z - u) * C64::new(n as f64 * rho, 0.0) + gh.adjoint() * y * x.adjoint();
    (a, b, c)
}

#[allow(clippy::too_many_arguments)]
pub fn f_step(g: &CMat, x: &CMat, y: &CMat, h: &CMat, z: &CMat, u: &CMat, rho: f64, n: usize, solver: FSolver) -> Result<CMat> {
    if !(rho > 0.0) {
        return Err(Error::param("rho", format!("must be > 0, got {rho}")));
    }
    check_cols("f_step (X vs Y)", x, y)?;
    if g.ncols() != h.nrows() || z.shape() != (h.ncols(), x.nrows()) || u.shape() != z.shape() || g.nrows() != y.nrows() {
        return Err(Error::dim(
            "f_step",
            "consistent G, H, Z, U, X, Y",
            format!("G {:?}, H {:?}, Z {:?}, U {:?}, X {:?}, Y {:?}", g.shape(), h.shape(), z.shape(), u.shape(), x.shape(), y.shape()),
        ));
    }
    let (a, b, c) = f_step_system(g, x, y, h, z, u, rho, n);
    let nr = n as f64 * rho;
    match resolve_solver(solver, z.len()) {
        FSolver::Kron => solve_kron(&a, &b, nr, &c),
        _ => solve_bartels_stewart(&a, &b, nr, &c),
    }
}

fn resolve_solver(solver: FSolver, unknowns: usize) -> FSolver {
    match solver {
        FSolver::Auto if unknowns <= AUTO_KRON_MAX_UNKNOWNS => FSolver::Kron,
        FSolver::Auto => FSolver::Sylvester,
        s => s,
    }
}

/// Scaling factor `1/(1+λ̂)` of the projection onto `tr(Z Z^H) ≤ P_T`.
pub fn projection_scale(z_hat: &CMat, p_t: f64) -> f64 {
    let tr = power(z_hat);
    if tr <= p_t {
        1.0
    } else {
        let lambda = (tr / p_t).sqrt() - 1.0;
        1.0 / (1.0 + lambda)
    }
}

/// Orthogonal projection of `Ẑ = F + U` onto the power ball.
pub fn z_step(f_plus_u: &CMat, p_t: f64) -> CMat {
    let scale = projection_scale(f_plus_u, p_t);
    if scale == 1.0 {
        return f_plus_u.clone();
    }
    let mut z = f_plus_u * C64::new(scale, 0.0);
    // guard the last ulp so the constraint holds exactly
    let tr = power(&z);
    if tr > p_t {
        z *= C64::new((p_t / tr).sqrt() * (1.0 - f64::EPSILON), 0.0);
    }
    z
}

pub fn u_step(u: &CMat, f: &CMat, z: &CMat) -> Result<CMat> {
    if u.shape() != f.shape() || f.shape() != z.shape() {
        return Err(Error::dim("u_step", format!("{:?}", u.shape()), format!("F {:?}, Z {:?}", f.shape(), z.shape())));
    }
    Ok(u + (f - z))
}

/// Runs `cfg.iters` ADMM iterations from `F⁽⁰⁾ ~ CN(0, 1)` and `Z⁽⁰⁾ = U⁽⁰⁾ = 0`.
///
/// `x` is expected to be whitened already. The deployed precoder is the
/// projection of the last `F` onto the power ball, and the deployed decoder
/// is the closed-form G for that precoder.
pub fn run_admm(x: &CMat, y: &CMat, h: &CMat, sigma2: f64, cfg: &AdmmConfig, seed: u64) -> Result<(LinearEqualizer, AdmmState)> {
    cfg.validate()?;
    check_cols("run_admm (X vs Y)", x, y)?;
    let n = x.ncols();
    if n == 0 {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    let (rx_syms, tx_syms) = h.shape();
    let mut rng = seed::rng_at(seed, &[stream::INIT]);
    let mut state = AdmmState {
        f: complex_gaussian(tx_syms, x.nrows(), 1.0, &mut rng),
        z: CMat::zeros(tx_syms, x.nrows()),
        u: CMat::zeros(tx_syms, x.nrows()),
        g: CMat::zeros(y.nrows(), rx_syms),
        objective_history: Vec::with_capacity(cfg.iters),
        g_step_history: Vec::with_capacity(cfg.iters),
    };

    for _ in 0..cfg.iters {
        let before = objective(&state.g, &state.f, x, y, h, sigma2, n)?;
        state.g = g_step(&state.f, x, y, h, sigma2, n)?;
        let after = objective(&state.g, &state.f, x, y, h, sigma2, n)?;
        state.g_step_history.push((before, after));

        state.f = f_step(&state.g, x, y, h, &state.z, &state.u, cfg.rho, n, cfg.f_solver)?;
        state.z = z_step(&(&state.f + &state.u), cfg.p_t);
        state.u = u_step(&state.u, &state.f, &state.z)?;

        let obj = objective(&state.g, &state.f, x, y, h, sigma2, n)?;
        if !obj.is_finite() {
            return Err(Error::Numerical(format!("ADMM objective became {obj}")));
        }
        state.objective_history.push(obj);
    }

    let f = z_step(&state.f, cfg.p_t);
    let g = g_step(&f, x, y, h, sigma2, n)?;
    let eq = LinearEqualizer { f, g, whitener: Whitener::identity(x.nrows()), p_t: cfg.p_t };
    Ok((eq, state))
}

/// `‖F - Z‖_F / max(1, ‖F‖_F)`.
pub fn primal_residual(state: &AdmmState) -> f64 {
    (&state.f - &state.z).norm() / state.f.norm().max(1.0)
}

/// How the training channel relates to the channel used at deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKnowledge {
    #[default]
    Aware,
    /// Train against a truncated identity in place of `H`.
    Unaware,
}

/// The matrix the optimizer sees during training.
pub fn training_channel(ch: &MimoChannel, knowledge: ChannelKnowledge) -> CMat {
    match knowledge {
        ChannelKnowledge::Aware => ch.lift(),
        ChannelKnowledge::Unaware => eye_rect(ch.dims.rx_symbols(), ch.dims.tx_symbols()),
    }
}

/// Whitens the paired TX latents, then runs ADMM against the paired RX
/// latents.
pub fn train_linear(
    ds: &LatentDataset,
    ch: &MimoChannel,
    sigma2: f64,
    cfg: &AdmmConfig,
    whiten: Option<WhitenOptions>,
    knowledge: ChannelKnowledge,
    seed: u64,
) -> Result<(LinearEqualizer, AdmmState)> {
    let x_raw = pair_rows(&ds.tx)?;
    let y = pair_rows(&ds.rx)?;
    let whitener = match whiten {
        Some(opts) => crate::codec::fit_whitener(&x_raw, opts)?,
        None => Whitener::identity(x_raw.nrows()),
    };
    let x = whitener.apply_columns(&x_raw)?;
    let h = training_channel(ch, knowledge);
    let (mut eq, state) = run_admm(&x, &y, &h, sigma2, cfg, seed)?;
    eq.whitener = whitener;
    Ok((eq, state))
}

impl LinearEqualizer {
    pub fn dims_check(&self, h: &CMat) -> Result<()> {
        if h.ncols() != self.f.nrows() || h.nrows() != self.g.ncols() {
            return Err(Error::dim(
                "linear equalizer vs channel",
                format!("{}x{}", self.g.ncols(), self.f.nrows()),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        Ok(())
    }

    /// Transmitted symbols `F · whiten(x)` for the columns of `x`.
    pub fn precode(&self, x: &CMat) -> Result<CMat> {
        Ok(&self.f * self.whitener.apply_columns(x)?)
    }

    /// `G (H F x + v)` on complex columns.
    pub fn forward(&self, x: &CMat, h: &CMat, noise: &CMat) -> Result<CMat> {
        self.dims_check(h)?;
        if noise.shape() != (h.nrows(), x.ncols()) {
            return Err(Error::dim("linear forward (noise)", format!("{}x{}", h.nrows(), x.ncols()), format!("{:?}", noise.shape())));
        }
        Ok(&self.g * (h * self.precode(x)? + noise))
    }

    /// End-to-end map on real latents stored as rows.
    pub fn apply_rows(&self, tx: &crate::linalg::RMat, h: &CMat, noise: &CMat) -> Result<crate::linalg::RMat> {
        Ok(unpair_columns(&self.forward(&pair_rows(tx)?, h, noise)?))
    }
}

/// `ŝ_R = unpair(G (H F whiten(pair(s_T)) + v))`.
pub fn apply_linear(eq: &LinearEqualizer, s_t: &[f64], h: &CMat, v: &CVec) -> Result<Vec<f64>> {
    let x = pair_to_complex(s_t)?;
    eq.dims_check(h)?;
    if v.len() != h.nrows() {
        return Err(Error::dim("apply_linear (noise)", h.nrows(), v.len()));
    }
    let x_bar = &eq.f * eq.whitener.apply(&x)?;
    let y = &eq.g * (h * x_bar + v);
    Ok(unpair_to_real(&y))
}

/// Dimensions implied by an equalizer, for serialization checks.
pub fn equalizer_dims(eq: &LinearEqualizer, k: usize) -> Result<ChannelDims> {
    let tx = eq.f.nrows();
    let rx = eq.g.ncols();
    if k == 0 || !tx.is_multiple_of(k) || !rx.is_multiple_of(k) {
        return Err(Error::dim("equalizer dims", format!("multiples of K={k}"), format!("KN_T={tx}, KN_R={rx}")));
    }
    ChannelDims::new(k, tx / k, rx / k)
}

#[cfg(test)]
mod tests;
