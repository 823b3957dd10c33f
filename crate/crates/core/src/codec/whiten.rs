use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

pub const DEFAULT_EPS: f64 = 1e-8;

/// Affine map `x ↦ T (x - μ)` that brings the fitting set to identity sample
/// covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitener {
    pub mean: CVec,
    pub transform: CMat,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitenOptions {
    pub eps: f64,
    /// Remove the sample mean before estimating the covariance. Without it
    /// the transform whitens the second-moment matrix `E[x x^H]` and stays
    /// purely linear.
    pub center: bool,
}

impl Default for WhitenOptions {
    fn default() -> Self {
        WhitenOptions { eps: DEFAULT_EPS, center: true }
    }
}

impl Whitener {
    pub fn identity(dim: usize) -> Self {
        Whitener {
            mean: CVec::zeros(dim),
            transform: CMat::identity(dim, dim),
            eps: DEFAULT_EPS,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &CVec) -> Result<CVec> {
        if x.len() != self.dim() {
            return Err(Error::dim("apply_whitener", self.dim(), x.len()));
        }
        Ok(&self.transform * (x - &self.mean))
    }

    /// Whitens every column of a `(d/2) x n` matrix.
    pub fn apply_columns(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim() {
            return Err(Error::dim("apply_whitener", self.dim(), x.nrows()));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(&self.transform * centered)
    }
}

/// Sample covariance `(1/n) Σ (x_i - μ)(x_i - μ)^H` of the columns of `x`.
pub fn sample_covariance(x: &CMat, mean: &CVec) -> CMat {
    let n = x.ncols() as f64;
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= mean;
    }
    (&centered * centered.adjoint()) / C64::new(n, 0.0)
}

/// Fits `T = C^{-1/2}` from the Hermitian eigendecomposition of the sample
/// covariance, with eigenvalues floored at `opts.eps`.
pub fn fit_whitener(x: &CMat, opts: WhitenOptions) -> Result<Whitener> {
    let (dim, n) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!("whitening needs at least 2 samples, got {n}")));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::param("eps", "must be > 0"));
    }
    let mean = if opts.center {
        x.column_mean()
    } else {
        CVec::zeros(dim)
    };
    let cov = sample_covariance(x, &mean);
    let eig = SymmetricEigen::new(cov);
    let inv_sqrt = eig.eigenvalues.map(|l| C64::new(1.0 / l.max(opts.eps).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    let transform = v * CMat::from_diagonal(&inv_sqrt) * v.adjoint();
    if !transform.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical("non-finite whitening transform".into()));
    }
    Ok(Whitener { mean, transform, eps: opts.eps })
}
