//! Real/complex latent conversion, pre-whitening, and the latent dataset.
//!
//! A real latent `s` of even length `L` becomes the complex vector
//! `x[i] = s[i] + j·s[i + L/2]`: the first half carries the real parts and the
//! second half the imaginary parts.

pub(crate) mod dataset;
mod synth;
mod whiten;

pub use dataset::{load_dataset, save_dataset, ClassifierHead, LatentDataset, Manifest};
pub use synth::{generate_synthetic, MapKind, SyntheticSpec};
pub use whiten::{fit_whitener, sample_covariance, WhitenOptions, Whitener, DEFAULT_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, RMat, C64};

/// Channel uses `k`, transmit antennas `n_t` and receive antennas `n_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDims {
    pub k: usize,
    pub n_t: usize,
    pub n_r: usize,
}

impl ChannelDims {
    pub fn new(k: usize, n_t: usize, n_r: usize) -> Result<Self> {
        let dims = ChannelDims { k, n_t, n_r };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_t == 0 || self.n_r == 0 {
            return Err(Error::param("dims", format!("K, N_T, N_R must all be >= 1, got {self:?}")));
        }
        Ok(())
    }

    /// Complex symbols sent per latent, `K·N_T`.
    pub fn tx_symbols(&self) -> usize {
        self.k * self.n_t
    }

    /// Complex symbols received per latent, `K·N_R`.
    pub fn rx_symbols(&self) -> usize {
        self.k * self.n_r
    }
}

pub fn pair_to_complex(s: &[f64]) -> Result<CVec> {
    if !s.len().is_multiple_of(2) {
        return Err(Error::dim("pair_to_complex", "even length", s.len()));
    }
    let h = s.len() / 2;
    Ok(CVec::from_fn(h, |i, _| C64::new(s[i], s[i + h])))
}

pub fn unpair_to_real(y: &CVec) -> Vec<f64> {
    let h = y.len();
    let mut out = vec![0.0; 2 * h];
    for (i, z) in y.iter().enumerate() {
        out[i] = z.re;
        out[i + h] = z.im;
    }
    out
}

/// Pairs every row of an `n x L` real matrix into a column of an
/// `(L/2) x n` complex matrix.
pub fn pair_rows(s: &RMat) -> Result<CMat> {
    let (n, l) = s.shape();
    if !l.is_multiple_of(2) {
        return Err(Error::dim("pair_rows", "even column count", l));
    }
    let h = l / 2;
    Ok(CMat::from_fn(h, n, |i, j| C64::new(s[(j, i)], s[(j, i + h)])))
}

/// Inverse of [`pair_rows`].
pub fn unpair_columns(y: &CMat) -> RMat {
    let (h, n) = y.shape();
    RMat::from_fn(n, 2 * h, |j, c| if c < h { y[(c, j)].re } else { y[(c - h, j)].im })
}

/// `ζ = K·N_T / (d/2)`.
pub fn compression_factor(dims: ChannelDims, d: usize) -> Result<f64> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::dim("compression_factor", "positive even d", d));
    }
    Ok(dims.tx_symbols() as f64 / (d / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pairing_examples() {
        let x = pair_to_complex(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x.as_slice(), &[C64::new(1.0, 3.0), C64::new(2.0, 4.0)]);
        assert_eq!(pair_to_complex(&[0.0, 0.0]).unwrap().as_slice(), &[C64::new(0.0, 0.0)]);
        assert_eq!(unpair_to_real(&x), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(pair_to_complex(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn pairing_exhaustive_small_grid() {
        let grid = [-1.5, 0.0, 2.0];
        for l in [2usize, 4, 6, 8] {
            let total = grid.len().pow(l as u32);
            for code in 0..total {
                let mut c = code;
                let s: Vec<f64> = (0..l)
                    .map(|_| {
                        let v = grid[c % grid.len()];
                        c /= grid.len();
                        v
                    })
                    .collect();
                assert_eq!(unpair_to_real(&pair_to_complex(&s).unwrap()), s);
            }
        }
    }

    #[test]
    fn matrix_pairing_matches_vector_pairing() {
        let s = RMat::from_fn(3, 6, |i, j| (i * 6 + j) as f64);
        let x = pair_rows(&s).unwrap();
        for r in 0..3 {
            let row: Vec<f64> = s.row(r).iter().copied().collect();
            let v = pair_to_complex(&row).unwrap();
            assert_eq!(x.column(r).clone_owned(), v);
        }
        assert_eq!(unpair_columns(&x), s);
    }

    #[test]
    fn compression_factor_examples() {
        let z = compression_factor(ChannelDims::new(1, 2, 2).unwrap(), 384).unwrap();
        assert!((z - 2.0 / 192.0).abs() < 1e-15);
        assert!((z - 0.0104).abs() < 1e-4);
        assert_eq!(compression_factor(ChannelDims::new(1, 192, 192).unwrap(), 384).unwrap(), 1.0);
        assert_eq!(compression_factor(ChannelDims::new(2, 6, 6).unwrap(), 384).unwrap(), 0.0625);
        assert!(compression_factor(ChannelDims { k: 1, n_t: 1, n_r: 1 }, 7).is_err());
        assert!(ChannelDims::new(0, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn pair_unpair_round_trip(half in prop::collection::vec(-1e6f64..1e6, 1..64), tail in -1e6f64..1e6) {
            let mut s = half.clone();
            s.extend(half.iter().map(|v| v * 0.5 + tail));
            prop_assert_eq!(unpair_to_real(&pair_to_complex(&s).unwrap()), s);
        }

        #[test]
        fn compression_monotone(k in 1usize..8, nt in 1usize..32, half_d in 1usize..200) {
            let d = 2 * half_d;
            let zeta = |k, n_t, d| compression_factor(ChannelDims { k, n_t, n_r: 1 }, d).unwrap();
            let base = zeta(k, nt, d);
            prop_assert!(zeta(k + 1, nt, d) > base);
            prop_assert!(zeta(k, nt + 1, d) > base);
            prop_assert!(zeta(k, nt, d + 2) < base);
        }
    }
}
