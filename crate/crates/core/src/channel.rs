//! Flat Rayleigh fading MIMO channel, constant over `K` uses, with additive
//! circularly-symmetric Gaussian receiver noise.

use serde::{Deserialize, Serialize};

use crate::codec::ChannelDims;
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, kron_identity, CMat, CVec};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    /// Per-use channel, `N_R x N_T`.
    pub h_bar: CMat,
    pub dims: ChannelDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSpec {
    pub snr_db: f64,
    pub p_t: f64,
}

impl SnrSpec {
    pub fn new(snr_db: f64, p_t: f64) -> Result<Self> {
        if !(p_t > 0.0) || !p_t.is_finite() {
            return Err(Error::param("p_t", format!("power budget must be > 0, got {p_t}")));
        }
        Ok(SnrSpec { snr_db, p_t })
    }

    pub fn linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// `σ_v² = P_T · 10^(-SNR_dB/10)`: per-receive-entry complex noise variance.
pub fn sigma2_from_snr(spec: SnrSpec) -> f64 {
    spec.p_t * 10f64.powf(-spec.snr_db / 10.0)
}

/// I.i.d. CN(0, 1) entries, deterministic in `seed`.
pub fn sample_channel(dims: ChannelDims, seed: u64) -> MimoChannel {
    let mut rng = seed::rng_at(seed, &[stream::CHANNEL]);
    MimoChannel { h_bar: complex_gaussian(dims.n_r, dims.n_t, 1.0, &mut rng), dims }
}

impl MimoChannel {
    pub fn from_matrix(h_bar: CMat, k: usize) -> Result<Self> {
        let dims = ChannelDims::new(k, h_bar.ncols(), h_bar.nrows())?;
        if !h_bar.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numerical("channel matrix has non-finite entries".into()));
        }
        Ok(MimoChannel { h_bar, dims })
    }

    /// `I_K ⊗ H̄`, shape `K·N_R x K·N_T`.
    pub fn lift(&self) -> CMat {
        kron_identity(self.dims.k, &self.h_bar)
    }
}

pub fn lift_channel(ch: &MimoChannel) -> CMat {
    ch.lift()
}

/// `H x̄ + v`.
pub fn transmit(h: &CMat, x_bar: &CVec, noise: &CVec) -> Result<CVec> {
    if h.ncols() != x_bar.len() {
        return Err(Error::dim("transmit (x_bar)", h.ncols(), x_bar.len()));
    }
    if h.nrows() != noise.len() {
        return Err(Error::dim("transmit (noise)", h.nrows(), noise.len()));
    }
    Ok(h * x_bar + noise)
}

/// `len` i.i.d. CN(0, sigma2) samples.
pub fn sample_noise(len: usize, sigma2: f64, seed: u64) -> Result<CVec> {
    if !(sigma2 >= 0.0) {
        return Err(Error::param("sigma2", format!("must be >= 0, got {sigma2}")));
    }
    let mut rng = seed::rng_at(seed, &[stream::NOISE]);
    Ok(noise_from(&mut rng, len, sigma2))
}

pub(crate) fn noise_from<R: rand::Rng + ?Sized>(rng: &mut R, len: usize, sigma2: f64) -> CVec {
    let m = complex_gaussian(len, 1, sigma2, rng);
    CVec::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn channel_is_deterministic_and_unit_variance() {
        let dims = ChannelDims::new(1, 4, 3).unwrap();
        assert_eq!(sample_channel(dims, 5), sample_channel(dims, 5));
        assert_ne!(sample_channel(dims, 5), sample_channel(dims, 6));

        let big = ChannelDims::new(1, 1000, 100).unwrap();
        let h = sample_channel(big, 1).h_bar;
        let n = h.len() as f64;
        let mean: C64 = h.iter().sum::<C64>() / n;
        let var = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let var_re = h.iter().map(|z| z.re * z.re).sum::<f64>() / n;
        let var_im = h.iter().map(|z| z.im * z.im).sum::<f64>() / n;
        assert!(mean.norm() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        assert!((var_re - 0.5).abs() < 0.01 && (var_im - 0.5).abs() < 0.01);
    }

    #[test]
    fn lifting() {
        let h = CMat::from_element(1, 1, C64::new(0.3, -2.0));
        let ch = MimoChannel::from_matrix(h.clone(), 1).unwrap();
        assert_eq!(ch.lift(), h);
        let ch2 = MimoChannel::from_matrix(h.clone(), 2).unwrap();
        let l = ch2.lift();
        assert_eq!(l[(0, 0)], h[(0, 0)]);
        assert_eq!(l[(1, 1)], h[(0, 0)]);
        assert_eq!(l[(0, 1)], C64::new(0.0, 0.0));
        assert_eq!(l[(1, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn lifted_apply_equals_blockwise_apply() {
        let dims = ChannelDims::new(3, 2, 4).unwrap();
        let ch = sample_channel(dims, 8);
        let x = sample_noise(6, 1.0, 2).unwrap();
        let y = ch.lift() * &x;
        for b in 0..3 {
            let xb = x.rows(b * 2, 2).into_owned();
            let yb = &ch.h_bar * xb;
            assert!((y.rows(b * 4, 4) - yb).norm() < 1e-12);
        }
    }

    #[test]
    fn snr_conversion() {
        assert!((sigma2_from_snr(SnrSpec::new(20.0, 1.0).unwrap()) - 0.01).abs() < 1e-15);
        assert_eq!(sigma2_from_snr(SnrSpec::new(0.0, 1.0).unwrap()), 1.0);
        assert!((sigma2_from_snr(SnrSpec::new(10.0, 4.0).unwrap()) - 0.4).abs() < 1e-15);
        assert!(SnrSpec::new(10.0, 0.0).is_err());
    }

    #[test]
    fn transmit_cases() {
        let x = sample_noise(3, 1.0, 1).unwrap();
        let zero = CVec::zeros(3);
        assert_eq!(transmit(&CMat::identity(3, 3), &x, &zero).unwrap(), x);
        let v = sample_noise(2, 1.0, 2).unwrap();
        let h = CMat::from_element(2, 3, C64::new(1.0, 1.0));
        assert_eq!(transmit(&h, &zero, &v).unwrap(), v);
        // dense matvec oracle
        let out = transmit(&h, &x, &v).unwrap();
        for i in 0..2 {
            let mut acc = v[i];
            for j in 0..3 {
                acc += h[(i, j)] * x[j];
            }
            assert!((out[i] - acc).norm() < 1e-12);
        }
        assert!(transmit(&h, &CVec::zeros(2), &v).is_err());
        assert!(transmit(&h, &x, &CVec::zeros(3)).is_err());
    }

    #[test]
    fn noise_statistics() {
        assert_eq!(sample_noise(5, 0.0, 1).unwrap(), CVec::zeros(5));
        assert_eq!(sample_noise(5, 0.3, 1).unwrap(), sample_noise(5, 0.3, 1).unwrap());
        let v = sample_noise(100_000, 0.25, 77).unwrap();
        let var = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.02, "var {var}");
        assert!(sample_noise(3, -1.0, 1).is_err());
    }
}
