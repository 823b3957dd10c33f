//! Seeded synthetic latent pairs with a known TX/RX relationship.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{pair_rows, unpair_columns, ClassifierHead, LatentDataset};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, real_gaussian, RMat, RVec};
use crate::seed::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// TX latents are a complex-linear function of the paired RX latents.
    ComplexLinear,
    RealLinear,
    /// One random tanh layer followed by a linear readout.
    MlpNonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub cluster_spread: f64,
    pub map_kind: MapKind,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { d: 32, m: 64, n: 2000, classes: 10, cluster_spread: 0.3, map_kind: MapKind::ComplexLinear, seed: 0 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || !self.d.is_multiple_of(2) {
            return Err(Error::param("d", format!("must be positive and even, got {}", self.d)));
        }
        if self.m == 0 || !self.m.is_multiple_of(2) {
            return Err(Error::param("m", format!("must be positive and even, got {}", self.m)));
        }
        if self.n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::param("C", format!("need at least 2 classes, got {}", self.classes)));
        }
        if !(self.cluster_spread >= 0.0) || !self.cluster_spread.is_finite() {
            return Err(Error::param("cluster_spread", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Draws balanced labels, class centroids on the sphere of radius `√m` in `R^m`, RX latents
/// around them, and TX latents as a seeded map of the RX latents. The head
/// classifies by nearest centroid: `w_c = μ_c`, `b_c = -‖μ_c‖²/2`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LatentDataset> {
    spec.validate()?;
    let SyntheticSpec { d, m, n, classes, cluster_spread, map_kind, seed: base } = *spec;
    let mut rng = seed::rng_at(base, &[stream::DATA]);

    let mut centroids = real_gaussian(classes, m, 1.0, &mut rng);
    // equal norms keep the head's decision independent of the estimate's scale
    for mut row in centroids.row_iter_mut() {
        let r = row.norm();
        if r > 0.0 {
            row *= (m as f64).sqrt() / r;
        }
    }
    // balanced classes in shuffled order
    let mut labels: Vec<u32> = (0..n).map(|i| (i % classes) as u32).collect();
    labels.shuffle(&mut rng);
    let jitter = real_gaussian(n, m, cluster_spread, &mut rng);
    let rx = RMat::from_fn(n, m, |i, j| centroids[(labels[i] as usize, j)] + jitter[(i, j)]);

    let tx = match map_kind {
        MapKind::ComplexLinear => {
            let map = complex_gaussian(d / 2, m / 2, 1.0 / (m / 2) as f64, &mut rng);
            unpair_columns(&(map * pair_rows(&rx)?))
        }
        MapKind::RealLinear => {
            let map = real_gaussian(d, m, (1.0 / m as f64).sqrt(), &mut rng);
            (map * rx.transpose()).transpose()
        }
        MapKind::MlpNonlinear => {
            let hidden = d.max(m);
            let w1 = real_gaussian(hidden, m, (1.0 / m as f64).sqrt(), &mut rng);
            let b1 = real_gaussian(hidden, 1, 0.1, &mut rng);
            let w2 = real_gaussian(d, hidden, (1.0 / hidden as f64).sqrt(), &mut rng);
            let mut h = w1 * rx.transpose();
            for mut col in h.column_iter_mut() {
                col += &b1;
            }
            (w2 * h.map(f64::tanh)).transpose()
        }
    };

    let b = RVec::from_fn(classes, |c, _| -0.5 * centroids.row(c).norm_squared());
    let head = ClassifierHead { w: centroids, b };
    LatentDataset::new(tx, rx, labels, classes, Some(head))
}
