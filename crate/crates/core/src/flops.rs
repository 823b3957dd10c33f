//! Operation counts for the linear and neural equalizers.
//!
//! One complex multiply-accumulate costs 8 real operations. Sparse counts
//! are rounded to the nearest integer.

use serde::{Deserialize, Serialize};

use crate::codec::ChannelDims;
use crate::error::{Error, Result};
use crate::neural_eq::{Activation, ComplexMlp, NeuralPair};

pub const DEFAULT_ACTIVATION_COST: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub total: u64,
    pub per_layer: Vec<(String, u64)>,
    pub sparsity_used: f64,
    pub activation_cost_c: u64,
}

impl FlopsReport {
    fn from_layers(per_layer: Vec<(String, u64)>, sparsity_used: f64, activation_cost_c: u64) -> Self {
        let total = per_layer.iter().map(|(_, n)| n).sum();
        FlopsReport { total, per_layer, sparsity_used, activation_cost_c }
    }
}

fn check_sparsity(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::param("sparsity", format!("must lie in [0, 1], got {s}")));
    }
    Ok(())
}

/// Cost of `W x (+ b)` with `W` of size `a x b`.
///
/// Without bias the matrix is taken dense: `a(8b - 2)`. With bias the count is
/// `8(1 - s)ab`.
pub fn complex_matvec_flops(a: u64, b: u64, with_bias: bool, s: f64) -> Result<u64> {
    check_sparsity(s)?;
    if with_bias {
        Ok((8.0 * (1.0 - s) * (a * b) as f64).round() as u64)
    } else {
        Ok(a * (8 * b).saturating_sub(2))
    }
}

/// `4 K N_T d + (4 K N_R - 1) m - 2 K N_T`.
pub fn linear_model_flops(dims: ChannelDims, d: u64, m: u64) -> u64 {
    let tx = dims.tx_symbols() as u64;
    let rx = dims.rx_symbols() as u64;
    4 * tx * d + (4 * rx - 1) * m - 2 * tx
}

pub fn linear_flops_report(dims: ChannelDims, d: u64, m: u64) -> FlopsReport {
    let tx = dims.tx_symbols() as u64;
    let rx = dims.rx_symbols() as u64;
    let f = complex_matvec_flops(tx, d / 2, false, 0.0).expect("dense");
    let g = complex_matvec_flops(m / 2, rx, false, 0.0).expect("dense");
    FlopsReport::from_layers(vec![("precoder".into(), f), ("decoder".into(), g)], 0.0, 0)
}

/// Layer sizes of a precoder/decoder pair: input, hidden width, output and
/// hidden layer count for each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralShape {
    pub i_p: u64,
    pub h_p: u64,
    pub o_p: u64,
    pub l_p: u64,
    pub i_d: u64,
    pub h_d: u64,
    pub o_d: u64,
    pub l_d: u64,
}

impl NeuralShape {
    pub fn validate(&self) -> Result<()> {
        if self.l_p == 0 || self.l_d == 0 {
            return Err(Error::param("layers", "l_p and l_d must be >= 1"));
        }
        Ok(())
    }

    fn weights(&self) -> u64 {
        self.h_p * self.i_p
            + self.o_p * self.h_p
            + self.h_d * self.i_d
            + self.o_d * self.h_d
            + (self.l_p - 1) * self.h_p * self.h_p
            + (self.l_d - 1) * self.h_d * self.h_d
    }

    fn hidden_neurons(&self) -> u64 {
        self.l_p * self.h_p + self.l_d * self.h_d
    }

    /// `(out, in)` for each layer, precoder first.
    pub fn layer_sizes(&self) -> Vec<(u64, u64)> {
        let mut out = vec![(self.h_p, self.i_p)];
        out.extend(std::iter::repeat_n((self.h_p, self.h_p), (self.l_p - 1) as usize));
        out.push((self.o_p, self.h_p));
        out.push((self.h_d, self.i_d));
        out.extend(std::iter::repeat_n((self.h_d, self.h_d), (self.l_d - 1) as usize));
        out.push((self.o_d, self.h_d));
        out
    }

    /// Shape of a trained pair, if every hidden layer has the same width.
    pub fn of(nets: &NeuralPair) -> Result<Self> {
        let side = |net: &ComplexMlp| -> Result<(u64, u64, u64, u64)> {
            let dims = net.dims();
            if dims.len() < 3 {
                return Err(Error::Validation("flops shape needs at least one hidden layer per side".into()));
            }
            let hidden = &dims[1..dims.len() - 1];
            if hidden.iter().any(|&h| h != hidden[0]) {
                return Err(Error::Validation("flops shape needs equal hidden widths".into()));
            }
            Ok((dims[0] as u64, hidden[0] as u64, *dims.last().unwrap() as u64, hidden.len() as u64))
        };
        let (i_p, h_p, o_p, l_p) = side(&nets.precoder)?;
        let (i_d, h_d, o_d, l_d) = side(&nets.decoder)?;
        Ok(NeuralShape { i_p, h_p, o_p, l_p, i_d, h_d, o_d, l_d })
    }
}

/// Uniform-sparsity count `8(1-s) Σ weights + c (l_p h_p + l_d h_d)`.
pub fn neural_model_flops(shape: NeuralShape, s: f64, c: u64) -> Result<u64> {
    shape.validate()?;
    check_sparsity(s)?;
    let mac = (8.0 * (1.0 - s) * shape.weights() as f64).round() as u64;
    Ok(mac + c * shape.hidden_neurons())
}

pub fn neural_flops_report(shape: NeuralShape, s: f64, c: u64) -> Result<FlopsReport> {
    shape.validate()?;
    check_sparsity(s)?;
    let mut layers = Vec::new();
    for (i, (a, b)) in shape.layer_sizes().into_iter().enumerate() {
        layers.push((format!("layer{i}"), complex_matvec_flops(a, b, true, s)?));
    }
    layers.push(("activations".into(), c * shape.hidden_neurons()));
    Ok(FlopsReport::from_layers(layers, s, c))
}

/// Fraction of zero weights over all weight matrices of `net`.
pub fn measured_sparsity(net: &ComplexMlp) -> f64 {
    let total = net.weight_count();
    if total == 0 {
        return 0.0;
    }
    net.zero_weight_count() as f64 / total as f64
}

/// Per-layer `8 nnz` plus `c` per activated neuron, for non-uniform sparsity.
pub fn exact_neural_flops(nets: &NeuralPair, c: u64) -> FlopsReport {
    let mut layers = Vec::new();
    let mut zeros = 0;
    let mut total = 0;
    for (side, net) in [("precoder", &nets.precoder), ("decoder", &nets.decoder)] {
        for (i, l) in net.layers.iter().enumerate() {
            let nnz = l.w.iter().filter(|w| w.re != 0.0 || w.im != 0.0).count() as u64;
            zeros += l.w.len() as u64 - nnz;
            total += l.w.len() as u64;
            layers.push((format!("{side}.layer{i}"), 8 * nnz));
            if matches!(l.activation, Activation::PhaseAmplitude(_)) {
                layers.push((format!("{side}.act{i}"), c * l.outputs() as u64));
            }
        }
    }
    let s = if total == 0 { 0.0 } else { zeros as f64 / total as f64 };
    FlopsReport::from_layers(layers, s, c)
}
