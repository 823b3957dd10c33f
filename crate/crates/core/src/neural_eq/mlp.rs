//! Complex-valued multilayer perceptron with phase–amplitude activations and
//! hand-written backpropagation.
//!
//! Gradients are carried as `∂L/∂Re + j·∂L/∂Im` for every complex quantity.
//! With that convention a layer `z = W a + b` back-propagates as
//! `∇W = ∇z a^H`, `∇b = ∇z`, `∇a = W^H ∇z`, and a descent step is simply
//! `w ← w - η ∇w`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CMat, CVec, C64};

/// Function `α` applied to the modulus by the phase–amplitude activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    #[default]
    Tanh,
    Sigmoid,
    Identity,
}

impl Magnitude {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Magnitude::Tanh => r.tanh(),
            Magnitude::Sigmoid => 1.0 / (1.0 + (-r).exp()),
            Magnitude::Identity => r,
        }
    }

    pub fn derivative(self, r: f64) -> f64 {
        match self {
            Magnitude::Tanh => 1.0 - r.tanh().powi(2),
            Magnitude::Sigmoid => {
                let s = 1.0 / (1.0 + (-r).exp());
                s * (1.0 - s)
            }
            Magnitude::Identity => 1.0,
        }
    }
}

/// Moduli below this are treated as zero by the activation.
const TINY_MODULUS: f64 = 1e-300;

/// `φ(z) = α(|z|) e^{j arg z}`; at `z = 0` the phase is taken as 0.
pub fn phase_amplitude(z: C64, alpha: Magnitude) -> C64 {
    let r = z.norm();
    if r < TINY_MODULUS {
        return C64::new(alpha.eval(0.0), 0.0);
    }
    z * (alpha.eval(r) / r)
}

pub fn phase_amplitude_activation(z: &CVec, alpha: Magnitude) -> CVec {
    z.map(|v| phase_amplitude(v, alpha))
}

/// Gradient w.r.t. `z` given the gradient `g` w.r.t. `φ(z)`.
///
/// Writing `φ(z) = s(r) z` with `s = α(r)/r`:
/// `∇z = s g + Re(conj(g) z) s'(r)/r · z`.
fn phase_amplitude_backward(z: C64, g: C64, alpha: Magnitude) -> C64 {
    let r = z.norm();
    if r < 1e-12 {
        // φ is ≈ α'(0) z near the origin when α(0) = 0, and locally constant otherwise
        return if alpha.eval(0.0) == 0.0 { g * alpha.derivative(0.0) } else { C64::new(0.0, 0.0) };
    }
    let a = alpha.eval(r);
    let s = a / r;
    let ds_over_r = (alpha.derivative(r) * r - a) / (r * r * r);
    let c = (g.conj() * z).re;
    g * s + z * (c * ds_over_r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    PhaseAmplitude(Magnitude),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: CMat,
    pub b: CVec,
    /// `true` for active weights; pruned weights are exactly zero.
    pub mask: DMatrix<bool>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMlp {
    pub layers: Vec<Layer>,
}

/// Per-layer gradients, congruent to the weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<CMat>,
    pub b: Vec<CVec>,
}

impl Gradients {
    pub fn zeros_like(net: &ComplexMlp) -> Self {
        Gradients {
            w: net.layers.iter().map(|l| CMat::zeros(l.outputs(), l.inputs())).collect(),
            b: net.layers.iter().map(|l| CVec::zeros(l.outputs())).collect(),
        }
    }
}

/// Intermediate values of a batched forward pass.
pub(crate) struct Trace {
    /// Input to each layer.
    inputs: Vec<CMat>,
    /// Pre-activation of each layer.
    pre: Vec<CMat>,
}

impl ComplexMlp {
    /// Layer widths `dims[0] → dims[1] → … → dims.last()`. Every layer but
    /// the last uses the phase–amplitude activation. Weights start as
    /// CN(0, 1/fan_in), biases at zero.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], alpha: Magnitude, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::param("layer dims", format!("need >= 2 positive widths, got {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let last = i + 2 == dims.len();
                Layer {
                    w: complex_gaussian(w[1], w[0], 1.0 / w[0] as f64, rng),
                    b: CVec::zeros(w[1]),
                    mask: DMatrix::from_element(w[1], w[0], true),
                    activation: if last { Activation::None } else { Activation::PhaseAmplitude(alpha) },
                }
            })
            .collect();
        Ok(ComplexMlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Layer::outputs));
        d
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Validation("network has no layers".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Validation(format!("layer {i} outputs {} but layer {} takes {}", pair[0].outputs(), i + 1, pair[1].inputs())));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.b.len() != l.outputs() || l.mask.shape() != l.w.shape() {
                return Err(Error::Validation(format!("layer {i} has inconsistent bias or mask shape")));
            }
            if l.w.iter().zip(l.mask.iter()).any(|(w, &m)| !m && *w != C64::new(0.0, 0.0)) {
                return Err(Error::Validation(format!("layer {i} has a nonzero pruned weight")));
            }
        }
        Ok(())
    }

    /// Applies the network to every column of `x`.
    pub fn forward(&self, x: &CMat) -> Result<CMat> {
        Ok(self.forward_traced(x)?.0)
    }

    pub(crate) fn forward_traced(&self, x: &CMat) -> Result<(CMat, Trace)> {
        if x.nrows() != self.input_dim() {
            return Err(Error::dim("mlp forward", self.input_dim(), x.nrows()));
        }
        let mut trace = Trace { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::with_capacity(self.layers.len()) };
        let mut a = x.clone();
        for l in &self.layers {
            let mut z = &l.w * &a;
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            let out = match l.activation {
                Activation::PhaseAmplitude(alpha) => z.map(|v| phase_amplitude(v, alpha)),
                Activation::None => z.clone(),
            };
            trace.inputs.push(a);
            trace.pre.push(z);
            a = out;
        }
        Ok((a, trace))
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// w.r.t. the network input. Pruned weights receive zero gradient.
    pub(crate) fn backward(&self, trace: &Trace, grad_out: CMat, grads: &mut Gradients) -> CMat {
        let mut g = grad_out;
        for (i, l) in self.layers.iter().enumerate().rev() {
            if let Activation::PhaseAmplitude(alpha) = l.activation {
                g = g.zip_map(&trace.pre[i], |gv, zv| phase_amplitude_backward(zv, gv, alpha));
            }
            let gw = &g * trace.inputs[i].adjoint();
            grads.w[i] += gw.zip_map(&l.mask, |v, m| if m { v } else { C64::new(0.0, 0.0) });
            grads.b[i] += g.column_sum();
            g = l.w.adjoint() * g;
        }
        g
    }

    /// Number of weight entries (biases excluded).
    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len()).sum()
    }

    pub fn zero_weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.iter().filter(|w| **w == C64::new(0.0, 0.0)).count()).sum()
    }

    /// `(layer, row, col)` of every pruned weight.
    pub fn pruned_set(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (li, l) in self.layers.iter().enumerate() {
            for j in 0..l.mask.ncols() {
                for i in 0..l.mask.nrows() {
                    if !l.mask[(i, j)] {
                        out.push((li, i, j));
                    }
                }
            }
        }
        out
    }

    /// `w ← w - η ∇w` on active weights; biases always update.
    pub fn descend(&mut self, grads: &Gradients, eta: f64) {
        let step = C64::new(eta, 0.0);
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.w -= &grads.w[i] * step;
            for (w, &m) in l.w.iter_mut().zip(l.mask.iter()) {
                if !m {
                    *w = C64::new(0.0, 0.0);
                }
            }
            l.b -= &grads.b[i] * step;
        }
    }

    /// Hard thresholding: weights with `|w| ≤ tau` are zeroed and pruned for
    /// good. `tau = 0` leaves the network untouched.
    pub fn hard_threshold(&mut self, tau: f64) {
        if !(tau > 0.0) {
            return;
        }
        for l in &mut self.layers {
            for (w, m) in l.w.iter_mut().zip(l.mask.iter_mut()) {
                if w.norm() <= tau {
                    *w = C64::new(0.0, 0.0);
                    *m = false;
                }
            }
        }
    }
}

/// `x̄ · sqrt(p_t) / ‖x̄‖`, or zero when `‖x̄‖ ≤ 1e-12`.
pub fn normalize_power(x_bar: &CVec, p_t: f64) -> CVec {
    let r = x_bar.norm();
    if r <= EPS_NORM {
        return CVec::zeros(x_bar.len());
    }
    x_bar * C64::new(p_t.sqrt() / r, 0.0)
}

pub const EPS_NORM: f64 = 1e-12;

pub(crate) fn normalize_columns(x: &CMat, p_t: f64) -> CMat {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let r = col.norm();
        if r <= EPS_NORM {
            col.fill(C64::new(0.0, 0.0));
        } else {
            col *= C64::new(p_t.sqrt() / r, 0.0);
        }
    }
    out
}

/// Backward of [`normalize_columns`]: `∇x = (c/r) g - (c/r³) Re(g^H x) x`.
pub(crate) fn normalize_columns_backward(x: &CMat, g: &CMat, p_t: f64) -> CMat {
    let c = p_t.sqrt();
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let xc = x.column(j);
        let r = xc.norm();
        if r <= EPS_NORM {
            continue;
        }
        let gc = g.column(j);
        let proj = gc.dotc(&xc).re;
        let col = gc * C64::new(c / r, 0.0) - xc * C64::new(c * proj / (r * r * r), 0.0);
        out.set_column(j, &col);
    }
    out
}
