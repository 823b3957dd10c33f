//! Model directories: a `model.json` manifest next to complex blobs stored as
//! interleaved (re, im) little-endian f32, row-major.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::MimoChannel;
use crate::codec::dataset::{format_err, io_err, read_f32, write_file};
use crate::codec::{ChannelDims, Whitener};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::linear_eq::LinearEqualizer;
use crate::neural_eq::{Activation, ComplexMlp, Layer, NeuralEqualizer, NeuralPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Neural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub kind: ModelKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub d: usize,
    pub m: usize,
    pub p_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precoder_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_dims: Option<Vec<usize>>,
    /// One entry per layer, precoder layers first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<Vec<Activation>>,
}

impl ModelManifest {
    pub fn dims(&self) -> Result<ChannelDims> {
        ChannelDims::new(self.k, self.n_t, self.n_r)
    }
}

#[derive(Debug, Clone)]
pub enum SavedModel {
    Linear { eq: LinearEqualizer, channel: MimoChannel, manifest: ModelManifest },
    Neural { eq: NeuralEqualizer, channel: MimoChannel, manifest: ModelManifest },
}

fn complex_bytes(m: &CMat) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.len() * 8);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.extend((z.re as f32).to_le_bytes());
            out.extend((z.im as f32).to_le_bytes());
        }
    }
    out
}

fn read_complex(path: &Path, rows: usize, cols: usize) -> Result<CMat> {
    let raw = read_f32(path, 2 * rows * cols)?;
    Ok(CMat::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        C64::new(raw[k], raw[k + 1])
    }))
}

fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

fn save_common(dir: &Path, manifest: &ModelManifest, whitener: &Whitener, channel: &MimoChannel) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut w = complex_bytes(&column(&whitener.mean).transpose());
    w.extend(complex_bytes(&whitener.transform));
    write_file(&dir.join("whitener.c64"), &w)?;
    write_file(&dir.join("channel.c64"), &complex_bytes(&channel.h_bar))?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_file(&dir.join("model.json"), json.as_bytes())
}

pub fn save_linear(dir: impl AsRef<Path>, eq: &LinearEqualizer, channel: &MimoChannel) -> Result<()> {
    let dir = dir.as_ref();
    let dims = channel.dims;
    eq.dims_check(&channel.lift())?;
    let manifest = ModelManifest {
        kind: ModelKind::Linear,
        k: dims.k,
        n_t: dims.n_t,
        n_r: dims.n_r,
        d: 2 * eq.f.ncols(),
        m: 2 * eq.g.nrows(),
        p_t: eq.p_t,
        precoder_dims: None,
        decoder_dims: None,
        activations: None,
    };
    save_common(dir, &manifest, &eq.whitener, channel)?;
    write_file(&dir.join("f.c64"), &complex_bytes(&eq.f))?;
    write_file(&dir.join("g.c64"), &complex_bytes(&eq.g))
}

pub fn save_neural(dir: impl AsRef<Path>, eq: &NeuralEqualizer, channel: &MimoChannel) -> Result<()> {
    let dir = dir.as_ref();
    let dims = channel.dims;
    let nets = &eq.nets;
    let layers: Vec<&Layer> = nets.precoder.layers.iter().chain(&nets.decoder.layers).collect();
    let manifest = ModelManifest {
        kind: ModelKind::Neural,
        k: dims.k,
        n_t: dims.n_t,
        n_r: dims.n_r,
        d: 2 * nets.precoder.input_dim(),
        m: 2 * nets.decoder.output_dim(),
        p_t: nets.p_t,
        precoder_dims: Some(nets.precoder.dims()),
        decoder_dims: Some(nets.decoder.dims()),
        activations: Some(layers.iter().map(|l| l.activation).collect()),
    };
    save_common(dir, &manifest, &eq.whitener, channel)?;
    for (i, l) in layers.iter().enumerate() {
        write_file(&dir.join(format!("w{i}.c64")), &complex_bytes(&l.w))?;
        write_file(&dir.join(format!("b{i}.c64")), &complex_bytes(&column(&l.b)))?;
        let mask: Vec<u8> = (0..l.mask.nrows())
            .flat_map(|r| (0..l.mask.ncols()).map(move |c| (r, c)))
            .map(|rc| u8::from(l.mask[rc]))
            .collect();
        write_file(&dir.join(format!("mask{i}.u8")), &mask)?;
    }
    Ok(())
}

fn load_mlp(dir: &Path, widths: &[usize], acts: &[Activation], offset: usize) -> Result<ComplexMlp> {
    let mut layers = Vec::new();
    for (j, w) in widths.windows(2).enumerate() {
        let i = offset + j;
        let (rows, cols) = (w[1], w[0]);
        let weights = read_complex(&dir.join(format!("w{i}.c64")), rows, cols)?;
        let b = read_complex(&dir.join(format!("b{i}.c64")), rows, 1)?.column(0).into_owned();
        let mask_path = dir.join(format!("mask{i}.u8"));
        let raw = fs::read(&mask_path).map_err(io_err(&mask_path))?;
        if raw.len() != rows * cols || raw.iter().any(|&v| v > 1) {
            return Err(format_err(&mask_path, format!("expected {} bytes of 0/1", rows * cols)));
        }
        let mask = DMatrix::from_fn(rows, cols, |r, c| raw[r * cols + c] == 1);
        layers.push(Layer { w: weights, b, mask, activation: acts[i] });
    }
    let net = ComplexMlp { layers };
    net.validate()?;
    Ok(net)
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<ModelManifest> {
    let path = dir.as_ref().join("model.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| format_err(&path, e.to_string()))
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<SavedModel> {
    let dir = dir.as_ref();
    let man = load_manifest(dir)?;
    let path = dir.join("model.json");
    let dims = man.dims()?;
    if man.d == 0 || man.d % 2 != 0 || man.m == 0 || man.m % 2 != 0 {
        return Err(format_err(&path, format!("d and m must be positive and even, got d={}, m={}", man.d, man.m)));
    }
    let (hd, hm) = (man.d / 2, man.m / 2);
    let wraw = read_complex(&dir.join("whitener.c64"), hd + 1, hd)?;
    let whitener = Whitener {
        mean: wraw.row(0).transpose(),
        transform: wraw.rows(1, hd).into_owned(),
        eps: crate::codec::DEFAULT_EPS,
    };
    let channel = MimoChannel::from_matrix(read_complex(&dir.join("channel.c64"), dims.n_r, dims.n_t)?, dims.k)?;
    match man.kind {
        ModelKind::Linear => {
            let f = read_complex(&dir.join("f.c64"), dims.tx_symbols(), hd)?;
            let g = read_complex(&dir.join("g.c64"), hm, dims.rx_symbols())?;
            let eq = LinearEqualizer { f, g, whitener, p_t: man.p_t };
            Ok(SavedModel::Linear { eq, channel, manifest: man })
        }
        ModelKind::Neural => {
            let (Some(pd), Some(dd), Some(acts)) = (&man.precoder_dims, &man.decoder_dims, &man.activations) else {
                return Err(format_err(&path, "neural model needs precoder_dims, decoder_dims and activations"));
            };
            let n_layers = pd.len().saturating_sub(1) + dd.len().saturating_sub(1);
            if pd.len() < 2 || dd.len() < 2 || acts.len() != n_layers {
                return Err(format_err(&path, "layer dims and activations disagree"));
            }
            if pd[0] != hd || *pd.last().unwrap() != dims.tx_symbols() || dd[0] != dims.rx_symbols() || *dd.last().unwrap() != hm {
                return Err(Error::dim("neural model", "d/2 → … → KN_T and KN_R → … → m/2", format!("{pd:?} / {dd:?}")));
            }
            let precoder = load_mlp(dir, pd, acts, 0)?;
            let decoder = load_mlp(dir, dd, acts, pd.len() - 1)?;
            let eq = NeuralEqualizer { nets: NeuralPair { precoder, decoder, p_t: man.p_t }, whitener };
            Ok(SavedModel::Neural { eq, channel, manifest: man })
        }
    }
}
