use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

/// Linear readout standing in for the receiver's downstream classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    /// `C x m`
    pub w: RMat,
    pub b: RVec,
}

impl ClassifierHead {
    pub fn classes(&self) -> usize {
        self.w.nrows()
    }

    /// Index of the largest logit, lowest index on ties.
    pub fn predict(&self, s: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for c in 0..self.w.nrows() {
            let logit: f64 = self.w.row(c).iter().zip(s).map(|(w, x)| w * x).sum::<f64>() + self.b[c];
            if logit > best_val {
                best_val = logit;
                best = c;
            }
        }
        best
    }
}

/// Paired TX/RX latents (the semantic pilots) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDataset {
    /// `n x d`
    pub tx: RMat,
    /// `n x m`
    pub rx: RMat,
    pub labels: Vec<u32>,
    pub classes: usize,
    pub head: Option<ClassifierHead>,
}

impl LatentDataset {
    pub fn new(tx: RMat, rx: RMat, labels: Vec<u32>, classes: usize, head: Option<ClassifierHead>) -> Result<Self> {
        let ds = LatentDataset { tx, rx, labels, classes, head };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.tx.nrows()
    }

    pub fn d(&self) -> usize {
        self.tx.ncols()
    }

    pub fn m(&self) -> usize {
        self.rx.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d, m) = (self.n(), self.d(), self.m());
        if d == 0 || d % 2 != 0 || m == 0 || m % 2 != 0 {
            return Err(Error::Validation(format!("d and m must be positive and even, got d={d}, m={m}")));
        }
        if self.rx.nrows() != n || self.labels.len() != n {
            return Err(Error::Validation(format!(
                "row counts differ: tx={n}, rx={}, labels={}",
                self.rx.nrows(),
                self.labels.len()
            )));
        }
        if self.classes == 0 {
            return Err(Error::Validation("class count must be positive".into()));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l as usize >= self.classes) {
            return Err(Error::Validation(format!("label {bad} out of range for C={}", self.classes)));
        }
        if let Some(h) = &self.head {
            if h.w.ncols() != m || h.w.nrows() != self.classes || h.b.len() != self.classes {
                return Err(Error::Validation(format!(
                    "head shape {}x{} (+{}) does not match C={} m={m}",
                    h.w.nrows(),
                    h.w.ncols(),
                    h.b.len(),
                    self.classes
                )));
            }
        }
        Ok(())
    }

    /// Rows `[start, end)` as a new dataset sharing the head.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.n() {
            return Err(Error::dim("dataset slice", format!("range within 0..{}", self.n()), format!("{start}..{end}")));
        }
        let rows = end - start;
        Ok(LatentDataset {
            tx: self.tx.rows(start, rows).into_owned(),
            rx: self.rx.rows(start, rows).into_owned(),
            labels: self.labels[start..end].to_vec(),
            classes: self.classes,
            head: self.head.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFiles {
    pub tx: String,
    pub rx: String,
    pub labels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_w: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_b: Option<String>,
}

/// `manifest.json` of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub dtype: String,
    pub files: ManifestFiles,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

pub(crate) fn f32_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

fn row_major(m: &RMat) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| m.row(i).iter().copied().collect::<Vec<_>>())
}

pub(crate) fn read_f32(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != expected * 4 {
        return Err(format_err(path, format!("expected {} bytes ({expected} f32), found {}", expected * 4, bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn save_dataset(ds: &LatentDataset, dir: impl AsRef<Path>) -> Result<()> {
    ds.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = Manifest {
        version: 1,
        n: ds.n(),
        d: ds.d(),
        m: ds.m(),
        classes: ds.classes,
        dtype: "f32le".into(),
        files: ManifestFiles {
            tx: "tx.f32".into(),
            rx: "rx.f32".into(),
            labels: "labels.i32".into(),
            head_w: ds.head.as_ref().map(|_| "head_w.f32".into()),
            head_b: ds.head.as_ref().map(|_| "head_b.f32".into()),
        },
    };
    write_file(&dir.join("tx.f32"), &f32_bytes(row_major(&ds.tx)))?;
    write_file(&dir.join("rx.f32"), &f32_bytes(row_major(&ds.rx)))?;
    let labels: Vec<u8> = ds.labels.iter().flat_map(|&l| (l as i32).to_le_bytes()).collect();
    write_file(&dir.join("labels.i32"), &labels)?;
    if let Some(h) = &ds.head {
        write_file(&dir.join("head_w.f32"), &f32_bytes(row_major(&h.w)))?;
        write_file(&dir.join("head_b.f32"), &f32_bytes(h.b.iter().copied()))?;
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join("manifest.json"), json.as_bytes())
}

fn resolve(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<LatentDataset> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let man: Manifest = serde_json::from_str(&text).map_err(|e| format_err(&manifest_path, e.to_string()))?;
    if man.version != 1 {
        return Err(format_err(&manifest_path, format!("unsupported version {}", man.version)));
    }
    if man.dtype != "f32le" {
        return Err(format_err(&manifest_path, format!("unsupported dtype {:?}", man.dtype)));
    }
    if man.files.head_w.is_some() != man.files.head_b.is_some() {
        return Err(format_err(&manifest_path, "head_w and head_b must be given together"));
    }
    let (n, d, m, c) = (man.n, man.d, man.m, man.classes);
    let tx = RMat::from_row_slice(n, d, &read_f32(&resolve(dir, &man.files.tx), n * d)?);
    let rx = RMat::from_row_slice(n, m, &read_f32(&resolve(dir, &man.files.rx), n * m)?);
    let label_path = resolve(dir, &man.files.labels);
    let raw = fs::read(&label_path).map_err(io_err(&label_path))?;
    if raw.len() != n * 4 {
        return Err(format_err(&label_path, format!("expected {} bytes ({n} i32), found {}", n * 4, raw.len())));
    }
    let mut labels = Vec::with_capacity(n);
    for chunk in raw.chunks_exact(4) {
        let l = i32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if l < 0 {
            return Err(Error::Validation(format!("negative label {l}")));
        }
        labels.push(l as u32);
    }
    let head = match (&man.files.head_w, &man.files.head_b) {
        (Some(w), Some(b)) => Some(ClassifierHead {
            w: RMat::from_row_slice(c, m, &read_f32(&resolve(dir, w), c * m)?),
            b: RVec::from_vec(read_f32(&resolve(dir, b), c)?),
        }),
        _ => None,
    };
    LatentDataset::new(tx, rx, labels, c, head)
}
