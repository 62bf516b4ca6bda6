//! Feed-forward push-value model and its binary file format.
//!
//! File layout, all little-endian:
//! `b"CPPRIOR\0"`, `u32` version, 32-byte feature hash, `u32` input count,
//! `u32` hidden units, `f64` eta, then the parameters as `f64` in the order
//! mean, scale, w1 (row-major, hidden x inputs), b1, w2, b2.

use std::path::Path;

use super::features::{feature_hash, FEATURE_COUNT};
use super::PriorError;

pub const MODEL_MAGIC: &[u8; 8] = b"CPPRIOR\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PriorModel {
    pub feature_hash: [u8; 32],
    pub hidden: usize,
    pub eta: f64,
    /// Input standardization: `(x - mean) * scale`.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl PriorModel {
    /// All-zero parameters; predicts `eta / 2` everywhere.
    pub fn zeros(hidden: usize, eta: f64) -> Self {
        Self {
            feature_hash: feature_hash(),
            hidden,
            eta,
            mean: vec![0.0; FEATURE_COUNT],
            scale: vec![1.0; FEATURE_COUNT],
            w1: vec![0.0; hidden * FEATURE_COUNT],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn check_features(&self) -> Result<(), PriorError> {
        if self.feature_hash != feature_hash() {
            return Err(PriorError::FeatureMismatch);
        }
        Ok(())
    }

    pub fn standardize(&self, x: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut z = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            z[i] = (x[i] - self.mean[i]) * self.scale[i];
        }
        z
    }

    /// Output for already standardized input.
    pub(crate) fn forward_std(&self, z: &[f64; FEATURE_COUNT]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let row = &self.w1[j * FEATURE_COUNT..(j + 1) * FEATURE_COUNT];
            let a: f64 = self.b1[j] + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>();
            out += self.w2[j] * a.tanh();
        }
        sigmoid(out) * self.eta
    }

    pub fn predict(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        self.forward_std(&self.standardize(x)).clamp(0.0, self.eta)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&self.feature_hash);
        out.extend_from_slice(&(FEATURE_COUNT as u32).to_le_bytes());
        out.extend_from_slice(&(self.hidden as u32).to_le_bytes());
        out.extend_from_slice(&self.eta.to_le_bytes());
        for v in self.mean.iter().chain(&self.scale).chain(&self.w1).chain(&self.b1).chain(&self.w2) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.b2.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PriorError> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(8)? != MODEL_MAGIC {
            return Err(PriorError::Model("not a model file".into()));
        }
        let version = rd.u32()?;
        if version != MODEL_VERSION {
            return Err(PriorError::ModelVersion(version));
        }
        let hash: [u8; 32] = rd.take(32)?.try_into().expect("32 bytes");
        if hash != feature_hash() {
            return Err(PriorError::FeatureMismatch);
        }
        let inputs = rd.u32()? as usize;
        if inputs != FEATURE_COUNT {
            return Err(PriorError::Model(format!("model has {inputs} inputs, expected {FEATURE_COUNT}")));
        }
        let hidden = rd.u32()? as usize;
        let eta = rd.f64()?;
        let mut vec = |k: usize| (0..k).map(|_| rd.f64()).collect::<Result<Vec<_>, _>>();
        let mean = vec(FEATURE_COUNT)?;
        let scale = vec(FEATURE_COUNT)?;
        let w1 = vec(hidden * FEATURE_COUNT)?;
        let b1 = vec(hidden)?;
        let w2 = vec(hidden)?;
        let b2 = rd.f64()?;
        if rd.pos != bytes.len() {
            return Err(PriorError::Model("trailing bytes after parameters".into()));
        }
        Ok(Self { feature_hash: hash, hidden, eta, mean, scale, w1, b1, w2, b2 })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], PriorError> {
        let end = self.pos + k;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| PriorError::Model("truncated model file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PriorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, PriorError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_model(model: &PriorModel, path: impl AsRef<Path>) -> Result<(), PriorError> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PriorModel, PriorError> {
    PriorModel::from_bytes(&std::fs::read(path)?)
}
