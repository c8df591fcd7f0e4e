use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::AdamW;
use super::train::TrainConfig;
use super::{param_specs, ModelConfig, ModelError};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FOPE";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue training bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSnapshot {
    pub config: ModelConfig,
    pub train: TrainConfig,
    pub step: usize,
    pub params: Vec<Matrix>,
    pub optimizer: Option<AdamW>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    train: TrainConfig,
    step: usize,
    optimizer: Option<OptimizerHeader>,
    coefficient_checksum: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: u64,
}

fn write_matrices(out: &mut Vec<u8>, ms: &[Matrix]) {
    for m in ms {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Layout: magic, version (u32), header JSON length (u64) and bytes, then the
/// parameters in declaration order as little-endian `f64`, then (if present)
/// the first and second optimiser moments in the same order.
pub fn encode_snapshot(s: &ModelSnapshot) -> Result<Vec<u8>, ModelError> {
    let checksum = s.config.position_encoding()?.coefficients().map(|c| c.checksum());
    let header = Header {
        model: s.config.clone(),
        train: s.train.clone(),
        step: s.step,
        optimizer: s.optimizer.as_ref().map(|o| OptimizerHeader {
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
            weight_decay: o.weight_decay,
            t: o.t,
        }),
        coefficient_checksum: checksum,
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    write_matrices(&mut out, &s.params);
    if let Some(o) = &s.optimizer {
        write_matrices(&mut out, &o.m);
        write_matrices(&mut out, &o.v);
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Checkpoint("file is truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn matrices(&mut self, shapes: &[(usize, usize)]) -> Result<Vec<Matrix>, ModelError> {
        shapes
            .iter()
            .map(|&(r, c)| {
                let raw = self.take(r * c * 8)?;
                let data = raw
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect();
                Ok(Matrix::new(r, c, data)?)
            })
            .collect()
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<ModelSnapshot, ModelError> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes")) as usize;
    let header: Header =
        serde_json::from_slice(cur.take(len)?).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    header.model.validate()?;
    let shapes: Vec<(usize, usize)> = param_specs(&header.model).iter().map(|s| (s.rows, s.cols)).collect();
    let params = cur.matrices(&shapes)?;
    let optimizer = match header.optimizer {
        Some(h) => Some(AdamW {
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
            weight_decay: h.weight_decay,
            t: h.t,
            m: cur.matrices(&shapes)?,
            v: cur.matrices(&shapes)?,
        }),
        None => None,
    };
    if cur.at != bytes.len() {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    let checksum = header.model.position_encoding()?.coefficients().map(|c| c.checksum());
    if checksum != header.coefficient_checksum {
        return Err(ModelError::Checkpoint("Fourier coefficients do not regenerate identically".into()));
    }
    Ok(ModelSnapshot { config: header.model, train: header.train, step: header.step, params, optimizer })
}

pub fn save_snapshot(s: &ModelSnapshot, path: &Path) -> Result<(), ModelError> {
    let bytes = encode_snapshot(s)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<ModelSnapshot, ModelError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}
