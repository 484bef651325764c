//! Binary checkpoint format.
//!
//! ```text
//! "PRNN"                      magic
//! u32 LE                      version, major << 16 | minor
//! u32 LE                      header length n  ┐
//! n bytes                     JSON header      │ body
//! f32 LE ...                  tensors          ┘
//! u32 LE                      CRC-32 of the body
//! ```
//!
//! Tensors follow [`Parameters::tensors`] order, row-major. The header
//! records model and training configs, the step, the batch RNG position,
//! and every tensor's shape.

use super::TrainingConfig;
use crate::lstm::{ModelConfig, Parameters};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PRNN";
pub const CHECKPOINT_VERSION: u32 = 1 << 16;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found_major}.{found_minor} incompatible with {expected_major}.x")]
    VersionMismatch {
        found_major: u16,
        found_minor: u16,
        expected_major: u16,
    },
    #[error("checkpoint checksum mismatch")]
    CorruptChecksum,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Position of a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn of(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn to_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub step: u64,
    pub rng: RngState,
    pub params: Parameters<f32>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    training: TrainingConfig,
    step: u64,
    rng_seed: String,
    rng_stream: u64,
    rng_word_pos: String,
    tensor_lengths: Vec<usize>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(s.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(out)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.params.tensors();
        let header = Header {
            model: self.model,
            training: self.training,
            step: self.step,
            rng_seed: hex(&self.rng.seed),
            rng_stream: self.rng.stream,
            rng_word_pos: self.rng.word_pos.to_string(),
            tensor_lengths: tensors.iter().map(|t| t.len()).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let n_floats: usize = tensors.iter().map(|t| t.len()).sum();
        let mut out = Vec::with_capacity(16 + json.len() + 4 * n_floats);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let body_start = out.len();
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in tensors {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[body_start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let malformed = |m: &str| CheckpointError::Malformed(m.to_string());
        if bytes.len() < 4 || bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < 16 {
            return Err(malformed("file too short"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let (major, minor) = ((version >> 16) as u16, (version & 0xffff) as u16);
        let expected_major = (CHECKPOINT_VERSION >> 16) as u16;
        if major != expected_major {
            return Err(CheckpointError::VersionMismatch {
                found_major: major,
                found_minor: minor,
                expected_major,
            });
        }
        let (body, crc) = bytes[8..].split_at(bytes.len() - 12);
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
            return Err(CheckpointError::CorruptChecksum);
        }
        let header_len = u32::from_le_bytes(body[..4].try_into().unwrap()) as usize;
        let json = body
            .get(4..4 + header_len)
            .ok_or_else(|| malformed("header overruns file"))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        header
            .model
            .validate()
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let mut params = Parameters::<f32>::zeros(header.model);
        let expected: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        if expected != header.tensor_lengths {
            return Err(malformed("tensor shapes do not match the model config"));
        }
        let data = &body[4 + header_len..];
        if data.len() != 4 * expected.iter().sum::<usize>() {
            return Err(malformed("tensor data length mismatch"));
        }
        let mut words = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        for t in params.tensors_mut() {
            for x in t {
                *x = words.next().expect("length checked");
            }
        }
        Ok(Self {
            model: header.model,
            training: header.training,
            step: header.step,
            rng: RngState {
                seed: unhex(&header.rng_seed).ok_or_else(|| malformed("bad rng seed"))?,
                stream: header.rng_stream,
                word_pos: header
                    .rng_word_pos
                    .parse()
                    .map_err(|_| malformed("bad rng position"))?,
            },
            params,
        })
    }
}

/// Writes atomically: a sibling temporary file is renamed over `path`.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, ckpt.to_bytes()).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}
