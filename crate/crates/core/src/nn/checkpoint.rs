//! Binary checkpoint format.
//!
//! Layout: the 8-byte magic `SATOFFNN`, a little-endian `u32` format version,
//! a little-endian `u32` header length, the JSON header, then every network's
//! parameters as little-endian `f64`, in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::{param_count, Mlp, ShapeError};

pub const MAGIC: &[u8; 8] = b"SATOFFNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("payload holds {got} bytes, header needs {expected}")]
    Payload { expected: usize, got: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetHeader {
    pub name: String,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// Trainer that produced the file, e.g. `ppo` or `dqn`.
    pub kind: String,
    pub n_max: usize,
    pub m_max: usize,
    pub crate_version: String,
    pub nets: Vec<NetHeader>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub nets: Vec<Mlp>,
}

impl Checkpoint {
    pub fn new(kind: &str, n_max: usize, m_max: usize, named: Vec<(&str, Mlp)>) -> Self {
        let header = CheckpointHeader {
            kind: kind.to_string(),
            n_max,
            m_max,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            nets: named
                .iter()
                .map(|(n, m)| NetHeader {
                    name: n.to_string(),
                    sizes: m.sizes().to_vec(),
                })
                .collect(),
        };
        Self {
            header,
            nets: named.into_iter().map(|(_, m)| m).collect(),
        }
    }

    pub fn net(&self, name: &str) -> Option<&Mlp> {
        self.header
            .nets
            .iter()
            .position(|n| n.name == name)
            .map(|i| &self.nets[i])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let payload: usize = self.nets.iter().map(Mlp::num_params).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for net in &self.nets {
            for p in net.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(CheckpointError::Payload {
                expected: hlen,
                got: body.len(),
            });
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[..hlen])?;
        let payload = &body[hlen..];
        let expected: usize = header.nets.iter().map(|n| 8 * param_count(&n.sizes)).sum();
        if payload.len() != expected {
            return Err(CheckpointError::Payload {
                expected,
                got: payload.len(),
            });
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut nets = Vec::with_capacity(header.nets.len());
        for n in &header.nets {
            let params: Vec<f64> = values.by_ref().take(param_count(&n.sizes)).collect();
            nets.push(Mlp::from_params(&n.sizes, params)?);
        }
        Ok(Self { header, nets })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Mlp::init(&[5, 4, 3], 0.01, &mut rng).unwrap();
        let b = Mlp::init(&[5, 4, 1], 1.0, &mut rng).unwrap();
        Checkpoint::new("ppo", 3, 3, vec![("actor", a), ("critic", b)])
    }

    #[test]
    fn byte_exact_round_trip() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(back.net("critic").unwrap().sizes(), &[5, 4, 1]);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Version(9))));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 8]),
            Err(CheckpointError::Payload { .. })
        ));
    }
}
