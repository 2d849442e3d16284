//! Versioned binary checkpoint: magic, version, JSON metadata, then raw
//! little-endian parameter arrays.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::Architecture;
use super::train::TrainConfig;
use super::Normalizer;
use crate::error::{Error, Result};
use crate::qoe::BitrateLadder;
use crate::simulator::SimConfig;

const MAGIC: &[u8; 8] = b"ABR5GCKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    /// Mean validation QoE (hd, table μ); `None` when not validated.
    pub validation_qoe: Option<f64>,
    pub seed: u64,
    pub architecture: Architecture,
    pub ladder: BitrateLadder,
    pub normalizer: Normalizer,
    pub train: TrainConfig,
    pub sim: SimConfig,
}

/// RMSProp accumulators for exact resume.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub actor: Vec<f32>,
    pub critic: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub actor: Vec<f32>,
    pub critic: Vec<f32>,
    pub optimizer: Option<OptimizerState>,
}

/// Lightweight record of a checkpoint kept for every evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub epoch: usize,
    pub validation_qoe: Option<f64>,
    /// SHA-256 over the encoded checkpoint.
    pub digest: String,
}

fn put_array(out: &mut Vec<u8>, xs: &[f32]) {
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn array(&mut self) -> Result<Vec<f32>> {
        let n = usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("array too large".into()))?;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("array too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)?;
        let mut out = Vec::with_capacity(64 + meta.len() + 4 * (self.actor.len() + self.critic.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        put_array(&mut out, &self.actor);
        put_array(&mut out, &self.critic);
        match &self.optimizer {
            Some(o) => {
                out.push(1);
                put_array(&mut out, &o.actor);
                put_array(&mut out, &o.critic);
            }
            None => out.push(0),
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = usize::try_from(r.u64()?).map_err(|_| Error::Checkpoint("metadata too large".into()))?;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)?;
        let actor = r.array()?;
        let critic = r.array()?;
        let optimizer = match r.take(1)?[0] {
            0 => None,
            1 => Some(OptimizerState {
                actor: r.array()?,
                critic: r.array()?,
            }),
            t => return Err(Error::Checkpoint(format!("bad optimizer tag {t}"))),
        };
        if r.at != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            meta,
            actor,
            critic,
            optimizer,
        })
    }

    pub fn digest(&self) -> Result<String> {
        let hash = Sha256::digest(self.encode()?);
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn summary(&self) -> Result<CheckpointSummary> {
        Ok(CheckpointSummary {
            epoch: self.meta.epoch,
            validation_qoe: self.meta.validation_qoe,
            digest: self.digest()?,
        })
    }

    /// Writes to a temporary sibling, then renames into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let tmp = path.with_extension("ckpt.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::ActorCritic;

    fn sample() -> Checkpoint {
        let arch = Architecture {
            filters: 2,
            hidden: 3,
            ..Architecture::pensieve_5g(10)
        };
        let ac = ActorCritic::<f32>::new(arch, 9);
        let ladder = BitrateLadder::uhd();
        let sim = SimConfig::default();
        Checkpoint {
            meta: CheckpointMeta {
                epoch: 12,
                validation_qoe: Some(-3.25),
                seed: 9,
                architecture: arch,
                normalizer: Normalizer::new(&ladder, &sim),
                ladder,
                train: TrainConfig::default(),
                sim,
            },
            actor: ac.actor.params().to_vec(),
            critic: ac.critic.params().to_vec(),
            optimizer: Some(OptimizerState {
                actor: vec![1.0, f32::MIN_POSITIVE, -0.0],
                critic: vec![],
            }),
        }
    }

    #[test]
    fn round_trip_bit_exact() {
        let c = sample();
        let bytes = c.encode().unwrap();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.encode().unwrap(), bytes);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ckpt");
        c.write(&p).unwrap();
        assert_eq!(Checkpoint::read(&p).unwrap().digest().unwrap(), c.digest().unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::decode(b"nope").is_err());
        let mut bytes = sample().encode().unwrap();
        bytes.pop();
        assert!(Checkpoint::decode(&bytes).is_err());
    }
}
