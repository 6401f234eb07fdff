//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RNET" | u32 version | u32 len, config text | u64 epoch | f64 best_val_loss
//! u32 arrays, each: u32 len, name | u8 kind | u32 rank | u64 dims.. | f32 data..
//! u8 has_optimizer, then: u64 step | f64 lr, beta1, beta2, eps | f32 m.. | f32 v..
//! u32 CRC32 of every preceding byte
//! ```
//!
//! Optimizer moments follow the parameter arrays' order and lengths.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{NamedArray, Network, NetworkConfig, ParamKind, Parameters};
use crate::train::AdamState;

pub const MAGIC: &[u8; 4] = b"RNET";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub parameters: Parameters<f32>,
    pub optimizer: Option<AdamState<f32>>,
    pub epoch: u64,
    pub best_val_loss: f64,
}

impl Checkpoint {
    pub fn new(network: &Network<f32>, optimizer: Option<&AdamState<f32>>, epoch: u64, best_val_loss: f64) -> Self {
        Checkpoint {
            config: network.config().clone(),
            parameters: network.params().clone(),
            optimizer: optimizer.cloned(),
            epoch,
            best_val_loss,
        }
    }

    pub fn network(&self) -> Result<Network<f32>> {
        Network::from_parameters(&self.config, self.parameters.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_str(&mut out, &self.config.to_text());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.best_val_loss.to_le_bytes());
        let arrays = self.parameters.arrays();
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for a in arrays {
            put_str(&mut out, &a.name);
            out.push(match a.kind {
                ParamKind::Learnable => 0,
                ParamKind::Running => 1,
            });
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            put_f32s(&mut out, &a.data);
        }
        match &self.optimizer {
            None => out.push(0),
            Some(opt) => {
                out.push(1);
                out.extend_from_slice(&opt.step.to_le_bytes());
                for x in [opt.lr, opt.beta1, opt.beta2, opt.eps] {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                for m in &opt.m {
                    put_f32s(&mut out, m);
                }
                for v in &opt.v {
                    put_f32s(&mut out, v);
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses and validates a checkpoint; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4, "magic")? != MAGIC {
            return Err(r.corrupt(0, "bad magic, not a checkpoint"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.to_path_buf(),
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let config_at = r.pos;
        let text = r.string("config")?;
        let config = NetworkConfig::from_text(&text).map_err(|e| r.corrupt(config_at, &e.to_string()))?;
        let epoch = r.u64("epoch")?;
        let best_val_loss = f64::from_le_bytes(r.array("best_val_loss")?);
        let count = r.u32("array count")? as usize;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let name = r.string("array name")?;
            let kind_at = r.pos;
            let kind = match r.take(1, "array kind")?[0] {
                0 => ParamKind::Learnable,
                1 => ParamKind::Running,
                k => return Err(r.corrupt(kind_at, &format!("unknown array kind {k}"))),
            };
            let rank = r.u32("rank")? as usize;
            let mut shape = Vec::new();
            let mut len = 1usize;
            for _ in 0..rank {
                let at = r.pos;
                let d = usize::try_from(r.u64("dimension")?).map_err(|_| r.corrupt(at, "dimension too large"))?;
                len = len
                    .checked_mul(d)
                    .ok_or_else(|| r.corrupt(at, "array size overflows"))?;
                shape.push(d);
            }
            let data = r.f32s(len, &name)?;
            arrays.push(NamedArray {
                name,
                shape,
                kind,
                data,
            });
        }
        let parameters = Parameters::from_arrays(arrays);
        let optimizer = match r.take(1, "optimizer flag")?[0] {
            0 => None,
            1 => {
                let step = r.u64("optimizer step")?;
                let mut hyper = [0.0f64; 4];
                for h in &mut hyper {
                    *h = f64::from_le_bytes(r.array("optimizer hyper-parameter")?);
                }
                let lens: Vec<usize> = parameters.arrays().iter().map(|a| a.len()).collect();
                let m = lens
                    .iter()
                    .map(|&n| r.f32s(n, "first moment"))
                    .collect::<Result<Vec<_>>>()?;
                let v = lens
                    .iter()
                    .map(|&n| r.f32s(n, "second moment"))
                    .collect::<Result<Vec<_>>>()?;
                Some(AdamState {
                    step,
                    lr: hyper[0],
                    beta1: hyper[1],
                    beta2: hyper[2],
                    eps: hyper[3],
                    m,
                    v,
                })
            }
            f => return Err(r.corrupt(r.pos - 1, &format!("bad optimizer flag {f}"))),
        };
        let crc_at = r.pos;
        let stored = r.u32("checksum")?;
        if r.pos != bytes.len() {
            return Err(r.corrupt(r.pos, "trailing bytes after checksum"));
        }
        if crc32fast::hash(&bytes[..crc_at]) != stored {
            return Err(r.corrupt(crc_at, "checksum mismatch"));
        }
        let ckpt = Checkpoint {
            config,
            parameters,
            optimizer,
            epoch,
            best_val_loss,
        };
        // Rejects arrays that do not match the layout implied by the config.
        ckpt.network().map_err(|e| r.corrupt(config_at, &e.to_string()))?;
        Ok(ckpt)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_f32s(out: &mut Vec<u8>, xs: &[f32]) {
    out.reserve(xs.len() * 4);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, offset: usize, reason: &str) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            reason: reason.to_string(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            _ => Err(self.corrupt(self.bytes.len(), &format!("truncated while reading {what}"))),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("take returns N bytes"))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.corrupt(at, &format!("{what} is not UTF-8")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| self.corrupt(self.pos, &format!("{what} size overflows")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

/// Writes via a temporary sibling file and a rename, so readers never see a
/// partial checkpoint.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    Checkpoint::from_bytes(&bytes, path)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
