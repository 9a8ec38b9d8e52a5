//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NICK"  magic
//! u32     format version (currently 1)
//! u32     parameter count
//! repeated per parameter, in order:
//!   u32       name byte length, then that many UTF-8 bytes
//!   u32       rank, then rank u32 dimensions
//!   f32 * n   row-major values, n = product of dimensions
//! u64     optimizer step counter t
//! f64 * 4 lr, beta1, beta2, eps
//! repeated per parameter, same order:
//!   f64 * n   first moments
//!   f64 * n   second moments
//! ```
//!
//! Parameter values are stored at 32-bit precision; optimizer moments
//! keep full width. Files round-trip bitwise: loading and re-saving
//! reproduces the bytes exactly. Saves go through a temp file in the
//! same directory followed by a rename, so a crash never leaves a
//! half-written checkpoint behind.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

use super::optim::{AdamConfig, AdamState};
use super::Tensor;

const MAGIC: &[u8; 4] = b"NICK";
const VERSION: u32 = 1;

/// Adam state plus its hyperparameters, as persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSnapshot {
    pub config: AdamConfig,
    pub state: AdamState,
}

impl OptimizerSnapshot {
    pub fn fresh(config: AdamConfig, lens: &[usize]) -> Self {
        OptimizerSnapshot { config, state: AdamState::new(lens) }
    }
}

/// Named parameter tensors and the optimizer snapshot that produced
/// them.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: Vec<(String, Tensor)>,
    pub optimizer: OptimizerSnapshot,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = self.params.len();
        if self.optimizer.state.m.len() != n || self.optimizer.state.v.len() != n {
            return Err(Error::Checkpoint(format!(
                "{} parameters but {} moment slots",
                n,
                self.optimizer.state.m.len()
            )));
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for (name, tensor) in &self.params {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in tensor.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let opt = &self.optimizer;
        out.extend_from_slice(&opt.state.t.to_le_bytes());
        for v in [opt.config.lr, opt.config.beta1, opt.config.beta2, opt.config.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (i, (name, tensor)) in self.params.iter().enumerate() {
            let (m, v) = (&opt.state.m[i], &opt.state.v[i]);
            if m.len() != tensor.len() || v.len() != tensor.len() {
                return Err(Error::Checkpoint(format!(
                    "moment length {} does not match parameter '{}' of length {}",
                    m.len(),
                    name,
                    tensor.len()
                )));
            }
            for &x in m {
                out.extend_from_slice(&x.to_le_bytes());
            }
            for &x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { data, pos: 0 };
        let magic = r.bytes(4)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {:?}", magic)));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, expected {VERSION}"
            )));
        }
        let n = r.u32()? as usize;
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.bytes(name_len)?.to_vec())
                .map_err(|e| Error::Checkpoint(format!("parameter name not UTF-8: {e}")))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                values.push(r.f32()? as f64);
            }
            params.push((name, Tensor::new(&shape, values)?));
        }
        let t = r.u64()?;
        let config =
            AdamConfig { lr: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for (_, tensor) in &params {
            m.push(r.f64_vec(tensor.len())?);
            v.push(r.f64_vec(tensor.len())?);
        }
        if r.pos != data.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after optimizer state",
                data.len() - r.pos
            )));
        }
        Ok(Checkpoint { params, optimizer: OptimizerSnapshot { config, state: AdamState { t, m, v } } })
    }

    /// Atomic save: write a sibling temp file, then rename over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: wanted {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = vec![
            ("proj_w".to_string(), Tensor::uniform(&[3, 4], -1.0, 1.0, &mut rng)),
            ("proj_b".to_string(), Tensor::uniform(&[3], -1.0, 1.0, &mut rng)),
        ];
        let mut optimizer = OptimizerSnapshot::fresh(AdamConfig::default(), &[12, 3]);
        optimizer.state.t = 17;
        optimizer.state.m[0][5] = 0.123456789;
        optimizer.state.v[1][2] = 9.87654321e-3;
        Checkpoint { params, optimizer }
    }

    #[test]
    fn file_round_trip_is_bytewise_stable() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let reloaded = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(reloaded.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn load_quantizes_parameters_to_f32_and_keeps_moments_exact() {
        let ck = sample();
        let reloaded = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        for ((name_a, a), (name_b, b)) in ck.params.iter().zip(&reloaded.params) {
            assert_eq!(name_a, name_b);
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        assert_eq!(ck.optimizer, reloaded.optimizer);
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nick");
        let ck = sample();
        ck.save(&path).unwrap();
        // Overwrite must also succeed (rename over an existing file).
        ck.save(&path).unwrap();
        let reloaded = Checkpoint::load(&path).unwrap();
        assert_eq!(reloaded.to_bytes().unwrap(), ck.to_bytes().unwrap());
        assert!(!path.with_extension("nick.tmp").exists());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn unknown_version_is_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4] = 99;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = sample().to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }
}
