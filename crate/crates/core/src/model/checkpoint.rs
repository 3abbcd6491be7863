//! Parameter checkpoint container, little-endian:
//!
//! ```text
//! magic "GMCK" | version u32 = 1
//! config_len u32 | model config as `key = value` lines (UTF-8)
//! count u32
//! count × { name_len u32 | name | rank u32 | rank × u32 extents | f32 values }
//! ```
//!
//! Values are always stored as f32.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, ParamId};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"GMCK";
pub const VERSION: u32 = 1;

pub fn encode<T: Scalar>(params: &ModelParams<T>) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    put(&mut out, VERSION as usize);
    let cfg = params.config().to_kv();
    put(&mut out, cfg.len());
    out.extend_from_slice(cfg.as_bytes());
    put(&mut out, ParamId::ALL.len());
    for (id, t) in params.iter() {
        put(&mut out, id.name().len());
        out.extend_from_slice(id.name().as_bytes());
        put(&mut out, t.rank());
        for &e in t.shape() {
            put(&mut out, e);
        }
        for &v in t.data() {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("checkpoint ends while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    let found: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if found != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found });
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let cfg_len = r.u32("config length")?;
    let cfg_text = std::str::from_utf8(r.take(cfg_len, "config")?)
        .map_err(|_| Error::Format("checkpoint config is not UTF-8".into()))?;
    let config = ModelConfig::from_kv(cfg_text)?;
    let count = r.u32("tensor count")?;
    if count != ParamId::ALL.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} tensors, expected {}",
            ParamId::ALL.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for &id in ParamId::ALL {
        let name_len = r.u32("tensor name length")?;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        if name != id.name() {
            return Err(Error::Format(format!("expected tensor `{}`, found `{name}`", id.name())));
        }
        let rank = r.u32("rank")?;
        if rank > 8 {
            return Err(Error::Format(format!("tensor `{name}` has implausible rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32("extent")).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4, "tensor values")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push(Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::SizeMismatch {
            declared: r.pos,
            actual: bytes.len(),
        });
    }
    ModelParams::from_tensors(&config, tensors)
}

pub fn save<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    decode(&std::fs::read(path)?)
}
