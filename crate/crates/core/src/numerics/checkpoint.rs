//! Binary parameter container.
//!
//! Layout (little endian):
//! `b"SHINECKP"`, `u32` version, `u64` metadata length + UTF-8 metadata,
//! `u64` parameter count, then per parameter: `u64` name length + name,
//! `u64` rank, `u64` extents, `f64` row-major values.

use std::io::{Read, Write};

use super::{ParamStore, Tensor};
use crate::error::{Result, ShineError};

const MAGIC: &[u8; 8] = b"SHINECKP";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_params<W: Write>(mut w: W, store: &ParamStore, metadata: &str) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_bytes(&mut w, metadata.as_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for (_, p) in store.iter() {
        write_bytes(&mut w, p.name.as_bytes())?;
        w.write_all(&(p.value.shape().len() as u64).to_le_bytes())?;
        for &d in p.value.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<(ParamStore, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ShineError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(ShineError::Checkpoint(format!("unsupported version {version}")));
    }
    let metadata = String::from_utf8(read_bytes(&mut r)?)
        .map_err(|_| ShineError::Checkpoint("metadata is not UTF-8".into()))?;
    let count = read_u64(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = String::from_utf8(read_bytes(&mut r)?)
            .map_err(|_| ShineError::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = read_u64(&mut r)? as usize;
        if rank > 8 {
            return Err(ShineError::Checkpoint(format!("implausible rank {rank} for {name}")));
        }
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok((store, metadata))
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = read_u64(r)? as usize;
    if len > 1 << 30 {
        return Err(ShineError::Checkpoint(format!("implausible length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
