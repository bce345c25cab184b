//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `PNCL`, version `u32`, parameter count `u64`,
//! then per parameter: name length `u32`, UTF-8 name, rank `u32`,
//! extents `u64[rank]`, payload `f64[product(extents)]`.

use std::io::{Read, Write};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PNCL";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, params: &ParamStore) -> Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for (name, t, _) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &e in t.shape() {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(what),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &'static str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a checkpoint; every parameter comes back trainable.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamStore> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { expected: CHECKPOINT_MAGIC, found: magic });
    }
    let version = read_u32(&mut r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { expected: CHECKPOINT_VERSION, found: version });
    }
    let count = read_u64(&mut r, "parameter count")?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let len = read_u32(&mut r, "name length")? as usize;
        let mut name = vec![0u8; len];
        read_exact(&mut r, &mut name, "name")?;
        let name = String::from_utf8(name).map_err(|_| Error::Malformed("parameter name is not UTF-8".into()))?;
        let rank = read_u32(&mut r, "rank")? as usize;
        if rank == 0 || rank > 3 {
            return Err(Error::Malformed(format!("parameter `{name}` has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r, "extent")? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 8];
        read_exact(&mut r, &mut bytes, "payload")?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamStore {
        let mut p = ParamStore::new();
        p.insert("a.w", Tensor::matrix(2, 3, vec![1.0, -2.5, 3.0, 0.0, 1e-300, -0.0]).unwrap()).unwrap();
        p.insert("b", Tensor::new(vec![1], vec![7.0]).unwrap()).unwrap();
        p.insert("c3", Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        let q = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(p.digest(), q.digest());
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[0..4], b"PNCL");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 3);
        assert_eq!(&buf[20..23], b"a.w");
    }

    #[test]
    fn corrupt_inputs() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::BadMagic { .. })));
        let mut ver = buf.clone();
        ver[4] = 9;
        assert!(matches!(read_checkpoint(ver.as_slice()), Err(Error::VersionMismatch { found: 9, .. })));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(short), Err(Error::Truncated(_))));
    }
}
