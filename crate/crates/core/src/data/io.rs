//! `PNDS` dataset files.
//!
//! Little-endian: magic `PNDS`, version `u32`, `nx u32`, `ny u32`,
//! group count `u32`; per group: `group_id u32`, `mu f64`, `sigma f64`,
//! sample count `u32`, labels-present `u8`; per sample the `k` payload
//! `f64[nx·ny]`, followed by the `T` payload when labels are present.

use std::io::{Read, Write};

use super::dataset::{Dataset, GridSample, SampleGroup};
use super::grid::GridField;
use crate::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"PNDS";
pub const DATASET_VERSION: u32 = 1;

pub fn write_dataset<W: Write>(mut w: W, d: &Dataset) -> Result<()> {
    d.validate()?;
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(d.nx as u32).to_le_bytes())?;
    w.write_all(&(d.ny as u32).to_le_bytes())?;
    w.write_all(&(d.groups.len() as u32).to_le_bytes())?;
    for g in &d.groups {
        let labeled = g.samples.iter().filter(|s| s.label.is_some()).count();
        if labeled != 0 && labeled != g.samples.len() {
            return Err(Error::InvalidArgument(format!(
                "group {} is partially labeled ({labeled} of {})",
                g.group_id,
                g.samples.len()
            )));
        }
        w.write_all(&g.group_id.to_le_bytes())?;
        w.write_all(&g.mu.to_le_bytes())?;
        w.write_all(&g.sigma.to_le_bytes())?;
        w.write_all(&(g.samples.len() as u32).to_le_bytes())?;
        w.write_all(&[u8::from(labeled != 0)])?;
        for s in &g.samples {
            write_field(&mut w, &s.k)?;
            if let Some(t) = &s.label {
                write_field(&mut w, t)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_field<W: Write>(w: &mut W, f: &GridField) -> Result<()> {
    let mut buf = Vec::with_capacity(f.len() * 8);
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, buf: &mut [u8], what: &'static str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Truncated(what),
            _ => Error::Io(e),
        })
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }

    fn field(&mut self, nx: usize, ny: usize, what: &'static str) -> Result<GridField> {
        let mut buf = vec![0u8; nx * ny * 8];
        self.bytes(&mut buf, what)?;
        let v = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        GridField::new(nx, ny, v).map_err(|e| Error::Malformed(format!("{what}: {e}")))
    }
}

/// Reads a whole dataset; nothing is returned unless the file is complete.
pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let mut r = Reader { inner: r };
    let mut magic = [0u8; 4];
    r.bytes(&mut magic, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic { expected: DATASET_MAGIC, found: magic });
    }
    let version = r.u32("version")?;
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch { expected: DATASET_VERSION, found: version });
    }
    let nx = r.u32("nx")? as usize;
    let ny = r.u32("ny")? as usize;
    if nx < 3 || ny < 3 {
        return Err(Error::Malformed(format!("grid {nx}x{ny} is smaller than 3x3")));
    }
    let count = r.u32("group count")?;
    let mut groups = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let group_id = r.u32("group id")?;
        let mu = r.f64("mu")?;
        let sigma = r.f64("sigma")?;
        let n = r.u32("sample count")? as usize;
        let mut flag = [0u8; 1];
        r.bytes(&mut flag, "labels flag")?;
        let labeled = match flag[0] {
            0 => false,
            1 => true,
            other => return Err(Error::Malformed(format!("labels flag {other}"))),
        };
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let k = r.field(nx, ny, "permeability payload")?;
            let label = if labeled { Some(r.field(nx, ny, "label payload")?) } else { None };
            samples.push(GridSample { k, label });
        }
        groups.push(SampleGroup { group_id, mu, sigma, samples });
    }
    let d = Dataset { nx, ny, groups };
    d.validate().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(d)
}
