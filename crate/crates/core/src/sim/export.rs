//! Ensemble files.
//!
//! CSV: header `t,traj_id,x1,x2,x3,v1,v2,v3`, rows grouped by sample time
//! then trajectory, floats in shortest round-trip form.
//!
//! Binary (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "ORTHENS\0"
//! version    u32      1
//! endian     u32      0x01020304
//! meta_len   u64      length of the JSON metadata that follows
//! meta       bytes    {"params":..,"scheme":..,"master_seed":..}
//! n_traj     u64
//! n_samples  u64
//! times      f64 * n_samples
//! records    (t, x1, x2, x3, v1, v2, v3) f64 * 7, trajectory-major
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Ensemble, IntegratorScheme, State};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::vec3::Vec3;

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"ORTHENS\0";
const VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

#[derive(Serialize, Deserialize)]
struct Meta {
    params: ModelParams,
    scheme: IntegratorScheme,
    master_seed: u64,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_ensemble_csv<W: Write>(ens: &Ensemble, mut w: W) -> Result<()> {
    writeln!(w, "t,traj_id,x1,x2,x3,v1,v2,v3").map_err(io_err)?;
    for sample in 0..ens.n_samples() {
        for (k, s) in ens.at(sample).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.t, k, s.x.x1, s.x.x2, s.x.x3, s.v.x1, s.v.x2, s.v.x3
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn write_ensemble_binary<W: Write>(ens: &Ensemble, mut w: W) -> Result<()> {
    let meta = Meta { params: ens.params.clone(), scheme: ens.scheme, master_seed: ens.master_seed };
    let meta = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(48 + meta.len() + ens.states.len() * 56);
    buf.extend_from_slice(ENSEMBLE_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&ENDIAN_TAG.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf.extend_from_slice(&(ens.n_traj as u64).to_le_bytes());
    buf.extend_from_slice(&(ens.n_samples() as u64).to_le_bytes());
    for t in &ens.sample_times {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    for s in &ens.states {
        for f in [s.t, s.x.x1, s.x.x2, s.x.x3, s.v.x1, s.v.x2, s.v.x3] {
            buf.extend_from_slice(&f.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io_err)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated ensemble file at byte {}", self.pos)))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_ensemble_binary<R: Read>(mut r: R) -> Result<Ensemble> {
    let mut data = Vec::new();
    r.read_to_end(&mut data).map_err(io_err)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(8)? != ENSEMBLE_MAGIC {
        return Err(Error::Format("not an ensemble file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported ensemble version {version}")));
    }
    if c.u32()? != ENDIAN_TAG {
        return Err(Error::Format("endianness tag mismatch".into()));
    }
    let meta_len = c.u64()? as usize;
    let meta: Meta = serde_json::from_slice(c.take(meta_len)?).map_err(|e| Error::Format(e.to_string()))?;
    let n_traj = c.u64()? as usize;
    let n_samples = c.u64()? as usize;
    let sample_times = (0..n_samples).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let mut states = Vec::with_capacity(n_traj.saturating_mul(n_samples).min(1 << 28));
    for _ in 0..n_traj * n_samples {
        let t = c.f64()?;
        let x = Vec3::new(c.f64()?, c.f64()?, c.f64()?);
        let v = Vec3::new(c.f64()?, c.f64()?, c.f64()?);
        states.push(State { t, x, v });
    }
    if c.pos != data.len() {
        return Err(Error::Format("trailing bytes after ensemble records".into()));
    }
    Ok(Ensemble {
        params: meta.params,
        scheme: meta.scheme,
        master_seed: meta.master_seed,
        n_traj,
        sample_times,
        states,
    })
}
