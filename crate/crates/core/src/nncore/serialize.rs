//! Flat named-tensor parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "SDIDPARM"
//! version u32      = 1
//! count   u32      number of tensors
//! count × { name_len u32, name utf-8, rows u32, cols u32, rows·cols × f64 }
//! ```

use std::io::{Read, Write};

use super::{NnError, Tensor2};

pub const PARAMS_MAGIC: &[u8; 8] = b"SDIDPARM";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor2,
}

pub fn write_params<W: Write>(mut w: W, tensors: &[NamedTensor]) -> Result<(), NnError> {
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&u32_len(tensors.len())?.to_le_bytes())?;
    for nt in tensors {
        let name = nt.name.as_bytes();
        w.write_all(&u32_len(name.len())?.to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&u32_len(nt.tensor.rows())?.to_le_bytes())?;
        w.write_all(&u32_len(nt.tensor.cols())?.to_le_bytes())?;
        for v in nt.tensor.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<Vec<NamedTensor>, NnError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != PARAMS_VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| NnError::Format(e.to_string()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push(NamedTensor {
            name,
            tensor: Tensor2::from_vec(rows, cols, data)?,
        });
    }
    Ok(out)
}

fn u32_len(n: usize) -> Result<u32, NnError> {
    u32::try_from(n).map_err(|_| NnError::Format(format!("length {n} exceeds u32")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
