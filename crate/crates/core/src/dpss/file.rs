//! Binary cache format for taper banks.
//!
//! Layout (little-endian): magic `DPSS`, version `u32`, `n: u64`, `w: f64`,
//! `k: u64`, then `k` eigenvalues, then the `k` tapers column-major.

use std::io::{Read, Write};

use super::TaperBank;
use crate::error::{param, Error, Result};

const MAGIC: &[u8; 4] = b"DPSS";
const VERSION: u32 = 1;

pub fn write_bank<W: Write>(bank: &TaperBank, mut out: W) -> Result<()> {
    if bank.first_index() != 0 {
        return param("only banks starting at taper 0 can be stored");
    }
    let mut buf = Vec::with_capacity(28 + 8 * (bank.k_computed() * (bank.n() + 1)));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(bank.n() as u64).to_le_bytes());
    buf.extend_from_slice(&bank.w().to_le_bytes());
    buf.extend_from_slice(&(bank.k_computed() as u64).to_le_bytes());
    for x in bank.eigenvalues().iter().chain(bank.raw_data()) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_bank<R: Read>(mut input: R) -> Result<TaperBank> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header).map_err(|e| Error::Input(format!("truncated bank header: {e}")))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Input("not a DPSS bank file".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Input(format!("unsupported bank version {version}")));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let w = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let k = u64::from_le_bytes(header[24..32].try_into().unwrap()) as usize;
    super::validate(n, w).map_err(|e| Error::Input(e.to_string()))?;
    if k > n {
        return Err(Error::Input(format!("bank claims {k} tapers of length {n}")));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 8 * k * (n + 1) {
        return Err(Error::Input(format!(
            "bank body has {} bytes, expected {}",
            body.len(),
            8 * k * (n + 1)
        )));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let eigenvalues: Vec<f64> = values.by_ref().take(k).collect();
    let data: Vec<f64> = values.collect();
    Ok(TaperBank::from_parts(n, w, 0, eigenvalues, data))
}
