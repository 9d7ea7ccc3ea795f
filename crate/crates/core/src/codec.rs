//! Little-endian binary helpers shared by the persisted formats.
//!
//! Every file starts with a 4-byte ASCII magic (`FRG1`, `FRE1`, `FRS1`,
//! `FRK1`, `FRU1`, `FRX1`, `FRM1`, `FRC1`). Integers are unsigned
//! little-endian, reals are IEEE-754 binary64 little-endian, strings are a
//! `u32` byte length followed by UTF-8 bytes.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("corrupt file: {0}")]
    Corrupt(String),
}

pub type FormatResult<T> = Result<T, FormatError>;

/// Upper bound on any single length prefix; guards allocation on corrupt input.
const MAX_LEN: u64 = 1 << 40;

pub(crate) fn write_magic<W: Write>(w: &mut W, magic: &[u8; 4]) -> io::Result<()> {
    w.write_all(magic)
}

pub(crate) fn read_magic<R: Read>(r: &mut R, expected: &[u8; 4]) -> FormatResult<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != expected {
        return Err(FormatError::BadMagic {
            expected: *expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn write_u8<W: Write>(w: &mut W, v: u8) -> io::Result<()> {
    w.write_all(&[v])
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(vs.len() * 8);
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    let len = u32::try_from(s.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "string too long"))?;
    write_u32(w, len)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_u8<R: Read>(r: &mut R) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> FormatResult<Vec<f64>> {
    let bytes = n
        .checked_mul(8)
        .ok_or_else(|| FormatError::Corrupt("length overflow".into()))?;
    let mut buf = vec![0u8; bytes];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn read_str<R: Read>(r: &mut R) -> FormatResult<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| FormatError::Corrupt(format!("invalid utf-8 string: {e}")))
}

/// Reads a `u64` count and checks it against a sanity bound.
pub(crate) fn read_len<R: Read>(r: &mut R, what: &str) -> FormatResult<usize> {
    let n = read_u64(r)?;
    if n > MAX_LEN {
        return Err(FormatError::Corrupt(format!(
            "implausible {what} count {n}"
        )));
    }
    usize::try_from(n).map_err(|_| FormatError::Corrupt(format!("{what} count {n} overflows")))
}
