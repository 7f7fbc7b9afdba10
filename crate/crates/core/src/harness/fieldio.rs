//! Bit-exact field snapshots: magic "GPF1", little-endian u32 N and f64 L,
//! then N·N interleaved (re, im) f64 values, row-major with x fastest.

use crate::field::ComplexField;
use crate::grid::Grid2D;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"GPF1";

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("bad-format: {0}")]
    BadFormat(String),
    #[error("short-read: expected {expected} bytes of payload, got {got}")]
    ShortRead { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn save_field(field: &ComplexField, path: &Path) -> Result<(), FieldIoError> {
    let mut out = Vec::with_capacity(4 + 4 + 8 + field.values.len() * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.grid.n as u32).to_le_bytes());
    out.extend_from_slice(&field.grid.l.to_le_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ComplexField, FieldIoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(FieldIoError::BadFormat("file shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(FieldIoError::BadFormat(format!(
            "magic {:?} is not GPF1",
            &bytes[0..4]
        )));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let expected = n * n * 16;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(FieldIoError::ShortRead {
            expected,
            got: payload.len(),
        });
    }
    let mut values = Vec::with_capacity(n * n);
    for chunk in payload.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        values.push(Complex64::new(re, im));
    }
    // Accept whatever geometry was stored; grids are validated at creation
    // time by the writers.
    Ok(ComplexField {
        grid: Grid2D { n, l },
        values,
    })
}
