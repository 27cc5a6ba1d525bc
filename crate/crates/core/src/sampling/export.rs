//! Raw path export.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `GPB` followed by `B` (bifBm) or `F` (scaled fBm) |
//! | 4  | 4 | `n`, grid points excluding the origin (`u32`) |
//! | 8  | 4 | `M`, rows (`u32`) |
//! | 12 | 4 | `H` or fBm Hurst index (`f32`) |
//! | 16 | 4 | `K` or fBm scale (`f32`) |
//! | 20 | 4 | reserved, zero |
//! | 24 | 8 | stream master seed (`u64`) |
//!
//! followed by `M × (n + 1)` `f64` values, row-major, column 0 the origin.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sampling::{PathBatch, ProcessLabel};

pub const RAW_HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawHeader {
    pub kind: u8,
    pub n: u32,
    pub rows: u32,
    pub param_a: f32,
    pub param_b: f32,
    pub master: u64,
}

impl RawHeader {
    pub fn to_bytes(&self) -> [u8; RAW_HEADER_LEN] {
        let mut b = [0u8; RAW_HEADER_LEN];
        b[0..3].copy_from_slice(b"GPB");
        b[3] = self.kind;
        b[4..8].copy_from_slice(&self.n.to_le_bytes());
        b[8..12].copy_from_slice(&self.rows.to_le_bytes());
        b[12..16].copy_from_slice(&self.param_a.to_le_bytes());
        b[16..20].copy_from_slice(&self.param_b.to_le_bytes());
        b[24..32].copy_from_slice(&self.master.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; RAW_HEADER_LEN]) -> Result<Self> {
        if &b[0..3] != b"GPB" || !matches!(b[3], b'B' | b'F') {
            return Err(Error::Io("bad raw path magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        Ok(RawHeader {
            kind: b[3],
            n: u32_at(4),
            rows: u32_at(8),
            param_a: f32_at(12),
            param_b: f32_at(16),
            master: u64::from_le_bytes(b[24..32].try_into().unwrap()),
        })
    }
}

/// Writes the first `rows` rows of `batch` (all rows if `None`).
pub fn write_raw<W: Write>(batch: &PathBatch, rows: Option<usize>, mut w: W) -> Result<()> {
    let rows = rows.unwrap_or(batch.rows).min(batch.rows);
    let (kind, a, b) = match batch.label {
        ProcessLabel::Bifbm { h, k } => (b'B', h, k),
        ProcessLabel::FbmScaled { hurst, scale } => (b'F', hurst, scale),
    };
    let header = RawHeader {
        kind,
        n: u32::try_from(batch.grid.len()).map_err(|_| Error::Io("grid too large for header".into()))?,
        rows: u32::try_from(rows).map_err(|_| Error::Io("too many rows for header".into()))?,
        param_a: a as f32,
        param_b: b as f32,
        master: batch.seed_info.master,
    };
    w.write_all(&header.to_bytes())?;
    let cols = batch.grid.columns();
    let mut buf = Vec::with_capacity(cols * 8);
    for row in batch.iter_rows().take(rows) {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_raw<R: Read>(mut r: R) -> Result<(RawHeader, Vec<f64>)> {
    let mut hb = [0u8; RAW_HEADER_LEN];
    r.read_exact(&mut hb)?;
    let header = RawHeader::from_bytes(&hb)?;
    let count = header.rows as usize * (header.n as usize + 1);
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}
