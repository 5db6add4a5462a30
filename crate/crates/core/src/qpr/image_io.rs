//! Raw QPRI image files, PGM previews and per-segment metadata.
//!
//! QPRI layout (all little-endian): `"QPRI"`, `u32` version (1), `u32` rows,
//! `u32` cols, then `rows * cols` `f32` values in row-major order.

use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Matrix;

pub const QPRI_MAGIC: &[u8; 4] = b"QPRI";
pub const QPRI_VERSION: u32 = 1;

/// Sidecar JSON written next to each image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QprMetadata {
    pub segment_id: String,
    pub h_selected: f64,
    pub recon_error: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    #[serde(rename = "N_h")]
    pub n_h: usize,
}

pub fn write_qpri<W: Write>(mut w: W, m: &Matrix) -> io::Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| invalid("too many rows"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| invalid("too many columns"))?;
    let mut buf = Vec::with_capacity(16 + 4 * m.as_slice().len());
    buf.extend_from_slice(QPRI_MAGIC);
    buf.extend_from_slice(&QPRI_VERSION.to_le_bytes());
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for &v in m.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_qpri<R: Read>(mut r: R) -> io::Result<Matrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != QPRI_MAGIC {
        return Err(invalid("bad QPRI magic"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != QPRI_VERSION {
        return Err(invalid(&format!("unsupported QPRI version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid("QPRI dimensions overflow"))?;
    let mut payload = vec![0u8; n * 4];
    r.read_exact(&mut payload)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn write_qpri_file(path: &Path, m: &Matrix) -> io::Result<()> {
    let mut buf = Vec::new();
    write_qpri(&mut buf, m)?;
    crate::fsio::write_atomic(path, &buf)
}

pub fn read_qpri_file(path: &Path) -> io::Result<Matrix> {
    let f = std::fs::File::open(path)?;
    read_qpri(io::BufReader::new(f))
}

/// Binary PGM (`P5`, maxval 255) of already-quantized pixels.
pub fn write_pgm<W: Write>(mut w: W, rows: usize, cols: usize, gray: &[u8]) -> io::Result<()> {
    if gray.len() != rows * cols {
        return Err(invalid("pixel count does not match dimensions"));
    }
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    w.write_all(gray)
}

pub fn write_pgm_file(path: &Path, rows: usize, cols: usize, gray: &[u8]) -> io::Result<()> {
    let mut buf = Vec::new();
    write_pgm(&mut buf, rows, cols, gray)?;
    crate::fsio::write_atomic(path, &buf)
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpri_layout() {
        let m = Matrix::from_vec(2, 3, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]);
        let mut buf = Vec::new();
        write_qpri(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(&buf[..4], b"QPRI");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..16], &3u32.to_le_bytes());
        assert_eq!(&buf[20..24], &0.25f32.to_le_bytes());
        assert_eq!(read_qpri(&buf[..]).unwrap(), m);
    }

    #[test]
    fn qpri_rejects_garbage() {
        assert!(read_qpri(&b"NOPE\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_qpri(&mut buf, &Matrix::zeros(2, 2)).unwrap();
        assert!(read_qpri(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn pgm_header() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 3, &[0, 1, 2, 3, 4, 255]).unwrap();
        assert!(buf.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(buf.len(), 11 + 6);
    }

    #[test]
    fn metadata_keys() {
        let meta = QprMetadata {
            segment_id: "s".into(),
            h_selected: 0.5,
            recon_error: 0.1,
            omega_min: 0.5,
            omega_max: 12.0,
            n_points: 10,
            n_h: 20,
        };
        let v: serde_json::Value = serde_json::to_value(&meta).unwrap();
        for key in [
            "segment_id",
            "h_selected",
            "recon_error",
            "omega_min",
            "omega_max",
            "n_points",
            "N_h",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
