//! Binary field snapshots.
//!
//! Layout (little endian): `b"BNSF"`, version `u32`, `n u32`, period `f64`,
//! three `u8` component flags, then for every flagged component its `n³`
//! coefficients as interleaved `(re, im)` `f64` pairs in row-major wavevector
//! order. A cleared flag means the component is identically zero and is not
//! stored.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"BNSF";
pub const VERSION: u32 = 1;

/// Divergence defect below which a loaded field is flagged divergence-free.
const DIV_FREE_TOL: f64 = 1e-12;

pub fn write_field<W: Write>(mut w: W, u: &SpectralField) -> Result<()> {
    let g = u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.period().to_le_bytes())?;
    let flags: Vec<bool> = (0..3).map(|c| u.component(c).iter().any(|z| z.re != 0.0 || z.im != 0.0)).collect();
    for &f in &flags {
        w.write_all(&[f as u8])?;
    }
    let mut buf = Vec::with_capacity(16 * g.len());
    for (c, _) in flags.iter().enumerate().filter(|(_, f)| **f) {
        buf.clear();
        for z in u.component(c) {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let period = f64::from_le_bytes(b8);
    let grid = GridSpec::with_period(n, period).map_err(|e| Error::Format(e.to_string()))?;
    let mut flags = [0u8; 3];
    r.read_exact(&mut flags)?;
    let m = grid.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 3 * m];
    let mut buf = vec![0u8; 16 * m];
    for (c, &f) in flags.iter().enumerate() {
        match f {
            0 => {}
            1 => {
                r.read_exact(&mut buf)?;
                for (i, z) in coeffs[c * m..(c + 1) * m].iter_mut().enumerate() {
                    let re = f64::from_le_bytes(buf[16 * i..16 * i + 8].try_into().unwrap());
                    let im = f64::from_le_bytes(buf[16 * i + 8..16 * i + 16].try_into().unwrap());
                    *z = Complex64::new(re, im);
                }
            }
            other => return Err(Error::Format(format!("bad component flag {other}"))),
        }
    }
    let mut u = SpectralField::from_coeffs(grid, coeffs, false)?;
    let div_free = u.divergence_defect() <= DIV_FREE_TOL;
    u.set_divergence_free(div_free);
    Ok(u)
}

pub fn save(path: impl AsRef<Path>, u: &SpectralField) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), u)
}

pub fn load(path: impl AsRef<Path>) -> Result<SpectralField> {
    read_field(BufReader::new(File::open(path)?))
}
