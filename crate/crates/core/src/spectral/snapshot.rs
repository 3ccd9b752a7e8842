//! Binary snapshot format.
//!
//! Layout (little endian): magic `BSPC`, then `u32` version, dim, n, rank
//! (number of components), then for each component every stored coefficient
//! as an `(re, im)` pair of `f64`. Coefficients follow the half-spectrum
//! storage order: `k₁ = 0..=n/2` fastest, then `j₂`, then `j₃`, where
//! `j ↦ k = j` for `j ≤ n/2` and `k = j − n` otherwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Complex64, Grid, SpectralError, SpectralField};

pub const SNAPSHOT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"BSPC";

pub fn write_snapshot<W: Write>(mut w: W, f: &SpectralField) -> Result<(), SpectralError> {
    let g = f.grid();
    w.write_all(MAGIC)?;
    for v in [SNAPSHOT_VERSION, g.dim() as u32, g.n() as u32, f.n_components() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in f.components() {
        for v in c {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SpectralField, SpectralError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SpectralError::Snapshot("bad magic".into()));
    }
    let mut word = [0u8; 4];
    let mut next = |r: &mut R| -> Result<u32, SpectralError> {
        r.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(SpectralError::SnapshotVersion { found: version, expected: SNAPSHOT_VERSION });
    }
    let dim = next(&mut r)? as usize;
    let n = next(&mut r)? as usize;
    let rank = next(&mut r)? as usize;
    let grid = Grid::new(dim, n)?;
    if rank != 1 && rank != dim {
        return Err(SpectralError::Snapshot(format!("{rank} components on a {dim}-dimensional grid")));
    }
    let mut buf = [0u8; 16];
    let mut comps = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut c = Vec::with_capacity(grid.spectral_len());
        for _ in 0..grid.spectral_len() {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            c.push(Complex64::new(re, im));
        }
        comps.push(c);
    }
    SpectralField::from_components(&grid, comps)
}

pub fn save_snapshot(path: impl AsRef<Path>, f: &SpectralField) -> Result<(), SpectralError> {
    write_snapshot(BufWriter::new(File::create(path)?), f)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<SpectralField, SpectralError> {
    read_snapshot(BufReader::new(File::open(path)?))
}
