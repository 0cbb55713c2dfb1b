//! Binary checkpoint format (little-endian):
//! magic "CLMC", format version u32, n1 u32, n2 u32, time f64, then four
//! contiguous f64 field blocks in the order phi, psi1, psi2, theta,
//! row-major (i outer, j inner). Round-trips are bitwise exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Grid, GridError, ScalarField};
use crate::solver::PerturbationState;

pub const MAGIC: [u8; 4] = *b"CLMC";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("truncated payload")]
    Truncated,
    #[error("checkpoint grid invalid: {0}")]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_checkpoint(state: &PerturbationState, path: &Path) -> Result<(), CheckpointError> {
    let mut out = BufWriter::new(File::create(path)?);
    let grid = state.grid();
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.n1() as u32).to_le_bytes())?;
    out.write_all(&(grid.n2() as u32).to_le_bytes())?;
    out.write_all(&state.time.to_le_bytes())?;
    for f in [&state.phi, &state.psi1, &state.psi2, &state.theta] {
        for v in f.values() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<PerturbationState, CheckpointError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; 4];
    read_exact(&mut input, &mut header)?;
    if header != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let n1 = read_u32(&mut input)? as usize;
    let n2 = read_u32(&mut input)? as usize;
    let time = read_f64(&mut input)?;
    let grid = Grid::new(n1, n2)?;
    let mut fields = Vec::with_capacity(4);
    for _ in 0..4 {
        let mut f = ScalarField::zeros(&grid);
        for v in f.values_mut() {
            *v = read_f64(&mut input)?;
        }
        fields.push(f);
    }
    let theta = fields.pop().unwrap();
    let psi2 = fields.pop().unwrap();
    let psi1 = fields.pop().unwrap();
    let phi = fields.pop().unwrap();
    Ok(PerturbationState {
        phi,
        psi1,
        psi2,
        theta,
        time,
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), CheckpointError> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(CheckpointError::Truncated);
        }
        filled += n;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, CheckpointError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}
