//! Binary checkpoints and field snapshots.
//!
//! Layout (all little-endian): magic `PCF1`; version `u32`; geometry kind
//! `u8` (0 torus, 1 sphere); geometry parameters (`nx: u64, ny: u64,
//! length: f64` or `nmu: u64`); time `f64`; the potential as `f64` values in
//! storage order; CRC32 of every byte between the magic and the checksum.

use std::fs;
use std::path::Path;

use crate::error::{PcfError, Result};
use crate::field::{GridShape, ScalarField};
use crate::geometry::Geometry;

pub const MAGIC: &[u8; 4] = b"PCF1";
pub const VERSION: u32 = 1;

/// Grid description stored in a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CheckpointGrid {
    Torus { nx: u64, ny: u64, length: f64 },
    Sphere { nmu: u64 },
}

impl CheckpointGrid {
    pub fn of(geom: &Geometry) -> Self {
        match geom {
            Geometry::Torus(t) => CheckpointGrid::Torus {
                nx: t.nx() as u64,
                ny: t.ny() as u64,
                length: t.length(),
            },
            Geometry::Sphere(s) => CheckpointGrid::Sphere { nmu: s.nmu() as u64 },
        }
    }

    fn len(&self) -> Result<usize> {
        let n = match *self {
            CheckpointGrid::Torus { nx, ny, .. } => nx.checked_mul(ny),
            CheckpointGrid::Sphere { nmu } => Some(nmu),
        };
        n.and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| PcfError::Checkpoint("grid size overflows".into()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub grid: CheckpointGrid,
    pub time: f64,
    pub phi: Vec<f64>,
}

impl Checkpoint {
    pub fn new(geom: &Geometry, time: f64, phi: &ScalarField) -> Result<Self> {
        phi.check_shape(geom.shape())?;
        Ok(Self {
            grid: CheckpointGrid::of(geom),
            time,
            phi: phi.values().to_vec(),
        })
    }

    /// The stored potential, after checking that `geom` has the same grid.
    pub fn field_on(&self, geom: &Geometry) -> Result<ScalarField> {
        let expected = CheckpointGrid::of(geom);
        let same = match (self.grid, expected) {
            (CheckpointGrid::Torus { nx, ny, length }, CheckpointGrid::Torus { nx: a, ny: b, length: l }) => {
                nx == a && ny == b && length.to_bits() == l.to_bits()
            }
            (g, e) => g == e,
        };
        if !same {
            return Err(PcfError::Checkpoint(format!(
                "grid {:?} does not match the configured geometry {:?}",
                self.grid, expected
            )));
        }
        let shape: GridShape = geom.shape();
        ScalarField::new(shape, self.phi.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::with_capacity(64 + 8 * self.phi.len());
        body.extend_from_slice(&VERSION.to_le_bytes());
        match self.grid {
            CheckpointGrid::Torus { nx, ny, length } => {
                body.push(0);
                body.extend_from_slice(&nx.to_le_bytes());
                body.extend_from_slice(&ny.to_le_bytes());
                body.extend_from_slice(&length.to_le_bytes());
            }
            CheckpointGrid::Sphere { nmu } => {
                body.push(1);
                body.extend_from_slice(&nmu.to_le_bytes());
            }
        }
        body.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.phi {
            body.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&body);
        let mut out = Vec::with_capacity(body.len() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&body);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| PcfError::Checkpoint(m.to_string());
        if bytes.len() < 4 + 4 + 1 + 4 || &bytes[..4] != MAGIC {
            return Err(bad("missing PCF1 magic"));
        }
        let (body, crc_bytes) = bytes[4..].split_at(bytes.len() - 8);
        let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(bad("CRC mismatch"));
        }
        let mut r = Reader { buf: body, pos: 0 };
        let version = u32::from_le_bytes(r.take::<4>()?);
        if version != VERSION {
            return Err(PcfError::Checkpoint(format!("unsupported version {version}")));
        }
        let grid = match r.take::<1>()?[0] {
            0 => CheckpointGrid::Torus {
                nx: u64::from_le_bytes(r.take()?),
                ny: u64::from_le_bytes(r.take()?),
                length: f64::from_le_bytes(r.take()?),
            },
            1 => CheckpointGrid::Sphere {
                nmu: u64::from_le_bytes(r.take()?),
            },
            k => return Err(PcfError::Checkpoint(format!("unknown geometry kind {k}"))),
        };
        let time = f64::from_le_bytes(r.take()?);
        let n = grid.len()?;
        if r.buf.len() - r.pos != 8 * n {
            return Err(PcfError::Checkpoint(format!(
                "expected {} bytes of field data, found {}",
                8 * n,
                r.buf.len() - r.pos
            )));
        }
        let mut phi = Vec::with_capacity(n);
        for _ in 0..n {
            phi.push(f64::from_le_bytes(r.take()?));
        }
        Ok(Self { grid, time, phi })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| PcfError::Checkpoint("truncated file".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }
}

/// Writes a checkpoint of `phi` at `time`.
pub fn write_checkpoint(path: &Path, geom: &Geometry, time: f64, phi: &ScalarField) -> Result<()> {
    let bytes = Checkpoint::new(geom, time, phi)?.to_bytes();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    Checkpoint::from_bytes(&bytes)
}
