//! Versioned binary grid checkpoints.
//!
//! Layout (little-endian): magic `CTGD`, u32 version, u32 resolution, 6 × f64 bounds
//! (min xyz, max xyz), f64 offset bound, then `(res+1)^3` f64 SDF values and
//! `3·(res+1)^3` f64 offset components.

use std::path::Path;

use super::grid::{build_grid, TetGrid};
use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

const MAGIC: &[u8; 4] = b"CTGD";
const VERSION: u32 = 1;

pub fn save_grid(grid: &TetGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = grid.verts.len();
    let mut out = Vec::with_capacity(64 + n * 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.resolution as u32).to_le_bytes());
    for v in grid.bounds.min.iter().chain(grid.bounds.max.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&grid.offset_bound.to_le_bytes());
    for s in &grid.sdf {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for o in &grid.offsets {
        for c in o.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<TetGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::format(path, 0, msg.to_string());
    if bytes.len() < 68 || &bytes[..4] != MAGIC {
        return Err(bad("not a grid checkpoint"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {}", u32_at(4))));
    }
    let res = u32_at(8) as usize;
    let b: Vec<f64> = (0..6).map(|i| f64_at(12 + 8 * i)).collect();
    let bounds = Aabb::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]));
    let mut grid = build_grid(res, bounds)?;
    grid.offset_bound = f64_at(60);
    let n = grid.verts.len();
    if bytes.len() != 68 + n * 32 {
        return Err(bad("checkpoint size does not match its resolution"));
    }
    let mut o = 68;
    for s in &mut grid.sdf {
        *s = f64_at(o);
        o += 8;
    }
    for off in &mut grid.offsets {
        *off = Vec3::new(f64_at(o), f64_at(o + 8), f64_at(o + 16));
        o += 24;
    }
    Ok(grid)
}
