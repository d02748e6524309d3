use rayon::prelude::*;

use super::grid::{tet_signed_volume, TetGrid};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mesh::TriMesh;

/// MT output: the welded mesh plus, per mesh vertex, the grid edge `(a, b)` (a < b) it lies on.
#[derive(Debug, Clone)]
pub struct MtSurface {
    pub mesh: TriMesh,
    pub edges: Vec<(u32, u32)>,
}

/// Zero crossing of the linear interpolant along an edge: `(p_a s_b - p_b s_a) / (s_b - s_a)`.
#[inline]
pub fn crossing_point(pa: &Vec3, pb: &Vec3, sa: f64, sb: f64) -> Vec3 {
    (pa * sb - pb * sa) / (sb - sa)
}

#[inline]
fn inside(s: f64) -> bool {
    s < 0.0
}

fn parity(perm: &[usize; 4]) -> f64 {
    let mut inv = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn edge_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

/// Triangles of one tet as triples of edge keys, oriented with normals pointing to positive SDF.
fn tet_triangles(tet: &[u32; 4], pos: &[Vec3; 4], sdf: &[f64; 4], out: &mut Vec<[u64; 3]>) {
    let n_in = sdf.iter().filter(|&&s| inside(s)).count();
    if n_in == 0 || n_in == 4 {
        return;
    }
    let vol = tet_signed_volume(&pos[0], &pos[1], &pos[2], &pos[3]);
    let orient = if vol < 0.0 { -1.0 } else { 1.0 };
    let mut ins = [0usize; 4];
    let mut outs = [0usize; 4];
    let (mut ni, mut no) = (0, 0);
    for i in 0..4 {
        if inside(sdf[i]) {
            ins[ni] = i;
            ni += 1;
        } else {
            outs[no] = i;
            no += 1;
        }
    }
    let e = |i: usize, j: usize| edge_key(tet[i], tet[j]);
    match n_in {
        1 => {
            let p = [ins[0], outs[0], outs[1], outs[2]];
            let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
            if parity(&p) * orient > 0.0 {
                out.push([e(a, b), e(a, c), e(a, d)]);
            } else {
                out.push([e(a, b), e(a, d), e(a, c)]);
            }
        }
        3 => {
            let p = [outs[0], ins[0], ins[1], ins[2]];
            let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
            if parity(&p) * orient > 0.0 {
                out.push([e(a, b), e(a, d), e(a, c)]);
            } else {
                out.push([e(a, b), e(a, c), e(a, d)]);
            }
        }
        _ => {
            let p = [ins[0], ins[1], outs[0], outs[1]];
            let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
            if parity(&p) * orient > 0.0 {
                out.push([e(a, c), e(a, d), e(b, d)]);
                out.push([e(a, c), e(b, d), e(b, c)]);
            } else {
                out.push([e(a, c), e(b, d), e(a, d)]);
                out.push([e(a, c), e(b, c), e(b, d)]);
            }
        }
    }
}

/// Marching Tetrahedra over an arbitrary tet soup. Vertices are welded per edge and numbered
/// in ascending edge-key order, so the result does not depend on traversal order.
pub fn extract_tets(positions: &[Vec3], tets: &[[u32; 4]], sdf: &[f64]) -> Result<MtSurface> {
    let tris: Vec<[u64; 3]> = tets
        .par_chunks(8192)
        .flat_map_iter(|chunk| {
            let mut out = Vec::new();
            for t in chunk {
                let s = t.map(|v| sdf[v as usize]);
                let n_in = s.iter().filter(|&&x| inside(x)).count();
                if n_in == 0 || n_in == 4 {
                    continue;
                }
                let p = t.map(|v| positions[v as usize]);
                tet_triangles(t, &p, &s, &mut out);
            }
            out
        })
        .collect();
    if tris.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut keys: Vec<u64> = tris.iter().flatten().copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let edges: Vec<(u32, u32)> = keys.iter().map(|&k| ((k >> 32) as u32, k as u32)).collect();
    let vertices: Vec<Vec3> = edges
        .iter()
        .map(|&(a, b)| {
            crossing_point(&positions[a as usize], &positions[b as usize], sdf[a as usize], sdf[b as usize])
        })
        .collect();
    let faces = tris
        .iter()
        .map(|t| t.map(|k| keys.binary_search(&k).unwrap() as u32))
        .collect();
    Ok(MtSurface {
        mesh: TriMesh {
            vertices,
            faces,
            part_labels: None,
            uvs: None,
        },
        edges,
    })
}

/// Extracts the zero level set of the grid at its deformed vertex positions.
pub fn extract(grid: &TetGrid) -> Result<MtSurface> {
    let positions: Vec<Vec3> = (0..grid.verts.len() as u32).map(|v| grid.position(v)).collect();
    extract_tets(&positions, &grid.tets, &grid.sdf)
}

pub fn marching_tetrahedra(grid: &TetGrid) -> Result<TriMesh> {
    extract(grid).map(|s| s.mesh)
}

/// Derivatives of an edge crossing point with respect to the edge's parameters.
/// The offset derivatives are scalar multiples of the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeJacobian {
    pub d_sdf_a: Vec3,
    pub d_sdf_b: Vec3,
    pub d_offset_a: f64,
    pub d_offset_b: f64,
}

impl EdgeJacobian {
    pub fn at(pa: &Vec3, pb: &Vec3, sa: f64, sb: f64) -> Self {
        let d = sb - sa;
        let diff = pa - pb;
        EdgeJacobian {
            d_sdf_a: diff * (sb / (d * d)),
            d_sdf_b: diff * (-sa / (d * d)),
            d_offset_a: sb / d,
            d_offset_b: -sa / d,
        }
    }
}

pub fn mt_vertex_jacobian(grid: &TetGrid, edge: (u32, u32)) -> Result<EdgeJacobian> {
    let (a, b) = edge;
    let (sa, sb) = (grid.sdf[a as usize], grid.sdf[b as usize]);
    if inside(sa) == inside(sb) {
        return Err(Error::NoCrossing(a, b));
    }
    Ok(EdgeJacobian::at(&grid.position(a), &grid.position(b), sa, sb))
}

/// Chains a gradient on MT vertex positions into gradients on grid SDF values and offsets.
pub fn surface_backward(grid: &TetGrid, surface: &MtSurface, d_vertices: &[Vec3]) -> (Vec<f64>, Vec<Vec3>) {
    let mut d_sdf = vec![0.0; grid.verts.len()];
    let mut d_off = vec![Vec3::zeros(); grid.verts.len()];
    for (&(a, b), g) in surface.edges.iter().zip(d_vertices) {
        let (ai, bi) = (a as usize, b as usize);
        let j = EdgeJacobian::at(&grid.position(a), &grid.position(b), grid.sdf[ai], grid.sdf[bi]);
        d_sdf[ai] += j.d_sdf_a.dot(g);
        d_sdf[bi] += j.d_sdf_b.dot(g);
        d_off[ai] += g * j.d_offset_a;
        d_off[bi] += g * j.d_offset_b;
    }
    (d_sdf, d_off)
}
