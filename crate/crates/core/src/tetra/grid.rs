use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

/// Cube lattice split into Kuhn tetrahedra, carrying per-vertex SDF values and offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct TetGrid {
    pub resolution: usize,
    pub bounds: Aabb,
    pub verts: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    pub sdf: Vec<f64>,
    pub offsets: Vec<Vec3>,
    /// Per-axis bound on |offset| in world units.
    pub offset_bound: f64,
}

/// Six times the signed volume of `(a, b, c, d)`.
#[inline]
pub fn tet_signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a)))
}

/// Barycentric coordinates of `p` in tetrahedron `(a, b, c, d)`; `None` if degenerate.
#[inline]
pub fn barycentric(p: &Vec3, t: &[Vec3; 4]) -> Option<[f64; 4]> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let e3 = t[3] - t[0];
    let det = e1.dot(&e2.cross(&e3));
    if det == 0.0 {
        return None;
    }
    let r = p - t[0];
    let l1 = r.dot(&e2.cross(&e3)) / det;
    let l2 = e1.dot(&r.cross(&e3)) / det;
    let l3 = e1.dot(&e2.cross(&r)) / det;
    Some([1.0 - l1 - l2 - l3, l1, l2, l3])
}

/// Lattice over `bounds` with `resolution` cells per axis, 6 tetrahedra per cell around the main diagonal.
/// SDF starts at +1 (outside) and offsets at zero; the offset bound defaults to 0.45 cells.
pub fn build_grid(resolution: usize, bounds: Aabb) -> Result<TetGrid> {
    if resolution < 2 {
        return Err(Error::validation("grid", format!("resolution {resolution} < 2")));
    }
    if !bounds.is_valid() {
        return Err(Error::validation("grid", "bounds must have positive extent"));
    }
    let n = resolution;
    let m = n + 1;
    let cell = bounds.extent() / n as f64;
    let mut verts = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                verts.push(bounds.min + Vec3::new(i as f64 * cell.x, j as f64 * cell.y, k as f64 * cell.z));
            }
        }
    }
    let idx = |i: usize, j: usize, k: usize| (i + m * (j + m * k)) as u32;
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for (pi, perm) in PERMS.iter().enumerate() {
                    let mut c = [0usize; 3];
                    let v0 = idx(i, j, k);
                    c[perm[0]] = 1;
                    let v1 = idx(i + c[0], j + c[1], k + c[2]);
                    c[perm[1]] = 1;
                    let v2 = idx(i + c[0], j + c[1], k + c[2]);
                    let v3 = idx(i + 1, j + 1, k + 1);
                    // Odd permutations produce negatively oriented tets; swap to fix.
                    tets.push(if pi < 3 { [v0, v1, v2, v3] } else { [v0, v2, v1, v3] });
                }
            }
        }
    }
    let count = verts.len();
    Ok(TetGrid {
        resolution,
        bounds,
        verts,
        tets,
        sdf: vec![1.0; count],
        offsets: vec![Vec3::zeros(); count],
        offset_bound: 0.45 * cell.min(),
    })
}

impl TetGrid {
    pub fn cell_size(&self) -> Vec3 {
        self.bounds.extent() / self.resolution as f64
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    #[inline]
    pub fn position(&self, v: u32) -> Vec3 {
        self.verts[v as usize] + self.offsets[v as usize]
    }

    #[inline]
    pub fn tet_positions(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|v| self.position(v))
    }

    /// Six times the signed volume of deformed tet `t`.
    pub fn tet_volume6(&self, t: usize) -> f64 {
        let p = self.tet_positions(t);
        tet_signed_volume(&p[0], &p[1], &p[2], &p[3])
    }

    fn rest_volume6(&self) -> f64 {
        let c = self.cell_size();
        c.x * c.y * c.z
    }

    pub fn inverted_tets(&self) -> Vec<usize> {
        let floor = 1e-3 * self.rest_volume6();
        (0..self.tets.len()).filter(|&t| self.tet_volume6(t) <= floor).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.verts.len();
        if self.sdf.len() != n || self.offsets.len() != n {
            return Err(Error::validation("grid", "sdf/offset length differs from vertex count"));
        }
        if let Some(t) = self.tets.iter().position(|t| t.iter().any(|&v| v as usize >= n)) {
            return Err(Error::validation("grid", format!("tet {t} references a missing vertex")));
        }
        let tol = self.offset_bound * (1.0 + 1e-12);
        if let Some(v) = self.offsets.iter().position(|o| o.amax() > tol) {
            return Err(Error::validation("grid", format!("offset of vertex {v} exceeds the bound")));
        }
        if let Some(&t) = self.inverted_tets().first() {
            return Err(Error::validation("grid", format!("tet {t} is inverted")));
        }
        Ok(())
    }

    /// Clamps offsets to the bound, then shrinks offsets around inverted tets until none remain.
    pub fn project_offsets(&mut self) {
        let b = self.offset_bound;
        for o in &mut self.offsets {
            for k in 0..3 {
                o[k] = o[k].clamp(-b, b);
            }
        }
        for round in 0..40 {
            let bad = self.inverted_tets();
            if bad.is_empty() {
                return;
            }
            let factor = if round < 39 { 0.5 } else { 0.0 };
            let mut verts: Vec<u32> = bad.iter().flat_map(|&t| self.tets[t]).collect();
            verts.sort_unstable();
            verts.dedup();
            for v in verts {
                self.offsets[v as usize] *= factor;
            }
        }
    }

    /// Index of the lattice cell containing `p` (clamped to the grid).
    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        let c = self.cell_size();
        let n = self.resolution;
        std::array::from_fn(|k| (((p[k] - self.bounds.min[k]) / c[k]).floor().max(0.0) as usize).min(n - 1))
    }

    fn cell_tets(&self, cell: [usize; 3]) -> std::ops::Range<usize> {
        let n = self.resolution;
        let ci = cell[0] + n * (cell[1] + n * cell[2]);
        6 * ci..6 * ci + 6
    }

    /// Finds the deformed tet containing `p` and its barycentric coordinates.
    /// Falls back to the neighbouring cells, then to the best candidate, when offsets move the boundary.
    pub fn locate(&self, p: &Vec3) -> Option<(usize, [f64; 4])> {
        if !self.bounds.contains(p) {
            return None;
        }
        let home = self.cell_of(p);
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        let mut consider = |t: usize| -> bool {
            if let Some(l) = barycentric(p, &self.tet_positions(t)) {
                let worst = l.iter().cloned().fold(f64::INFINITY, f64::min);
                if worst >= -1e-12 {
                    best = Some((t, l, worst));
                    return true;
                }
                if best.is_none_or(|b| worst > b.2) {
                    best = Some((t, l, worst));
                }
            }
            false
        };
        for t in self.cell_tets(home) {
            if consider(t) {
                return best.map(|b| (b.0, b.1));
            }
        }
        let n = self.resolution as i64;
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let c = [home[0] as i64 + dx, home[1] as i64 + dy, home[2] as i64 + dz];
                    if c.iter().any(|&v| v < 0 || v >= n) {
                        continue;
                    }
                    for t in self.cell_tets(c.map(|v| v as usize)) {
                        if consider(t) {
                            return best.map(|b| (b.0, b.1));
                        }
                    }
                }
            }
        }
        best.map(|b| (b.0, b.1))
    }

    /// Barycentric SDF interpolation at `p`.
    pub fn interpolate(&self, p: &Vec3) -> Option<f64> {
        let (t, l) = self.locate(p)?;
        Some((0..4).map(|i| l[i] * self.sdf[self.tets[t][i] as usize]).sum())
    }

    /// Sets every vertex SDF from a field evaluated at the deformed vertex positions.
    pub fn set_sdf_from(&mut self, f: impl Fn(&Vec3) -> f64) {
        for i in 0..self.verts.len() {
            self.sdf[i] = f(&(self.verts[i] + self.offsets[i]));
        }
    }
}
