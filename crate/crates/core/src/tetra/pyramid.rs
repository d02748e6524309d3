//! Multiresolution parameterization of a per-vertex lattice field: the field is a
//! sum of prolonged coarser lattices (trilinear or tricubic B-spline), each scaled
//! by a per-level factor.

use serde::{Deserialize, Serialize};

/// How a per-vertex lattice field is parameterized during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FieldParam {
    /// One free value per lattice vertex.
    Direct,
    /// Sum of trilinearly prolonged lattices at resolutions halving from min(n, `finest`)
    /// (`finest` = 0 means n)
    /// down to `coarsest`, added to the starting field. The level k steps finer than the
    /// coarsest is scaled by `decay`^k.
    Multires { coarsest: usize, finest: usize, decay: f64 },
    /// As `Multires`, with uniform cubic B-spline levels (`r + 3` control points per
    /// axis at resolution r) in place of trilinear ones.
    Spline { coarsest: usize, finest: usize, decay: f64 },
}

/// Up to four (coarse index, weight) pairs per fine node; unused slots have weight 0.
type Taps = Vec<[(usize, f64); 4]>;

/// Linear interpolation taps from a fine 1D lattice of `n + 1` nodes onto a coarse one of `r + 1`.
fn linear_taps(n: usize, r: usize) -> Taps {
    (0..=n)
        .map(|i| {
            let x = i as f64 * r as f64 / n as f64;
            let i0 = (x.floor() as usize).min(r - 1);
            let t = x - i0 as f64;
            [(i0, 1.0 - t), (i0 + 1, t), (i0, 0.0), (i0, 0.0)]
        })
        .collect()
}

/// Cubic B-spline taps onto `r + 3` control points; control point j sits at knot j - 1.
fn cubic_taps(n: usize, r: usize) -> Taps {
    (0..=n)
        .map(|i| {
            let x = i as f64 * r as f64 / n as f64;
            let i0 = (x.floor() as usize).min(r - 1);
            let t = x - i0 as f64;
            let (t2, t3) = (t * t, t * t * t);
            [
                (i0, (1.0 - t).powi(3) / 6.0),
                (i0 + 1, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0),
                (i0 + 2, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0),
                (i0 + 3, t3 / 6.0),
            ]
        })
        .collect()
}

struct Level {
    resolution: usize,
    /// Control points per axis.
    size: usize,
    /// `None` for the identity level (resolution n, linear).
    taps: Option<Taps>,
    offset: usize,
    scale: f64,
}

/// Stack of lattices whose prolongations sum onto the fine lattice.
pub struct Pyramid {
    n: usize,
    levels: Vec<Level>,
    len: usize,
}

impl Pyramid {
    /// (resolution, coefficient offset) of level `i`, coarsest first.
    pub fn level(&self, i: usize) -> (usize, usize) {
        (self.levels[i].resolution, self.levels[i].offset)
    }

    pub fn for_param(n: usize, param: &FieldParam) -> Self {
        match *param {
            FieldParam::Direct => Pyramid::direct(n),
            FieldParam::Multires { coarsest, finest, decay } => Pyramid::build(n, coarsest, finest, decay, false),
            FieldParam::Spline { coarsest, finest, decay } => Pyramid::build(n, coarsest, finest, decay, true),
        }
    }

    pub fn direct(n: usize) -> Self {
        Pyramid::build(n, n, n, 1.0, false)
    }

    /// Trilinear levels.
    pub fn new(n: usize, coarsest: usize, finest: usize, decay: f64) -> Self {
        Pyramid::build(n, coarsest, finest, decay, false)
    }

    /// Cubic B-spline levels.
    pub fn spline(n: usize, coarsest: usize, finest: usize, decay: f64) -> Self {
        Pyramid::build(n, coarsest, finest, decay, true)
    }

    fn build(n: usize, coarsest: usize, finest: usize, decay: f64, cubic: bool) -> Self {
        let finest = if finest == 0 { n } else { finest };
        let mut rs = Vec::new();
        let mut r = n;
        loop {
            if r <= finest {
                rs.push(r);
            }
            if r / 2 < coarsest.max(1) || r % 2 != 0 {
                break;
            }
            r /= 2;
        }
        if rs.is_empty() {
            rs.push(r);
        }
        rs.reverse();
        let mut levels = Vec::new();
        let mut len = 0;
        for (i, r) in rs.into_iter().enumerate() {
            let (size, taps) = if cubic {
                (r + 3, Some(cubic_taps(n, r)))
            } else if r == n {
                (n + 1, None)
            } else {
                (r + 1, Some(linear_taps(n, r)))
            };
            levels.push(Level {
                resolution: r,
                size,
                taps,
                offset: len,
                scale: decay.powi(i as i32),
            });
            len += size.pow(3);
        }
        Pyramid { n, levels, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn prolong_add(&self, coeffs: &[f64], fine: &mut [f64]) {
        let m = self.n + 1;
        for l in &self.levels {
            let c = &coeffs[l.offset..l.offset + l.size.pow(3)];
            let Some(tp) = &l.taps else {
                for (f, v) in fine.iter_mut().zip(c) {
                    *f += l.scale * v;
                }
                continue;
            };
            let k = l.size;
            let a = interp_axis(c, [k, k, k], 0, tp);
            let b = interp_axis(&a, [m, k, k], 1, tp);
            let z = interp_axis(&b, [m, m, k], 2, tp);
            for (f, v) in fine.iter_mut().zip(&z) {
                *f += l.scale * v;
            }
        }
    }

    /// Transpose of `prolong_add`.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let m = self.n + 1;
        let mut out = vec![0.0; self.len];
        for l in &self.levels {
            let dst = &mut out[l.offset..l.offset + l.size.pow(3)];
            let Some(tp) = &l.taps else {
                for (d, f) in dst.iter_mut().zip(fine) {
                    *d = l.scale * f;
                }
                continue;
            };
            let k = l.size;
            let z = restrict_axis(fine, [m, m, m], 2, tp, k);
            let b = restrict_axis(&z, [m, m, k], 1, tp, k);
            let a = restrict_axis(&b, [m, k, k], 0, tp, k);
            for (d, v) in dst.iter_mut().zip(&a) {
                *d = l.scale * v;
            }
        }
        out
    }
}

fn strides(dims: [usize; 3]) -> [usize; 3] {
    [1, dims[0], dims[0] * dims[1]]
}

/// Interpolates along `axis` from `dims[axis]` coarse nodes to `tp.len()` fine nodes.
fn interp_axis(src: &[f64], dims: [usize; 3], axis: usize, tp: &[[(usize, f64); 4]]) -> Vec<f64> {
    let mut od = dims;
    od[axis] = tp.len();
    let (is, os) = (strides(dims), strides(od));
    let mut out = vec![0.0; od[0] * od[1] * od[2]];
    for z in 0..od[2] {
        for y in 0..od[1] {
            for x in 0..od[0] {
                let c = [x, y, z];
                let mut base = 0;
                for d in 0..3 {
                    if d != axis {
                        base += c[d] * is[d];
                    }
                }
                out[x * os[0] + y * os[1] + z * os[2]] =
                    tp[c[axis]].iter().map(|&(i, w)| w * src[base + i * is[axis]]).sum();
            }
        }
    }
    out
}

/// Transpose of [`interp_axis`]: scatters fine values back onto `coarse` nodes along `axis`.
fn restrict_axis(src: &[f64], dims: [usize; 3], axis: usize, tp: &[[(usize, f64); 4]], coarse: usize) -> Vec<f64> {
    let mut od = dims;
    od[axis] = coarse;
    let (is, os) = (strides(dims), strides(od));
    let mut out = vec![0.0; od[0] * od[1] * od[2]];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let c = [x, y, z];
                let v = src[x * is[0] + y * is[1] + z * is[2]];
                let mut base = 0;
                for d in 0..3 {
                    if d != axis {
                        base += c[d] * os[d];
                    }
                }
                for &(i, w) in &tp[c[axis]] {
                    out[base + i * os[axis]] += w * v;
                }
            }
        }
    }
    out
}
