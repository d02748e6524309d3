//! Signed distance to a closed triangle mesh.
//!
//! Magnitude is the exact point-triangle distance found through a BVH; the sign
//! comes from the generalized winding number (inside when > 0.5), evaluated with
//! a far-field dipole approximation for distant BVH nodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::mesh::TriMesh;

const LEAF_SIZE: usize = 8;
/// Nodes farther than this many radii use the dipole approximation.
const FAR_FIELD: f64 = 2.5;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: `start..end` into `order`. Interior: children at `left` and `left + 1`... see `kind`.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
    /// Σ ½ (b-a)×(c-a) over the node's triangles.
    vector_area: Vec3,
    /// Area-weighted centroid.
    center: Vec3,
    radius: f64,
}

/// Prebuilt acceleration structure for repeated signed-distance queries.
#[derive(Debug, Clone)]
pub struct SdfQuery {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Closest point to `p` on triangle `(a, b, c)`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Signed solid angle subtended by triangle `(a, b, c)` at `p`.
pub fn solid_angle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (a, b, c) = (a - p, b - p, c - p);
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * num.atan2(den)
}

impl SdfQuery {
    /// Builds the query structure; the mesh must be closed (every edge shared by two faces).
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let boundary = mesh.non_manifold_edge_count();
        if boundary > 0 || mesh.faces.is_empty() {
            return Err(Error::NotWatertight {
                boundary_edges: boundary,
            });
        }
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut q = SdfQuery {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        let n = q.tris.len();
        q.build(0, n);
        Ok(q)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        let mut vector_area = Vec3::zeros();
        let mut weighted = Vec3::zeros();
        let mut area = 0.0;
        for &t in &self.order[start..end] {
            let [a, b, c] = &self.tris[t];
            for p in [a, b, c] {
                bounds.grow(p);
            }
            let centroid = (a + b + c) / 3.0;
            cbounds.grow(&centroid);
            let va = (b - a).cross(&(c - a)) * 0.5;
            let ar = va.norm();
            vector_area += va;
            weighted += centroid * ar;
            area += ar;
        }
        let center = if area > 0.0 { weighted / area } else { bounds.center() };
        let radius = (0..8)
            .map(|i| {
                let corner = Vec3::new(
                    if i & 1 == 0 { bounds.min.x } else { bounds.max.x },
                    if i & 2 == 0 { bounds.min.y } else { bounds.max.y },
                    if i & 4 == 0 { bounds.min.z } else { bounds.max.z },
                );
                (corner - center).norm()
            })
            .fold(0.0, f64::max);
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            start,
            end,
            children: None,
            vector_area,
            center,
            radius,
        });
        if end - start > LEAF_SIZE {
            let ext = cbounds.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = (start + end) / 2;
            let tris = &self.tris;
            let key = |t: &usize| {
                let [a, b, c] = &tris[*t];
                a[axis] + b[axis] + c[axis]
            };
            self.order[start..end].select_nth_unstable_by(mid - start, |x, y| key(x).partial_cmp(&key(y)).unwrap());
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    /// Unsigned distance to the nearest triangle.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds.distance_squared(p) >= best {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    let dl = self.nodes[l].bounds.distance_squared(p);
                    let dr = self.nodes[r].bounds.distance_squared(p);
                    // Visit the nearer child first.
                    if dl < dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &t in &self.order[node.start..node.end] {
                        let [a, b, c] = &self.tris[t];
                        let d = (closest_point_on_triangle(p, a, b, c) - p).norm_squared();
                        if d < best {
                            best = d;
                        }
                    }
                }
            }
        }
        best.sqrt()
    }

    /// Generalized winding number of the mesh around `p`.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let d = node.center - p;
            let dist = d.norm();
            if dist > FAR_FIELD * node.radius {
                total += node.vector_area.dot(&d) / (dist * dist * dist);
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for &t in &self.order[node.start..node.end] {
                        let [a, b, c] = &self.tris[t];
                        total += solid_angle(p, a, b, c);
                    }
                }
            }
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Signed distance: negative inside, exactly zero on the surface.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let d = self.distance(p);
        if d == 0.0 {
            return 0.0;
        }
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }
}

/// A point with its ground-truth signed distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub p: Vec3,
    pub sdf_gt: f64,
}

/// Fraction of samples drawn near the surface; the rest are uniform in `bounds`.
pub const NEAR_SURFACE_FRACTION: f64 = 0.8;

/// Draws `n` points: area-weighted surface points displaced by isotropic Gaussian noise, then
/// uniform points in `bounds`. Displaced points falling outside `bounds` are redrawn.
pub fn sample_near_surface(mesh: &TriMesh, n: usize, sigma: f64, bounds: &Aabb, seed: u64) -> Result<Vec<SamplePoint>> {
    if n == 0 {
        return Err(Error::validation("samples", "n must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::validation("samples", format!("sigma {sigma} must be finite and >= 0")));
    }
    let query = SdfQuery::new(mesh)?;
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        let [a, b, c] = mesh.triangle(f);
        total += (b - a).cross(&(c - a)).norm() * 0.5;
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::EmptySurface);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let n_near = ((n as f64) * NEAR_SURFACE_FRACTION).round() as usize;
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while points.len() < n_near {
        attempts += 1;
        if attempts > 100 * n_near + 1000 {
            return Err(Error::validation("samples", "surface lies outside the sampling bounds"));
        }
        let r: f64 = rng.random::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= r).min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.triangle(f);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let mut p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        if sigma > 0.0 {
            p += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
        if bounds.contains(&p) {
            points.push(p);
        }
    }
    let ext = bounds.extent();
    while points.len() < n {
        let u = Vec3::new(rng.random(), rng.random(), rng.random());
        points.push(bounds.min + ext.component_mul(&u));
    }
    Ok(points
        .into_par_iter()
        .map(|p| SamplePoint {
            p,
            sdf_gt: query.signed_distance(&p),
        })
        .collect())
}

/// One-off signed distance query (builds the BVH each call; prefer [`SdfQuery`] for batches).
pub fn signed_distance(mesh: &TriMesh, p: &Vec3) -> Result<f64> {
    Ok(SdfQuery::new(mesh)?.signed_distance(p))
}
