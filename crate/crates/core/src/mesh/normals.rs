//! Angle-weighted vertex normals and their reverse-mode derivative.

use super::TriMesh;
use crate::math::Vec3;

/// Unit normal of a triangle (zero for degenerate triangles).
pub fn face_normal(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vec3::zeros()
    }
}

fn corner_angle(p: &Vec3, q: &Vec3, r: &Vec3) -> f64 {
    let a = q - p;
    let b = r - p;
    a.cross(&b).norm().atan2(a.dot(&b))
}

/// Unnormalized sums `Σ θ_corner · n_face` per vertex.
fn accumulate(mesh: &TriMesh) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); mesh.vertices.len()];
    for f in &mesh.faces {
        let p = f.map(|i| mesh.vertices[i as usize]);
        let n = face_normal(&p[0], &p[1], &p[2]);
        for k in 0..3 {
            let theta = corner_angle(&p[k], &p[(k + 1) % 3], &p[(k + 2) % 3]);
            acc[f[k] as usize] += n * theta;
        }
    }
    acc
}

/// Angle-weighted unit vertex normals. Isolated vertices get a zero normal.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec3> {
    accumulate(mesh)
        .into_iter()
        .map(|u| {
            let len = u.norm();
            if len > 0.0 {
                u / len
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}

/// Pulls a gradient on the unit vertex normals back onto vertex positions.
pub fn vertex_normals_backward(mesh: &TriMesh, d_normals: &[Vec3]) -> Vec<Vec3> {
    let acc = accumulate(mesh);
    let mut d_acc = vec![Vec3::zeros(); acc.len()];
    for (i, (u, g)) in acc.iter().zip(d_normals).enumerate() {
        let len = u.norm();
        if len > 0.0 {
            let n = u / len;
            d_acc[i] = (g - n * n.dot(g)) / len;
        }
    }

    let mut d_pos = vec![Vec3::zeros(); mesh.vertices.len()];
    for f in &mesh.faces {
        let idx = f.map(|i| i as usize);
        if idx.iter().all(|&i| d_acc[i] == Vec3::zeros()) {
            continue;
        }
        let p = idx.map(|i| mesh.vertices[i]);
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let c = e1.cross(&e2);
        let area2 = c.norm();
        if area2 == 0.0 {
            continue;
        }
        let n = c / area2;

        let mut d_n = Vec3::zeros();
        for k in 0..3 {
            let (p0, p1, p2) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let a = p1 - p0;
            let b = p2 - p0;
            let theta = a.cross(&b).norm().atan2(a.dot(&b));
            let g = d_acc[idx[k]];
            d_n += g * theta;

            let d_theta = g.dot(&n);
            if d_theta != 0.0 {
                let (la, lb) = (a.norm(), b.norm());
                let ah = a / la;
                let bh = b / lb;
                let b_perp = b - ah * ah.dot(&b);
                let a_perp = a - bh * bh.dot(&a);
                let (nb, na) = (b_perp.norm(), a_perp.norm());
                if nb > 0.0 && na > 0.0 {
                    let d_a = -(b_perp / nb) / la * d_theta;
                    let d_b = -(a_perp / na) / lb * d_theta;
                    d_pos[idx[(k + 1) % 3]] += d_a;
                    d_pos[idx[(k + 2) % 3]] += d_b;
                    d_pos[idx[k]] -= d_a + d_b;
                }
            }
        }

        let d_c = (d_n - n * n.dot(&d_n)) / area2;
        let d_e1 = e2.cross(&d_c);
        let d_e2 = d_c.cross(&e1);
        d_pos[idx[1]] += d_e1;
        d_pos[idx[2]] += d_e2;
        d_pos[idx[0]] -= d_e1 + d_e2;
    }
    d_pos
}
