use std::fmt::Write as _;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Resolves a 1-based (or negative, relative) OBJ index against `count` entries.
fn resolve(path: &Path, line: usize, token: &str, count: usize) -> Result<usize> {
    let i: i64 = token
        .parse()
        .map_err(|_| Error::format(path, line, format!("bad index '{token}'")))?;
    let idx = match i {
        0 => return Err(Error::format(path, line, "index 0 is invalid (OBJ indices are 1-based)")),
        i if i > 0 => i - 1,
        i => count as i64 + i,
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::format(path, line, format!("index {i} out of range ({count} defined)")));
    }
    Ok(idx as usize)
}

fn floats<const N: usize>(path: &Path, line: usize, mut it: std::str::SplitWhitespace<'_>) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for o in &mut out {
        let tok = it
            .next()
            .ok_or_else(|| Error::format(path, line, "missing coordinate"))?;
        *o = tok
            .parse()
            .map_err(|_| Error::format(path, line, format!("bad number '{tok}'")))?;
    }
    Ok(out)
}

pub fn parse(path: &Path, bytes: &[u8]) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(path, 0, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    let mut faces = Vec::new();
    let mut vertex_uv: Vec<Option<usize>> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut it = content.split_whitespace();
        match it.next() {
            Some("v") => {
                let [x, y, z] = floats::<3>(path, line, it)?;
                vertices.push(Vec3::new(x, y, z));
                vertex_uv.push(None);
            }
            Some("vt") => {
                let [u, v] = floats::<2>(path, line, it)?;
                texcoords.push([u, v]);
            }
            Some("f") => {
                let mut corners = Vec::with_capacity(4);
                for tok in it {
                    let mut parts = tok.split('/');
                    let vi = resolve(path, line, parts.next().unwrap_or(""), vertices.len())?;
                    if let Some(t) = parts.next().filter(|t| !t.is_empty()) {
                        let ti = resolve(path, line, t, texcoords.len())?;
                        match vertex_uv[vi] {
                            Some(prev) if texcoords[prev] != texcoords[ti] => {
                                return Err(Error::format(
                                    path,
                                    line,
                                    format!("vertex {} has conflicting texture coordinates", vi + 1),
                                ));
                            }
                            _ => vertex_uv[vi] = Some(ti),
                        }
                    }
                    corners.push(vi as u32);
                }
                if corners.len() < 3 {
                    return Err(Error::format(path, line, "face with fewer than 3 vertices"));
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }

    let uvs = if !texcoords.is_empty() && vertex_uv.iter().all(Option::is_some) {
        Some(vertex_uv.iter().map(|t| texcoords[t.unwrap()]).collect())
    } else {
        None
    };
    Ok(TriMesh {
        vertices,
        faces,
        part_labels: None,
        uvs,
    })
}

pub fn write(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 48 + mesh.faces.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    if let Some(uvs) = &mesh.uvs {
        for uv in uvs {
            let _ = writeln!(s, "vt {} {}", uv[0], uv[1]);
        }
        for f in &mesh.faces {
            let [a, b, c] = f.map(|i| i + 1);
            let _ = writeln!(s, "f {a}/{a} {b}/{b} {c}/{c}");
        }
    } else {
        for f in &mesh.faces {
            let [a, b, c] = f.map(|i| i + 1);
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}
