//! Indexed triangle meshes.

mod normals;
pub mod obj;
pub mod ply;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

pub use normals::{face_normal, vertex_normals, vertex_normals_backward};

/// Indexed triangle mesh with optional per-vertex part labels and UVs.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub part_labels: Option<Vec<u32>>,
    pub uvs: Option<Vec<[f64; 2]>>,
}

impl TriMesh {
    /// Builds a mesh and checks its invariants.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            faces,
            part_labels: None,
            uvs: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_uvs(mut self, uvs: Vec<[f64; 2]>) -> Result<Self> {
        self.uvs = Some(uvs);
        self.validate()?;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        self.part_labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::validation("mesh", format!("vertex {i} is not finite")));
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= n) {
                return Err(Error::validation(
                    "mesh",
                    format!("face {fi} references a vertex index >= {n}"),
                ));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::validation("mesh", format!("face {fi} is degenerate {f:?}")));
            }
        }
        if let Some(labels) = &self.part_labels {
            if labels.len() != n {
                return Err(Error::validation(
                    "mesh",
                    format!("{} part labels for {n} vertices", labels.len()),
                ));
            }
        }
        if let Some(uvs) = &self.uvs {
            if uvs.len() != n {
                return Err(Error::validation("mesh", format!("{} uvs for {n} vertices", uvs.len())));
            }
            if let Some(i) = uvs
                .iter()
                .position(|uv| !uv.iter().all(|c| (0.0..=1.0).contains(c)))
            {
                return Err(Error::validation("mesh", format!("uv {i} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Undirected edge -> number of incident faces.
    pub fn edge_valence(&self) -> HashMap<(u32, u32), u32> {
        let mut edges = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Number of edges used by exactly one face.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_valence().values().filter(|&&c| c == 1).count()
    }

    /// Edges used by exactly one or more than two faces.
    pub fn non_manifold_edge_count(&self) -> usize {
        self.edge_valence().values().filter(|&&c| c != 2).count()
    }

    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.non_manifold_edge_count() == 0
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        let used: std::collections::HashSet<u32> = self.faces.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_valence().len() as i64 + self.faces.len() as i64
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// One-ring neighbours of every vertex, sorted and deduplicated.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nbrs[a as usize].push(b);
                nbrs[b as usize].push(a);
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }

    /// Splits the face set into edge-connected components (face indices per component).
    pub fn face_components(&self) -> Vec<Vec<usize>> {
        let mut by_edge: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let mut comp = vec![usize::MAX; self.faces.len()];
        let mut out = Vec::new();
        for seed in 0..self.faces.len() {
            if comp[seed] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![seed];
            comp[seed] = id;
            let mut i = 0;
            while i < members.len() {
                let f = self.faces[members[i]];
                for k in 0..3 {
                    let (a, b) = (f[k], f[(k + 1) % 3]);
                    for &g in &by_edge[&(a.min(b), a.max(b))] {
                        if comp[g] == usize::MAX {
                            comp[g] = id;
                            members.push(g);
                        }
                    }
                }
                i += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct LabelFile {
    labels: Vec<u32>,
}

/// Sidecar path holding part labels for a mesh file: `body.obj` -> `body.labels.json`.
pub fn labels_path(mesh_path: &Path) -> PathBuf {
    mesh_path.with_extension("labels.json")
}

pub fn load_labels(path: &Path) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: LabelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
    Ok(file.labels)
}

pub fn save_labels(labels: &[u32], path: &Path) -> Result<()> {
    let text = serde_json::to_string(&LabelFile {
        labels: labels.to_vec(),
    })
    .expect("labels serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads an OBJ or PLY mesh, picking up a `.labels.json` sidecar when present.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = match extension(path).as_str() {
        "obj" => obj::parse(path, &bytes)?,
        "ply" => ply::parse(path, &bytes)?,
        other => {
            return Err(Error::format(path, 0, format!("unknown mesh extension '{other}'")));
        }
    };
    let sidecar = labels_path(path);
    if sidecar.exists() {
        mesh.part_labels = Some(load_labels(&sidecar)?);
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Writes OBJ (text) or PLY (binary little-endian) by extension; labels go to the sidecar.
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    mesh.validate()?;
    let bytes = match extension(path).as_str() {
        "obj" => obj::write(mesh).into_bytes(),
        "ply" => ply::write(mesh),
        other => {
            return Err(Error::format(path, 0, format!("unknown mesh extension '{other}'")));
        }
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    if let Some(labels) = &mesh.part_labels {
        save_labels(labels, &labels_path(path))?;
    }
    Ok(())
}
