//! Semantic partition, per-part cylindrical unwrapping and shelf packing into one atlas.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::mesh::TriMesh;
use crate::raster::{ChartBox, GUTTER};

pub const LAYOUT_VERSION: u32 = 1;

/// Thresholds of the label heuristic, as fractions of the body bounding box.
///
/// Labels: 0 trunk, 1 left arm, 2 right arm, 3 left leg, 4 right leg (left is +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerConfig {
    /// Vertices below this fraction of the height are legs.
    pub leg_max_height: f64,
    /// Vertices above the legs whose |x − centre| exceeds this fraction of the
    /// half-width are arms.
    pub arm_min_side: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig {
            leg_max_height: 0.44,
            arm_min_side: 0.28,
        }
    }
}

/// Per-vertex labels from height bands and the side of the body.
pub fn heuristic_labels(mesh: &TriMesh, gamma: usize, cfg: &LabelerConfig) -> Result<Vec<u32>> {
    match gamma {
        1 => return Ok(vec![0; mesh.vertices.len()]),
        5 => {}
        _ => {
            return Err(Error::Config(format!(
                "the label heuristic produces 1 or 5 parts, not {gamma}; provide labels"
            )))
        }
    }
    let b = mesh.bounds();
    let (ext, c) = (b.extent(), b.center());
    if ext.x <= 0.0 || ext.y <= 0.0 {
        return Err(Error::validation("mesh", "flat bounding box"));
    }
    Ok(mesh
        .vertices
        .iter()
        .map(|p| {
            let h = (p.y - b.min.y) / ext.y;
            let side = (p.x - c.x) / (0.5 * ext.x);
            let left = p.x >= c.x;
            if h < cfg.leg_max_height {
                if left { 3 } else { 4 }
            } else if side.abs() > cfg.arm_min_side {
                if left { 1 } else { 2 }
            } else {
                0
            }
        })
        .collect())
}

/// One semantic component: a submesh and the input vertex/face it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub label: u32,
    pub mesh: TriMesh,
    pub source_vertices: Vec<u32>,
    pub source_faces: Vec<usize>,
}

/// Majority label of a face; with three distinct labels the lowest wins.
pub fn face_label(l: [u32; 3]) -> u32 {
    if l[0] == l[1] || l[0] == l[2] {
        l[0]
    } else if l[1] == l[2] {
        l[1]
    } else {
        l[0].min(l[1]).min(l[2])
    }
}

/// Splits `mesh` into `gamma` parts by per-vertex labels. Every face lands in
/// exactly one part; vertices on label boundaries are duplicated into each part
/// that uses them. Part vertices keep ascending input order.
pub fn partition(mesh: &TriMesh, gamma: usize, labels: &[u32]) -> Result<Vec<Part>> {
    if gamma == 0 {
        return Err(Error::Config("gamma must be at least 1".into()));
    }
    if labels.len() != mesh.vertices.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} vertices",
            labels.len(),
            mesh.vertices.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= gamma) {
        return Err(Error::validation("labels", format!("label {bad} is not below gamma = {gamma}")));
    }
    let mut faces_of = vec![Vec::new(); gamma];
    for (fi, f) in mesh.faces.iter().enumerate() {
        faces_of[face_label(f.map(|v| labels[v as usize])) as usize].push(fi);
    }
    faces_of
        .into_iter()
        .enumerate()
        .map(|(label, source_faces)| {
            let label = label as u32;
            if source_faces.is_empty() {
                return Err(Error::EmptyPart(label));
            }
            let mut source_vertices: Vec<u32> =
                source_faces.iter().flat_map(|&f| mesh.faces[f]).collect();
            source_vertices.sort_unstable();
            source_vertices.dedup();
            let local: HashMap<u32, u32> =
                source_vertices.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
            let faces = source_faces.iter().map(|&f| mesh.faces[f].map(|v| local[&v])).collect();
            let vertices = source_vertices.iter().map(|&v| mesh.vertices[v as usize]).collect();
            Ok(Part {
                label,
                mesh: TriMesh::new(vertices, faces)?,
                source_vertices,
                source_faces,
            })
        })
        .collect()
}

/// Unit eigenvector of the largest covariance eigenvalue, signed so that its
/// largest-magnitude component is positive.
pub fn principal_axis(points: &[Vec3]) -> Result<Vec3> {
    if points.is_empty() {
        return Err(Error::validation("part", "no vertices"));
    }
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let mut axis: Vec3 = eig.eigenvectors.column(k).into_owned();
    let big = axis.iamax();
    if axis[big] < 0.0 {
        axis = -axis;
    }
    Ok(axis.normalize())
}

/// A part with cylindrical UVs. Seam faces may reference duplicated vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct UvChart {
    pub label: u32,
    pub mesh: TriMesh,
    /// Per-vertex cylindrical coordinates; u exceeds 1 on seam duplicates.
    pub uvs: Vec<[f64; 2]>,
    /// Chart vertex -> part vertex.
    pub source: Vec<u32>,
    /// Approximate metric size `[arc length, height]` of the UV box.
    pub extent: [f64; 2],
}

/// Rotation taking `axis` to +y.
fn rotation_to_y(axis: &Vec3) -> Rotation3<f64> {
    Rotation3::rotation_between(axis, &Vec3::y())
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI))
}

/// Cylindrical projection about `axis` through the part centroid:
/// u = atan2(x', z')/2π + 0.5, v = normalized height along the rotated axis.
///
/// A face whose u values span more than half a turn gets the shift of its low
/// u values by +1 that minimizes its span; the shifted corners become new
/// vertices. Vertices on the axis take the mean u of the rest of each face.
pub fn cylinder_unwrap(part: &TriMesh, axis: Vec3) -> Result<UvChart> {
    if part.faces.is_empty() {
        return Err(Error::validation("part", "no faces"));
    }
    if (axis.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::validation("axis", format!("length {} is not 1", axis.norm())));
    }
    let rot = rotation_to_y(&axis);
    let centroid = part.vertices.iter().sum::<Vec3>() / part.vertices.len() as f64;
    let local: Vec<Vec3> = part.vertices.iter().map(|p| rot * (p - centroid)).collect();
    let bounds = Aabb::from_points(&local);
    let height = bounds.extent().y;
    let scale = bounds.extent().norm();
    if !(height > 1e-9 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::validation("part", "zero height along its axis"));
    }
    let radial: Vec<f64> = local.iter().map(|p| p.x.hypot(p.z)).collect();
    let r_max = radial.iter().cloned().fold(0.0, f64::max);
    let on_axis = |i: usize| radial[i] <= 1e-9 * r_max;
    let angle = |i: usize| local[i].x.atan2(local[i].z) / std::f64::consts::TAU + 0.5;
    let v_of = |i: usize| (local[i].y - bounds.min.y) / height;

    let mut index: HashMap<(u32, u64), u32> = HashMap::new();
    let mut source = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::with_capacity(part.faces.len());
    let (mut u_lo, mut u_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in &part.faces {
        let mut us = [f64::NAN; 3];
        let mut ring: Vec<(f64, usize)> = Vec::with_capacity(3);
        for k in 0..3 {
            if !on_axis(f[k] as usize) {
                ring.push((angle(f[k] as usize), k));
            }
        }
        ring.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = ring.len();
        if n > 0 {
            let span = |j: usize| {
                if j == 0 {
                    ring[n - 1].0 - ring[0].0
                } else {
                    ring[j - 1].0 + 1.0 - ring[j].0
                }
            };
            let best = (0..n).min_by(|&a, &b| span(a).total_cmp(&span(b)).then(a.cmp(&b))).unwrap();
            let best = if span(0) <= 0.5 { 0 } else { best };
            for (j, &(u, k)) in ring.iter().enumerate() {
                us[k] = if j < best { u + 1.0 } else { u };
            }
        }
        let fill = if n > 0 { ring.iter().map(|&(_, k)| us[k]).sum::<f64>() / n as f64 } else { 0.5 };
        let mut tri = [0u32; 3];
        for k in 0..3 {
            let u = if us[k].is_nan() { fill } else { us[k] };
            u_lo = u_lo.min(u);
            u_hi = u_hi.max(u);
            let vi = f[k];
            tri[k] = *index.entry((vi, u.to_bits())).or_insert_with(|| {
                source.push(vi);
                uvs.push([u, v_of(vi as usize)]);
                (uvs.len() - 1) as u32
            });
        }
        faces.push(tri);
    }
    let vertices = source.iter().map(|&i| part.vertices[i as usize]).collect();
    let mean_r = radial.iter().sum::<f64>() / radial.len() as f64;
    Ok(UvChart {
        label: 0,
        mesh: TriMesh::new(vertices, faces)?,
        uvs,
        source,
        extent: [(u_hi - u_lo) * std::f64::consts::TAU * mean_r, height],
    })
}

/// Placement of one chart in the packed atlas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartLayout {
    pub label: u32,
    #[serde(rename = "box")]
    pub chart_box: ChartBox,
    /// Half-open range of merged-mesh vertices belonging to this chart.
    pub vertices: [usize; 2],
    /// Half-open range of merged-mesh faces belonging to this chart.
    pub faces: [usize; 2],
}

/// The `layout.json` record of a packed atlas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasLayout {
    pub version: u32,
    pub atlas_size: usize,
    pub gutter: usize,
    pub charts: Vec<ChartLayout>,
}

impl AtlasLayout {
    pub fn chart_boxes(&self) -> Vec<ChartBox> {
        self.charts.iter().map(|c| c.chart_box).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let layout: AtlasLayout =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
        if layout.version != LAYOUT_VERSION {
            return Err(Error::format(path, 0, format!("unsupported layout version {}", layout.version)));
        }
        Ok(layout)
    }
}

/// Shelf placement of `dims` (width, height) in an atlas of `size`, tallest first.
/// Returns the boxes in input order and the shelf index of each, or `None` if
/// they do not fit.
fn shelf_pack(dims: &[(usize, usize)], size: usize) -> Option<(Vec<ChartBox>, Vec<usize>)> {
    let mut order: Vec<usize> = (0..dims.len()).collect();
    order.sort_by(|&a, &b| dims[b].1.cmp(&dims[a].1).then(a.cmp(&b)));
    let mut boxes = vec![ChartBox { x0: 0, y0: 0, x1: 0, y1: 0 }; dims.len()];
    let mut shelf_of = vec![0; dims.len()];
    let (mut x, mut y, mut shelf_h, mut shelf) = (GUTTER, GUTTER, 0, 0);
    for i in order {
        let (w, h) = dims[i];
        if w + 2 * GUTTER > size {
            return None;
        }
        if x + w + GUTTER > size {
            y += shelf_h + GUTTER;
            x = GUTTER;
            shelf_h = 0;
            shelf += 1;
        }
        boxes[i] = ChartBox { x0: x, y0: y, x1: x + w, y1: y + h };
        shelf_of[i] = shelf;
        x += w + GUTTER;
        shelf_h = shelf_h.max(h);
    }
    (y + shelf_h + GUTTER <= size).then_some((boxes, shelf_of))
}

/// Splits `[GUTTER, size − GUTTER)` into consecutive spans proportional to
/// `weights`, separated by gutters.
fn stretch(weights: &[usize], size: usize) -> Vec<(usize, usize)> {
    let usable = (size - GUTTER * (weights.len() + 1)) as f64;
    let total: usize = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len());
    let mut cum = 0;
    for (i, &w) in weights.iter().enumerate() {
        let a = (cum as f64 * usable / total as f64).floor() as usize;
        cum += w;
        let b = (cum as f64 * usable / total as f64).floor() as usize;
        let start = GUTTER * (i + 1) + a;
        out.push((start, start + (b - a)));
    }
    out
}

const MIN_CHART: usize = 2;

/// Assigns disjoint chart boxes with `GUTTER` texels between charts and around
/// the border. Boxes keep each chart's metric aspect during shelf packing, then
/// every shelf is stretched to fill the atlas width and shelves to fill its height.
pub fn chart_boxes(extents: &[[f64; 2]], size: usize) -> Result<Vec<ChartBox>> {
    if extents.is_empty() {
        return Err(Error::validation("atlas", "no charts to pack"));
    }
    let dims_at = |s: f64| -> Vec<(usize, usize)> {
        extents
            .iter()
            .map(|e| ((e[0] * s).ceil().max(MIN_CHART as f64) as usize, (e[1] * s).ceil().max(MIN_CHART as f64) as usize))
            .collect()
    };
    if shelf_pack(&dims_at(0.0), size).is_none() {
        return Err(Error::validation(
            "atlas",
            format!("{size} texels cannot hold {} charts with {GUTTER}-texel gutters", extents.len()),
        ));
    }
    let smallest = extents.iter().flat_map(|e| e.iter()).cloned().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, if smallest.is_finite() { 2.0 * size as f64 / smallest } else { 1.0 });
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shelf_pack(&dims_at(mid), size).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let dims = dims_at(lo);
    let (boxes, shelf_of) = shelf_pack(&dims, size).expect("feasible scale");
    let shelves = shelf_of.iter().max().unwrap() + 1;
    let heights: Vec<usize> =
        (0..shelves).map(|s| (0..dims.len()).filter(|&i| shelf_of[i] == s).map(|i| dims[i].1).max().unwrap()).collect();
    let rows = stretch(&heights, size);
    let mut out = boxes.clone();
    for (s, &(y0, y1)) in rows.iter().enumerate() {
        let mut members: Vec<usize> = (0..dims.len()).filter(|&i| shelf_of[i] == s).collect();
        members.sort_by_key(|&i| boxes[i].x0);
        let cols = stretch(&members.iter().map(|&i| dims[i].0).collect::<Vec<_>>(), size);
        for (&i, &(x0, x1)) in members.iter().zip(&cols) {
            out[i] = ChartBox { x0, y0, x1, y1 };
        }
    }
    Ok(out)
}

/// Packs unwrapped charts into one atlas: each chart's UV bounding box is mapped
/// onto its box inset by half a texel, so bilinear taps never leave the box.
/// The merged mesh carries final UVs and per-vertex part labels.
pub fn pack_atlas(charts: &[UvChart], atlas_size: usize) -> Result<(TriMesh, AtlasLayout)> {
    let extents: Vec<[f64; 2]> = charts.iter().map(|c| c.extent).collect();
    let boxes = chart_boxes(&extents, atlas_size)?;
    let s = atlas_size as f64;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    let mut labels = Vec::new();
    let mut layout = Vec::with_capacity(charts.len());
    for (chart, b) in charts.iter().zip(&boxes) {
        let chart_uvs = &chart.uvs;
        if chart_uvs.len() != chart.mesh.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "chart {} has {} UVs for {} vertices",
                chart.label,
                chart_uvs.len(),
                chart.mesh.vertices.len()
            )));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for uv in chart_uvs {
            for k in 0..2 {
                lo[k] = lo[k].min(uv[k]);
                hi[k] = hi[k].max(uv[k]);
            }
        }
        let norm = |x: f64, k: usize| if hi[k] > lo[k] { (x - lo[k]) / (hi[k] - lo[k]) } else { 0.5 };
        let base = vertices.len();
        let face_base = faces.len();
        let (w, h) = ((b.width() - 1) as f64, (b.height() - 1) as f64);
        for uv in chart_uvs {
            let u = (b.x0 as f64 + 0.5 + norm(uv[0], 0) * w) / s;
            let v = 1.0 - (b.y1 as f64 - 0.5 - norm(uv[1], 1) * h) / s;
            uvs.push([u, v]);
        }
        vertices.extend_from_slice(&chart.mesh.vertices);
        labels.extend(std::iter::repeat_n(chart.label, chart.mesh.vertices.len()));
        faces.extend(chart.mesh.faces.iter().map(|f| f.map(|i| i + base as u32)));
        layout.push(ChartLayout {
            label: chart.label,
            chart_box: *b,
            vertices: [base, vertices.len()],
            faces: [face_base, faces.len()],
        });
    }
    let mesh = TriMesh::new(vertices, faces)?.with_uvs(uvs)?.with_labels(labels)?;
    Ok((
        mesh,
        AtlasLayout {
            version: LAYOUT_VERSION,
            atlas_size,
            gutter: GUTTER,
            charts: layout,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnwrapConfig {
    pub gamma: usize,
    pub atlas_size: usize,
    pub labeler: LabelerConfig,
}

impl Default for UnwrapConfig {
    fn default() -> Self {
        UnwrapConfig {
            gamma: 5,
            atlas_size: 1024,
            labeler: LabelerConfig::default(),
        }
    }
}

/// Result of [`unwrap_mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct Unwrapped {
    pub mesh: TriMesh,
    pub layout: AtlasLayout,
    /// Merged-mesh vertex -> input vertex.
    pub source_vertices: Vec<u32>,
}

/// Partition, unwrap every part about its principal axis, and pack.
/// Without `labels` the height/side heuristic labels the vertices.
pub fn unwrap_mesh(mesh: &TriMesh, labels: Option<&[u32]>, cfg: &UnwrapConfig) -> Result<Unwrapped> {
    let owned;
    let labels = match labels {
        Some(l) => l,
        None => {
            owned = heuristic_labels(mesh, cfg.gamma, &cfg.labeler)?;
            &owned
        }
    };
    let parts = partition(mesh, cfg.gamma, labels)?;
    let charts = parts
        .par_iter()
        .map(|p| {
            let mut c = cylinder_unwrap(&p.mesh, principal_axis(&p.mesh.vertices)?)?;
            c.label = p.label;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let (packed, layout) = pack_atlas(&charts, cfg.atlas_size)?;
    let source_vertices = parts
        .iter()
        .zip(&charts)
        .flat_map(|(p, c)| c.source.iter().map(move |&i| p.source_vertices[i as usize]))
        .collect();
    Ok(Unwrapped {
        mesh: packed,
        layout,
        source_vertices,
    })
}
