use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Point3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error reading mesh: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    BadIndex { face: usize, index: usize, count: usize },
    #[error("unsupported mesh extension {0:?} (expected .stl or .obj)")]
    UnsupportedFormat(String),
}

/// Triangle mesh with outward face normals taken from counter-clockwise
/// winding. Zero-area triangles are dropped on construction.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Vec<Point3>,
    pub areas: Vec<f64>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let count = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for (face, tri) in triangles.into_iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::BadIndex { face, index, count });
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let cross = (b - a).cross(&(c - a));
            let norm = cross.norm();
            if norm <= 0.0 || !norm.is_finite() {
                continue;
            }
            kept.push(tri);
            normals.push(cross / norm);
            areas.push(0.5 * norm);
        }
        Ok(Self {
            vertices,
            triangles: kept,
            normals,
            areas,
        })
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, face: usize) -> [Point3; 3] {
        self.triangles[face].map(|i| self.vertices[i])
    }

    pub fn centroid(&self, face: usize) -> Point3 {
        let [a, b, c] = self.corners(face);
        (a + b + c) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Area-weighted mean face normal (unit), or `None` for an empty mesh.
    pub fn mean_normal(&self) -> Option<Point3> {
        let sum: Point3 = self
            .normals
            .iter()
            .zip(&self.areas)
            .map(|(n, a)| n * *a)
            .sum();
        (sum.norm() > 0.0).then(|| sum.normalize())
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("stl") => Self::from_stl_ascii(&text),
            Some("obj") => Self::from_obj(&text),
            other => Err(MeshError::UnsupportedFormat(other.unwrap_or("").to_string())),
        }
    }

    /// Parses an ASCII STL solid. Facet normals in the file are ignored in
    /// favour of the vertex winding.
    pub fn from_stl_ascii(text: &str) -> Result<Self, MeshError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut pending: Vec<usize> = Vec::with_capacity(3);
        let mut saw_solid = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let mut tok = raw.split_whitespace();
            match tok.next() {
                Some("solid") => saw_solid = true,
                Some("vertex") => {
                    let xyz = parse_floats::<3>(tok, line)?;
                    vertices.push(Vector3::from(xyz));
                    pending.push(vertices.len() - 1);
                }
                Some("endloop") => {
                    if pending.len() != 3 {
                        return Err(MeshError::Parse {
                            line,
                            message: format!("facet has {} vertices, expected 3", pending.len()),
                        });
                    }
                    triangles.push([pending[0], pending[1], pending[2]]);
                    pending.clear();
                }
                Some("facet") | Some("outer") | Some("endfacet") | Some("endsolid") | None => {}
                Some(other) => {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("unexpected keyword {other:?}"),
                    })
                }
            }
        }
        if !saw_solid && !text.trim().is_empty() {
            return Err(MeshError::Parse {
                line: 1,
                message: "missing 'solid' header".into(),
            });
        }
        Self::new(vertices, triangles)
    }

    /// Parses the `v` and `f` records of a Wavefront OBJ file. Polygonal
    /// faces are fan-triangulated; texture and normal indices are ignored.
    pub fn from_obj(text: &str) -> Result<Self, MeshError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let mut tok = raw.split_whitespace();
            match tok.next() {
                Some("v") => {
                    let xyz = parse_floats::<3>(tok, line)?;
                    vertices.push(Vector3::from(xyz));
                }
                Some("f") => {
                    let mut ids = Vec::new();
                    for t in tok {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| MeshError::Parse {
                            line,
                            message: format!("bad face index {t:?}"),
                        })?;
                        let resolved = if i > 0 {
                            (i - 1) as usize
                        } else if i < 0 && (-i) as usize <= vertices.len() {
                            vertices.len() - (-i) as usize
                        } else {
                            return Err(MeshError::Parse {
                                line,
                                message: format!("face index {i} out of range"),
                            });
                        };
                        ids.push(resolved);
                    }
                    if ids.len() < 3 {
                        return Err(MeshError::Parse {
                            line,
                            message: "face with fewer than 3 vertices".into(),
                        });
                    }
                    for k in 1..ids.len() - 1 {
                        triangles.push([ids[0], ids[k], ids[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn to_stl_ascii(&self) -> String {
        let mut out = String::from("solid mesh\n");
        for (f, n) in self.normals.iter().enumerate() {
            let _ = writeln!(out, "facet normal {} {} {}\n outer loop", n.x, n.y, n.z);
            for v in self.corners(f) {
                let _ = writeln!(out, "  vertex {} {} {}", v.x, v.y, v.z);
            }
            out.push_str(" endloop\nendfacet\n");
        }
        out.push_str("endsolid mesh\n");
        out
    }

    pub fn transformed(&self, f: impl Fn(&Point3) -> Point3) -> Self {
        let vertices = self.vertices.iter().map(f).collect();
        Self::new(vertices, self.triangles.clone()).expect("indices already validated")
    }

    /// Upper hemisphere of `radius` centred at `center` (dome toward +z),
    /// built from `rings` latitude bands and `segments` longitudes.
    pub fn hemisphere(center: Point3, radius: f64, rings: usize, segments: usize) -> Self {
        let mut vertices = vec![center + Vector3::new(0.0, 0.0, radius)];
        for i in 1..=rings {
            let polar = (i as f64) * (PI / 2.0) / rings as f64;
            for j in 0..segments {
                let az = 2.0 * PI * j as f64 / segments as f64;
                vertices.push(
                    center
                        + radius
                            * Vector3::new(polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()),
                );
            }
        }
        let ring = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);
        let mut triangles = Vec::new();
        for j in 0..segments {
            triangles.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for i in 1..rings {
            for j in 0..segments {
                let (a, b) = (ring(i, j), ring(i, j + 1));
                let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        Self::new(vertices, triangles).expect("generated indices are valid")
    }

    /// Square plate in the `z = height` plane facing +z, split into
    /// `divisions × divisions` cells.
    pub fn plate(half_size: f64, height: f64, divisions: usize) -> Self {
        let n = divisions.max(1);
        let step = 2.0 * half_size / n as f64;
        let mut vertices = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                vertices.push(Vector3::new(
                    -half_size + i as f64 * step,
                    -half_size + j as f64 * step,
                    height,
                ));
            }
        }
        let id = |i: usize, j: usize| i * (n + 1) + j;
        let mut triangles = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(vertices, triangles).expect("generated indices are valid")
    }

    /// Ledge: a horizontal shelf (`z = 0`, `x ≤ 0`) meeting a vertical face
    /// (`x = 0`, `z ≤ 0`) at a rounded edge of radius `edge_radius`.
    /// `width` is the extent along y, `depth` the extent of each face.
    pub fn ledge(depth: f64, width: f64, edge_radius: f64, divisions: usize, arc_segments: usize) -> Self {
        // profile in the x-z plane, walking from the back of the shelf over
        // the edge and down the face; outward side is +x/+z
        let mut profile: Vec<(f64, f64)> = Vec::new();
        let n = divisions.max(1);
        for i in 0..=n {
            let x = -depth + (depth - edge_radius) * i as f64 / n as f64;
            profile.push((x, 0.0));
        }
        let (cx, cz) = (-edge_radius, -edge_radius);
        for k in 1..arc_segments {
            let ang = (PI / 2.0) * k as f64 / arc_segments as f64;
            profile.push((cx + edge_radius * ang.sin(), cz + edge_radius * ang.cos()));
        }
        for i in 0..=n {
            let z = -edge_radius - (depth - edge_radius) * i as f64 / n as f64;
            profile.push((0.0, z));
        }
        let m = n.max(1);
        let mut vertices = Vec::new();
        for j in 0..=m {
            let y = -width / 2.0 + width * j as f64 / m as f64;
            for &(x, z) in &profile {
                vertices.push(Vector3::new(x, y, z));
            }
        }
        let p = profile.len();
        let id = |j: usize, k: usize| j * p + k;
        let mut triangles = Vec::new();
        for j in 0..m {
            for k in 0..p - 1 {
                triangles.push([id(j, k), id(j, k + 1), id(j + 1, k + 1)]);
                triangles.push([id(j, k), id(j + 1, k + 1), id(j + 1, k)]);
            }
        }
        Self::new(vertices, triangles).expect("generated indices are valid")
    }
}

fn parse_floats<'a, const N: usize>(
    mut tok: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<[f64; N], MeshError> {
    let mut out = [0.0f64; N];
    for slot in out.iter_mut() {
        let t = tok.next().ok_or_else(|| MeshError::Parse {
            line,
            message: format!("expected {N} coordinates"),
        })?;
        *slot = t.parse().map_err(|_| MeshError::Parse {
            line,
            message: format!("bad number {t:?}"),
        })?;
        if !slot.is_finite() {
            return Err(MeshError::Parse {
                line,
                message: format!("non-finite coordinate {t:?}"),
            });
        }
    }
    Ok(out)
}

/// Uniform bucket grid over triangle bounding boxes for segment queries.
#[derive(Clone, Debug)]
pub struct MeshGrid {
    origin: Point3,
    cell: f64,
    dims: [usize; 3],
    buckets: HashMap<[usize; 3], Vec<usize>>,
}

impl MeshGrid {
    pub fn new(mesh: &TriMesh, cell: f64) -> Self {
        let (lo, hi) = mesh
            .bounds()
            .unwrap_or((Vector3::zeros(), Vector3::zeros()));
        let dims = [0, 1, 2].map(|k| (((hi[k] - lo[k]) / cell).floor() as usize) + 1);
        let mut grid = Self {
            origin: lo,
            cell,
            dims,
            buckets: HashMap::new(),
        };
        for f in 0..mesh.len() {
            let [a, b, c] = mesh.corners(f);
            let (tlo, thi) = (a.inf(&b).inf(&c), a.sup(&b).sup(&c));
            let (i0, i1) = (grid.index_of(&tlo), grid.index_of(&thi));
            for i in i0[0]..=i1[0] {
                for j in i0[1]..=i1[1] {
                    for k in i0[2]..=i1[2] {
                        grid.buckets.entry([i, j, k]).or_default().push(f);
                    }
                }
            }
        }
        grid
    }

    fn index_of(&self, p: &Point3) -> [usize; 3] {
        [0, 1, 2].map(|k| {
            let v = ((p[k] - self.origin[k]) / self.cell).floor();
            v.clamp(0.0, (self.dims[k] - 1) as f64) as usize
        })
    }

    /// Faces whose bounding boxes share a bucket with the box `[lo, hi]`
    /// inflated by `pad`. Sorted and deduplicated.
    pub fn candidates(&self, lo: &Point3, hi: &Point3, pad: f64, out: &mut Vec<usize>) {
        out.clear();
        let pad_v = Vector3::repeat(pad);
        let (qlo, qhi) = (lo - pad_v, hi + pad_v);
        for k in 0..3 {
            let max_edge = self.origin[k] + self.cell * self.dims[k] as f64;
            if qhi[k] < self.origin[k] || qlo[k] > max_edge {
                return;
            }
        }
        let (i0, i1) = (self.index_of(&qlo), self.index_of(&qhi));
        for i in i0[0]..=i1[0] {
            for j in i0[1]..=i1[1] {
                for k in i0[2]..=i1[2] {
                    if let Some(b) = self.buckets.get(&[i, j, k]) {
                        out.extend_from_slice(b);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hemisphere_is_outward_and_close_to_analytic_area() {
        let m = TriMesh::hemisphere(Vector3::zeros(), 1.0, 24, 64);
        for f in 0..m.len() {
            assert!(m.normals[f].dot(&m.centroid(f)) > 0.0, "face {f} points inward");
        }
        assert_relative_eq!(m.total_area(), 2.0 * PI, max_relative = 0.01);
    }

    #[test]
    fn ledge_and_plate_normals_point_out() {
        let p = TriMesh::plate(1.0, 0.0, 4);
        assert!(p.normals.iter().all(|n| (n.z - 1.0).abs() < 1e-12));
        assert_relative_eq!(p.total_area(), 4.0, epsilon = 1e-12);
        let l = TriMesh::ledge(0.1, 0.1, 0.01, 5, 6);
        for f in 0..l.len() {
            let n = l.normals[f];
            assert!(n.x >= -1e-9 && n.z >= -1e-9, "face {f} normal {n:?}");
        }
    }

    #[test]
    fn obj_and_stl_parse() {
        let m = TriMesh::hemisphere(Vector3::new(0.1, 0.2, 0.3), 0.5, 4, 8);
        let back = TriMesh::from_obj(&m.to_obj()).unwrap();
        assert_eq!(back.len(), m.len());
        let stl = TriMesh::from_stl_ascii(&m.to_stl_ascii()).unwrap();
        assert_eq!(stl.len(), m.len());
        assert_relative_eq!(stl.total_area(), m.total_area(), epsilon = 1e-12);
        let quad = TriMesh::from_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(quad.len(), 2);
        assert!(matches!(
            TriMesh::from_obj("v 0 0 0\nf 1 2 3\n"),
            Err(MeshError::BadIndex { index: 1, .. })
        ));
        assert!(matches!(
            TriMesh::from_stl_ascii("solid x\n vertex 0 0\n"),
            Err(MeshError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn degenerate_faces_dropped() {
        let m = TriMesh::new(
            vec![Vector3::zeros(), Vector3::x(), Vector3::x() * 2.0, Vector3::y()],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert!(TriMesh::new(vec![Vector3::zeros()], vec![[0, 0, 5]]).is_err());
    }

    #[test]
    fn grid_candidates_cover_brute_force_hits() {
        let m = TriMesh::hemisphere(Vector3::zeros(), 1.0, 8, 16);
        let grid = MeshGrid::new(&m, 0.2);
        let (p0, p1) = (Vector3::new(-2.0, 0.1, 0.5), Vector3::new(2.0, 0.1, 0.5));
        let mut cand = Vec::new();
        grid.candidates(&p0.inf(&p1), &p0.sup(&p1), 0.0, &mut cand);
        for f in 0..m.len() {
            let [a, b, c] = m.corners(f);
            if super::super::segment_triangle_intersection(&p0, &p1, &a, &b, &c).is_some() {
                assert!(cand.contains(&f));
            }
        }
    }
}
