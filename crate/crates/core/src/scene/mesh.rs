use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, RigidTransform, Vec3};

/// Smallest triangle area accepted, in m².
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in a local frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::scenario(format!("mesh vertex {i} is not finite")));
        }
        let n = vertices.len() as u32;
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&k| k >= n) {
                return Err(Error::scenario(format!("triangle {i} references a vertex out of range")));
            }
            let [a, b, c] = tri.map(|k| vertices[k as usize]);
            let area = 0.5 * (b - a).cross(c - a).norm();
            if !(area >= MIN_TRIANGLE_AREA) {
                return Err(Error::scenario(format!("triangle {i} is degenerate (area {area:e} m²)")));
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new(), triangles: Vec::new() }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| t.apply(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Appends `other`, re-indexing its triangles.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|k| k + base)));
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(center: Vec3, size: Vec3) -> Result<TriangleMesh> {
        if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) {
            return Err(Error::scenario(format!("box size must be positive, got {size:?}")));
        }
        let h = size * 0.5;
        let vertices = (0..8)
            .map(|i| {
                let sx = if i & 1 == 0 { -h.x } else { h.x };
                let sy = if i & 2 == 0 { -h.y } else { h.y };
                let sz = if i & 4 == 0 { -h.z } else { h.z };
                center + Vec3::new(sx, sy, sz)
            })
            .collect();
        let triangles = vec![
            [0, 2, 1],
            [1, 2, 3], // bottom
            [4, 5, 6],
            [5, 7, 6], // top
            [0, 1, 4],
            [1, 5, 4], // -y
            [2, 6, 3],
            [3, 6, 7], // +y
            [0, 4, 2],
            [2, 4, 6], // -x
            [1, 3, 5],
            [3, 7, 5], // +x
        ];
        TriangleMesh::new(vertices, triangles)
    }

    /// Two triangles tiling [-extent, extent]² at z = 0.
    pub fn ground_plane(extent: f64) -> Result<TriangleMesh> {
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::scenario(format!("ground extent must be positive, got {extent}")));
        }
        let e = extent;
        TriangleMesh::new(
            vec![Vec3::new(-e, -e, 0.0), Vec3::new(e, -e, 0.0), Vec3::new(e, e, 0.0), Vec3::new(-e, e, 0.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    /// Tapered two-box hatchback in vehicle frame: a 4.5×1.9×0.8 m body with
    /// 0.15 m ground clearance and a 2.4×1.7×0.7 m cabin set back from the nose,
    /// leaving a 1.85 m hood in front of the windscreen.
    pub fn hatchback() -> TriangleMesh {
        let mut mesh = TriangleMesh::cuboid(Vec3::new(0.0, 0.0, 0.55), Vec3::new(4.5, 1.9, 0.8)).expect("valid body");
        let cabin = TriangleMesh::cuboid(Vec3::new(-0.8, 0.0, 1.3), Vec3::new(2.4, 1.7, 0.7)).expect("valid cabin");
        mesh.merge(&cabin);
        mesh
    }

    /// Parses the `v`/`f` subset of Wavefront OBJ. Polygons are fan-triangulated,
    /// `v/vt/vn` face tokens use the vertex index and negative indices count from the end.
    pub fn parse_obj(text: &str, source_name: &str) -> Result<TriangleMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let loc = || format!("line {}", lineno + 1);
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("v") => {
                    let coords: Vec<f64> = tokens
                        .take(3)
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::parse(source_name, loc(), format!("bad vertex coordinate: {e}")))?;
                    if coords.len() != 3 {
                        return Err(Error::parse(source_name, loc(), "vertex needs 3 coordinates"));
                    }
                    vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in tokens {
                        let head = tok.split('/').next().unwrap_or("");
                        let raw: i64 = head
                            .parse()
                            .map_err(|e| Error::parse(source_name, loc(), format!("bad face index {tok:?}: {e}")))?;
                        let n = vertices.len() as i64;
                        let k = if raw > 0 { raw - 1 } else { n + raw };
                        if raw == 0 || k < 0 || k >= n {
                            return Err(Error::parse(source_name, loc(), format!("face index {raw} out of range")));
                        }
                        idx.push(k as u32);
                    }
                    if idx.len() < 3 {
                        return Err(Error::parse(source_name, loc(), "face needs at least 3 vertices"));
                    }
                    for i in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[i], idx[i + 1]]);
                    }
                }
                _ => {}
            }
        }
        TriangleMesh::new(vertices, triangles).map_err(|e| Error::parse(source_name, "mesh", e.to_string()))
    }

    pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TriangleMesh::parse_obj(&text, &path.display().to_string())
    }
}
