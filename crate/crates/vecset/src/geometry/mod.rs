//! Mesh ingestion, occupancy ground truth, point sampling, and marching
//! cubes surface extraction.
//!
//! All geometry lives in the unit box: meshes are normalized into
//! `[-1, 1]^3` (with padding) before anything downstream touches them, and
//! scalar grids cover the same volume.

mod marching;
mod mc_tables;
mod obj;
mod occupancy;
mod sampling;
pub(crate) mod vec3;

pub use marching::marching_cubes;
pub use obj::{load_obj, load_points_obj, save_obj};
pub use occupancy::{occupancy, occupancy_batch, occupancy_batch_seq, InsideTester};
pub use sampling::{fps, sample_queries, sample_surface, QuerySpec};

use crate::error::{Error, Result};
use std::collections::HashMap;
use vec3::*;

/// Watertight-capable triangle surface in unit-box coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates index ranges. Degenerate-triangle cleanup is the loader's
    /// job; this constructor only rejects out-of-range indices.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::data(format!(
                    "triangle {ti} references vertex out of range (have {n} vertices)"
                )));
            }
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// A mesh is closed when every undirected edge is shared by exactly two
    /// triangles. Holds for disjoint unions of closed components.
    pub fn is_closed(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts.values().all(|&c| c == 2)
    }

    pub fn bbox(&self) -> Result<([f64; 3], [f64; 3])> {
        if self.vertices.is_empty() {
            return Err(Error::data("bbox of empty mesh"));
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        Ok((lo, hi))
    }

    pub fn triangle_area(&self, ti: usize) -> f64 {
        let [a, b, c] = self.triangles[ti];
        let e1 = sub(self.vertices[b], self.vertices[a]);
        let e2 = sub(self.vertices[c], self.vertices[a]);
        0.5 * norm(cross(e1, e2))
    }

    /// Unit normal of a triangle's plane (orientation per vertex order).
    pub fn triangle_normal(&self, ti: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[ti];
        let e1 = sub(self.vertices[b], self.vertices[a]);
        let e2 = sub(self.vertices[c], self.vertices[a]);
        normalize(cross(e1, e2))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    /// Center at the origin and scale uniformly so the largest axis extent
    /// becomes `2 * padding`. Aspect ratio is preserved.
    pub fn normalize_to_bbox(&self, padding: f64) -> Result<TriangleMesh> {
        let (lo, hi) = self.bbox()?;
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        if extent <= 1e-12 {
            return Err(Error::data("normalize_to_bbox: mesh has zero extent"));
        }
        let s = 2.0 * padding / extent;
        let vertices = self
            .vertices
            .iter()
            .map(|v| [(v[0] - center[0]) * s, (v[1] - center[1]) * s, (v[2] - center[2]) * s])
            .collect();
        Ok(TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
        })
    }

    /// Disjoint union: concatenates vertex and triangle lists.
    pub fn merged(meshes: &[TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        for m in meshes {
            let base = out.vertices.len();
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles
                .extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        out
    }
}

/// N×3 coordinates with optional unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub normals: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        PointCloud {
            points,
            normals: None,
        }
    }

    pub fn with_normals(points: Vec<[f64; 3]>, normals: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::dimension(format!(
                "{} points vs {} normals",
                points.len(),
                normals.len()
            )));
        }
        #[cfg(debug_assertions)]
        for n in &normals {
            let len = norm(*n);
            if (len - 1.0).abs() > 1e-6 {
                return Err(Error::data(format!("normal of length {len} is not unit")));
            }
        }
        Ok(PointCloud {
            points,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset by indices; keeps normals when present.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
        }
    }
}

/// One occupancy observation: a query position and its binary label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancySample {
    pub position: [f64; 3],
    pub occupancy: bool,
}

/// R×R×R scalar samples on the regular lattice over `[-1, 1]^3`.
/// Index layout is x-major: `(ix * R + iy) * R + iz`.
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    resolution: usize,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::config(format!(
                "grid resolution must be >= 2, got {resolution}"
            )));
        }
        Ok(ScalarGrid {
            resolution,
            values: vec![0.0; resolution * resolution * resolution],
        })
    }

    pub fn from_fn(resolution: usize, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let mut grid = ScalarGrid::new(resolution)?;
        let r = resolution;
        for ix in 0..r {
            for iy in 0..r {
                for iz in 0..r {
                    let p = grid.position(ix, iy, iz);
                    grid.values[(ix * r + iy) * r + iz] = f(p);
                }
            }
        }
        Ok(grid)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Lattice spacing, `2 / (R - 1)`.
    pub fn spacing(&self) -> f64 {
        2.0 / (self.resolution - 1) as f64
    }

    pub fn position(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        let h = self.spacing();
        [
            -1.0 + ix as f64 * h,
            -1.0 + iy as f64 * h,
            -1.0 + iz as f64 * h,
        ]
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[(ix * self.resolution + iy) * self.resolution + iz]
    }

    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, v: f64) {
        self.values[(ix * self.resolution + iy) * self.resolution + iz] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// All lattice positions in index order; used for batched field queries.
    pub fn lattice_points(&self) -> Vec<[f64; 3]> {
        let r = self.resolution;
        let mut out = Vec::with_capacity(r * r * r);
        for ix in 0..r {
            for iy in 0..r {
                for iz in 0..r {
                    out.push(self.position(ix, iy, iz));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_cube() -> TriangleMesh {
        // 8 corners of [-0.5, 0.5]^3, 12 triangles, closed.
        crate::synth::box_mesh([1.0, 1.0, 1.0])
    }

    #[test]
    fn cube_is_closed_and_sheet_is_not() {
        let cube = unit_cube();
        assert!(cube.is_closed());
        let sheet = TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        assert!(!sheet.is_closed());
    }

    #[test]
    fn normalize_scales_cube_to_padded_box() {
        let mut cube = unit_cube();
        for v in &mut cube.vertices {
            for a in 0..3 {
                v[a] = (v[a] + 0.5) * 10.0; // [0, 10]^3
            }
        }
        let normed = cube.normalize_to_bbox(0.95).unwrap();
        let (lo, hi) = normed.bbox().unwrap();
        for a in 0..3 {
            assert!((lo[a] + 0.95).abs() < 1e-12);
            assert!((hi[a] - 0.95).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let cube = unit_cube();
        let once = cube.normalize_to_bbox(0.95).unwrap();
        let twice = once.normalize_to_bbox(0.95).unwrap();
        for (a, b) in once.vertices.iter().zip(&twice.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_preserves_aspect_ratio() {
        // 2x1x1 box: longest axis spans 1.9, others 0.95.
        let boxy = crate::synth::box_mesh([2.0, 1.0, 1.0]);
        let normed = boxy.normalize_to_bbox(0.95).unwrap();
        let (lo, hi) = normed.bbox().unwrap();
        assert!((hi[0] - lo[0] - 1.9).abs() < 1e-12);
        assert!((hi[1] - lo[1] - 0.95).abs() < 1e-12);
        assert!((hi[2] - lo[2] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_zero_extent() {
        let degenerate = TriangleMesh::new(
            vec![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(degenerate.normalize_to_bbox(0.95).is_err());
    }
}
