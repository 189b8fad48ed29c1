//! Marching cubes isosurface extraction with the standard 256-case tables
//! and linear edge interpolation. Vertices are deduplicated per lattice
//! edge, so sign-consistent fields extract as closed meshes.

use std::collections::HashMap;

use super::mc_tables::{EDGE_TABLE, TRI_TABLE};
use super::{ScalarGrid, TriangleMesh};
use crate::error::Result;

/// Cube corner offsets in the Bourke convention: 0-3 on the lower z layer
/// counterclockwise, 4-7 above them.
const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Edge endpoints as corner-index pairs.
const EDGE_CORNERS: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Extract the `iso` level set of a scalar grid over `[-1,1]^3`.
/// An all-positive or all-negative grid yields an empty mesh.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<TriangleMesh> {
    let r = grid.resolution();
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // Shared vertex per lattice edge: key = (corner lattice index, axis).
    let mut edge_vertex: HashMap<(usize, u8), usize> = HashMap::new();
    let lattice_index = |x: usize, y: usize, z: usize| (x * r + y) * r + z;

    for cx in 0..r - 1 {
        for cy in 0..r - 1 {
            for cz in 0..r - 1 {
                let mut corner_val = [0.0; 8];
                let mut cube_index = 0usize;
                for (ci, off) in CORNER_OFFSETS.iter().enumerate() {
                    let v = grid.get(cx + off[0], cy + off[1], cz + off[2]);
                    corner_val[ci] = v;
                    if v < iso {
                        cube_index |= 1 << ci;
                    }
                }
                if EDGE_TABLE[cube_index] == 0 {
                    continue;
                }
                // resolve the intersected edges to shared vertex ids
                let mut edge_ids = [usize::MAX; 12];
                for (ei, corners) in EDGE_CORNERS.iter().enumerate() {
                    if EDGE_TABLE[cube_index] & (1 << ei) == 0 {
                        continue;
                    }
                    let oa = CORNER_OFFSETS[corners[0]];
                    let ob = CORNER_OFFSETS[corners[1]];
                    let ga = [cx + oa[0], cy + oa[1], cz + oa[2]];
                    let gb = [cx + ob[0], cy + ob[1], cz + ob[2]];
                    // canonical key: lower lattice endpoint + axis of the edge
                    let axis = (0..3).find(|&a| ga[a] != gb[a]).expect("distinct corners");
                    let lower = if ga[axis] < gb[axis] { ga } else { gb };
                    let key = (lattice_index(lower[0], lower[1], lower[2]), axis as u8);
                    let id = *edge_vertex.entry(key).or_insert_with(|| {
                        let (va, vb) = (corner_val[corners[0]], corner_val[corners[1]]);
                        let pa = grid.position(ga[0], ga[1], ga[2]);
                        let pb = grid.position(gb[0], gb[1], gb[2]);
                        let t = if (vb - va).abs() < 1e-300 {
                            0.5
                        } else {
                            ((iso - va) / (vb - va)).clamp(0.0, 1.0)
                        };
                        vertices.push([
                            pa[0] + t * (pb[0] - pa[0]),
                            pa[1] + t * (pb[1] - pa[1]),
                            pa[2] + t * (pb[2] - pa[2]),
                        ]);
                        vertices.len() - 1
                    });
                    edge_ids[ei] = id;
                }
                let tri_row = &TRI_TABLE[cube_index];
                let mut i = 0;
                while tri_row[i] >= 0 {
                    triangles.push([
                        edge_ids[tri_row[i] as usize],
                        edge_ids[tri_row[i + 1] as usize],
                        edge_ids[tri_row[i + 2] as usize],
                    ]);
                    i += 3;
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vec3::norm;

    #[test]
    fn constant_positive_grid_gives_empty_mesh() {
        let grid = ScalarGrid::from_fn(8, |_| 1.0).unwrap();
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(mesh.is_empty());
    }

    #[test]
    fn sphere_vertices_sit_on_the_radius() {
        let r = 64;
        let grid = ScalarGrid::from_fn(r, |p| norm(p) - 0.5).unwrap();
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(!mesh.is_empty());
        let cell = grid.spacing();
        for v in &mesh.vertices {
            let radius = norm(*v);
            assert!(
                (radius - 0.5).abs() <= 1.5 * cell,
                "vertex radius {radius} off the sphere"
            );
        }
    }

    #[test]
    fn sphere_mesh_is_closed() {
        for r in [16, 33, 64] {
            let grid = ScalarGrid::from_fn(r, |p| norm(p) - 0.5).unwrap();
            let mesh = marching_cubes(&grid, 0.0).unwrap();
            assert!(mesh.is_closed(), "R={r} sphere mesh should be closed");
        }
    }

    #[test]
    fn axis_plane_extracts_at_the_right_offset() {
        let r = 32;
        let grid = ScalarGrid::from_fn(r, |p| p[0] - 0.25).unwrap();
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(!mesh.is_empty());
        let cell = grid.spacing();
        for v in &mesh.vertices {
            assert!((v[0] - 0.25).abs() <= cell, "planar vertex x = {}", v[0]);
        }
    }

    #[test]
    fn vertices_stay_in_unit_box() {
        let grid = ScalarGrid::from_fn(24, |p| norm(p) - 0.9).unwrap();
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        for v in &mesh.vertices {
            for a in 0..3 {
                assert!(v[a].abs() <= 1.0 + 1e-12);
            }
        }
    }
}
