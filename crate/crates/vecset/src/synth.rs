//! Procedural corpus of watertight meshes.
//!
//! Five shape families, all closed by construction: boxes, ellipsoids
//! (subdivided icospheres), tori, capsules, and disjoint ellipsoid pairs.
//! Class-specific parameter ranges give the generative stage a conditioning
//! signal. Every generated mesh is normalized into the padded unit box and
//! verified closed before it is written.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{save_obj, TriangleMesh};

pub const BBOX_PADDING: f64 = 0.95;
pub const CLASS_NAMES: [&str; 5] = ["box", "ellipsoid", "torus", "capsule", "pair"];

/// Axis-aligned box with the given extents, centered at the origin.
pub fn box_mesh(extents: [f64; 3]) -> TriangleMesh {
    let [hx, hy, hz] = [extents[0] / 2.0, extents[1] / 2.0, extents[2] / 2.0];
    let vertices = vec![
        [-hx, -hy, -hz],
        [hx, -hy, -hz],
        [hx, hy, -hz],
        [-hx, hy, -hz],
        [-hx, -hy, hz],
        [hx, -hy, hz],
        [hx, hy, hz],
        [-hx, hy, hz],
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2], // bottom
        [4, 5, 6],
        [4, 6, 7], // top
        [0, 1, 5],
        [0, 5, 4], // front
        [2, 3, 7],
        [2, 7, 6], // back
        [0, 4, 7],
        [0, 7, 3], // left
        [1, 2, 6],
        [1, 6, 5], // right
    ];
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Ellipsoid as an icosphere with `subdivisions` refinement levels,
/// scaled per axis.
pub fn ellipsoid_mesh(radii: [f64; 3], subdivisions: usize) -> TriangleMesh {
    let mut mesh = icosphere(subdivisions);
    for v in &mut mesh.vertices {
        v[0] *= radii[0];
        v[1] *= radii[1];
        v[2] *= radii[2];
    }
    mesh
}

fn icosphere(subdivisions: usize) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    for v in &mut vertices {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        *v = [v[0] / n, v[1] / n, v[2] / n];
    }
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut mid = [0usize; 3];
            for (k, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].into_iter().enumerate() {
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = vertices[a];
                    let pb = vertices[b];
                    let m = [
                        (pa[0] + pb[0]) / 2.0,
                        (pa[1] + pb[1]) / 2.0,
                        (pa[2] + pb[2]) / 2.0,
                    ];
                    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                    vertices.push([m[0] / n, m[1] / n, m[2] / n]);
                    vertices.len() - 1
                });
            }
            next.push([t[0], mid[0], mid[2]]);
            next.push([t[1], mid[1], mid[0]]);
            next.push([t[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        triangles = next;
    }
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Torus around the z axis: major radius to the tube center, minor radius
/// of the tube, with `nu`×`nv` parameter resolution.
pub fn torus_mesh(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
        for j in 0..nv {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
            let ring = major + minor * phi.cos();
            vertices.push([ring * theta.cos(), ring * theta.sin(), minor * phi.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(nu * nv * 2);
    for i in 0..nu {
        let i1 = (i + 1) % nu;
        for j in 0..nv {
            let j1 = (j + 1) % nv;
            let (a, b, c, d) = (i * nv + j, i1 * nv + j, i1 * nv + j1, i * nv + j1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Capsule along z: hemispherical caps of `radius` at ±`half_height`.
pub fn capsule_mesh(radius: f64, half_height: f64, segments: usize, rings: usize) -> TriangleMesh {
    // rings of latitude per hemisphere (equator rings duplicated at ±h)
    let mut ring_zr: Vec<(f64, f64)> = Vec::new();
    for k in 0..=rings {
        // southern cap, lat from -90° up to 0°
        let lat = -std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_2 * k as f64 / rings as f64;
        ring_zr.push((-half_height + radius * lat.sin(), radius * lat.cos()));
    }
    for k in 0..=rings {
        // northern cap, lat from 0° to 90°
        let lat = std::f64::consts::FRAC_PI_2 * k as f64 / rings as f64;
        ring_zr.push((half_height + radius * lat.sin(), radius * lat.cos()));
    }

    let mut vertices: Vec<[f64; 3]> = vec![[0.0, 0.0, -half_height - radius]];
    let mut ring_start: Vec<usize> = Vec::new();
    // interior rings (skip the degenerate pole rings at index 0 and last)
    for (idx, &(z, r)) in ring_zr.iter().enumerate() {
        if idx == 0 || idx == ring_zr.len() - 1 {
            continue;
        }
        ring_start.push(vertices.len());
        for s in 0..segments {
            let a = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push([r * a.cos(), r * a.sin(), z]);
        }
    }
    let north_pole = vertices.len();
    vertices.push([0.0, 0.0, half_height + radius]);

    let mut triangles = Vec::new();
    // south fan
    for s in 0..segments {
        let s1 = (s + 1) % segments;
        triangles.push([0, ring_start[0] + s1, ring_start[0] + s]);
    }
    // strips between consecutive rings
    for w in ring_start.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for s in 0..segments {
            let s1 = (s + 1) % segments;
            triangles.push([lo + s, lo + s1, hi + s1]);
            triangles.push([lo + s, hi + s1, hi + s]);
        }
    }
    // north fan
    let last = *ring_start.last().unwrap();
    for s in 0..segments {
        let s1 = (s + 1) % segments;
        triangles.push([north_pole, last + s, last + s1]);
    }
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Disjoint pair of ellipsoids along x; watertight as a two-component union.
pub fn pair_mesh(radii_a: [f64; 3], radii_b: [f64; 3], offset: f64) -> TriangleMesh {
    let mut a = ellipsoid_mesh(radii_a, 2);
    let mut b = ellipsoid_mesh(radii_b, 2);
    for v in &mut a.vertices {
        v[0] -= offset;
    }
    for v in &mut b.vertices {
        v[0] += offset;
    }
    TriangleMesh::merged(&[a, b])
}

/// Random mesh of the given class, normalized into the padded unit box.
pub fn class_mesh<R: Rng>(class_id: usize, rng: &mut R) -> Result<TriangleMesh> {
    let raw = match class_id {
        0 => box_mesh([
            rng.gen_range(0.45..1.0),
            rng.gen_range(0.45..1.0),
            rng.gen_range(0.45..1.0),
        ]),
        1 => ellipsoid_mesh(
            [
                rng.gen_range(0.45..1.0),
                rng.gen_range(0.45..1.0),
                rng.gen_range(0.45..1.0),
            ],
            3,
        ),
        2 => {
            let major = rng.gen_range(0.55..0.75);
            let minor = major * rng.gen_range(0.18..0.32);
            torus_mesh(major, minor, 48, 24)
        }
        3 => capsule_mesh(rng.gen_range(0.3..0.5), rng.gen_range(0.3..0.7), 32, 8),
        4 => {
            let ra = [
                rng.gen_range(0.25..0.4),
                rng.gen_range(0.25..0.4),
                rng.gen_range(0.25..0.4),
            ];
            let rb = [
                rng.gen_range(0.25..0.4),
                rng.gen_range(0.25..0.4),
                rng.gen_range(0.25..0.4),
            ];
            pair_mesh(ra, rb, rng.gen_range(0.5..0.6))
        }
        other => {
            return Err(Error::config(format!(
                "class id {other} out of range ({} classes available)",
                CLASS_NAMES.len()
            )))
        }
    };
    raw.normalize_to_bbox(BBOX_PADDING)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub id: String,
    pub class_id: usize,
    pub class_name: String,
    pub file: String,
    pub split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub classes: Vec<String>,
    pub shapes: Vec<ShapeEntry>,
}

impl CorpusManifest {
    pub fn shapes_in(&self, split: Split) -> Vec<&ShapeEntry> {
        self.shapes.iter().filter(|s| s.split == split).collect()
    }
}

/// Generate `per_class` meshes for each of the first `n_classes` families,
/// write them as OBJ under `out_dir/meshes/`, and return the manifest
/// (also written to `out_dir/manifest.json`). Every 5th shape of a class
/// goes to the validation split.
pub fn generate_corpus(
    out_dir: &Path,
    n_classes: usize,
    per_class: usize,
    seed: u64,
) -> Result<CorpusManifest> {
    if n_classes == 0 || n_classes > CLASS_NAMES.len() {
        return Err(Error::config(format!(
            "classes must be in 1..={}, got {n_classes}",
            CLASS_NAMES.len()
        )));
    }
    let mesh_dir = out_dir.join("meshes");
    fs::create_dir_all(&mesh_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes = Vec::with_capacity(n_classes * per_class);
    for class_id in 0..n_classes {
        for k in 0..per_class {
            let mesh = class_mesh(class_id, &mut rng)?;
            if !mesh.is_closed() {
                return Err(Error::numeric(format!(
                    "generated {} mesh is not closed; generator bug",
                    CLASS_NAMES[class_id]
                )));
            }
            let id = format!("{}_{k:03}", CLASS_NAMES[class_id]);
            let rel = format!("meshes/{id}.obj");
            save_obj(&out_dir.join(&rel), &mesh)?;
            shapes.push(ShapeEntry {
                id,
                class_id,
                class_name: CLASS_NAMES[class_id].to_string(),
                file: rel,
                split: if k % 5 == 4 { Split::Val } else { Split::Train },
            });
        }
    }
    let manifest = CorpusManifest {
        seed,
        classes: CLASS_NAMES[..n_classes].iter().map(|s| s.to_string()).collect(),
        shapes,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::data(format!("manifest serialization: {e}")))?;
    fs::write(out_dir.join("manifest.json"), json)?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("bad manifest: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn every_family_is_closed_after_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for class_id in 0..CLASS_NAMES.len() {
            for _ in 0..3 {
                let mesh = class_mesh(class_id, &mut rng).unwrap();
                assert!(
                    mesh.is_closed(),
                    "{} should be closed",
                    CLASS_NAMES[class_id]
                );
                let (lo, hi) = mesh.bbox().unwrap();
                for a in 0..3 {
                    assert!(lo[a] >= -0.95 - 1e-9 && hi[a] <= 0.95 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn corpus_generation_is_byte_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_corpus(d1.path(), 2, 3, 7).unwrap();
        generate_corpus(d2.path(), 2, 3, 7).unwrap();
        let m1 = std::fs::read(d1.path().join("manifest.json")).unwrap();
        let m2 = std::fs::read(d2.path().join("manifest.json")).unwrap();
        assert_eq!(m1, m2);
        for entry in load_manifest(d1.path()).unwrap().shapes {
            let b1 = std::fs::read(d1.path().join(&entry.file)).unwrap();
            let b2 = std::fs::read(d2.path().join(&entry.file)).unwrap();
            assert_eq!(b1, b2, "{} differs across runs", entry.file);
        }
    }

    #[test]
    fn corpus_counts_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_corpus(dir.path(), 2, 10, 1).unwrap();
        assert_eq!(manifest.shapes.len(), 20);
        assert_eq!(manifest.shapes_in(Split::Val).len(), 4);
        assert_eq!(manifest.shapes_in(Split::Train).len(), 16);
    }
}
