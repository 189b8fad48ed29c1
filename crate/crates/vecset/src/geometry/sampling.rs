//! Surface sampling, occupancy query sampling, and farthest point sampling.

use rand::Rng;

use super::vec3::*;
use super::{InsideTester, OccupancySample, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

/// Area-weighted surface samples with per-triangle plane normals.
pub fn sample_surface<R: Rng>(mesh: &TriangleMesh, n: usize, rng: &mut R) -> PointCloud {
    if n == 0 || mesh.triangles.is_empty() {
        return PointCloud {
            points: Vec::new(),
            normals: Some(Vec::new()),
        };
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for ti in 0..mesh.triangles.len() {
        total += mesh.triangle_area(ti);
        cumulative.push(total);
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen_range(0.0..total);
        let ti = cumulative.partition_point(|&c| c <= r);
        let ti = ti.min(mesh.triangles.len() - 1);
        let [ia, ib, ic] = mesh.triangles[ti];
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        // uniform barycentric via the sqrt trick
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        points.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
        normals.push(mesh.triangle_normal(ti));
    }
    PointCloud {
        points,
        normals: Some(normals),
    }
}

/// Occupancy query sampling plan: uniform volume samples plus near-surface
/// Gaussian offsets split evenly across the noise scales.
#[derive(Debug, Clone)]
pub struct QuerySpec {
    pub n_volume: usize,
    pub n_near: usize,
    pub near_sigmas: Vec<f64>,
}

impl QuerySpec {
    pub fn new(n_volume: usize, n_near: usize) -> Self {
        QuerySpec {
            n_volume,
            n_near,
            near_sigmas: vec![0.05, 0.01],
        }
    }
}

/// Labeled occupancy samples: `n_volume` uniform in `[-1,1]^3` plus
/// `n_near` surface points with isotropic Gaussian offsets.
pub fn sample_queries<R: Rng>(
    mesh: &TriangleMesh,
    spec: &QuerySpec,
    rng: &mut R,
) -> Result<Vec<OccupancySample>> {
    if spec.n_volume + spec.n_near == 0 {
        return Ok(Vec::new());
    }
    let tester = InsideTester::new(mesh)?;
    let mut samples = Vec::with_capacity(spec.n_volume + spec.n_near);
    for _ in 0..spec.n_volume {
        let p = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        samples.push(OccupancySample {
            position: p,
            occupancy: tester.contains(p)?,
        });
    }
    if spec.n_near > 0 {
        if spec.near_sigmas.is_empty() {
            return Err(Error::config("near-surface sampling needs at least one sigma"));
        }
        let surface = sample_surface(mesh, spec.n_near, rng);
        let groups = spec.near_sigmas.len();
        for (i, &p) in surface.points.iter().enumerate() {
            // even split across scales, remainder to the earlier groups
            let sigma = spec.near_sigmas[(i * groups) / spec.n_near.max(1)];
            let q = [
                p[0] + sigma * normal_sample(rng),
                p[1] + sigma * normal_sample(rng),
                p[2] + sigma * normal_sample(rng),
            ];
            samples.push(OccupancySample {
                position: q,
                occupancy: tester.contains(q)?,
            });
        }
    }
    Ok(samples)
}

fn normal_sample<R: Rng>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Greedy farthest point sampling: starting from `seed_index`, repeatedly
/// select the point maximizing the minimum distance to the selected set.
/// Ties break to the lowest index, so the result is fully deterministic.
pub fn fps(cloud: &PointCloud, m: usize, seed_index: usize) -> Result<(PointCloud, Vec<usize>)> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::data(format!(
            "fps: requested {m} of {n} points (need 1 <= M <= N)"
        )));
    }
    if seed_index >= n {
        return Err(Error::data(format!(
            "fps: seed index {seed_index} out of range for {n} points"
        )));
    }
    let mut selected = Vec::with_capacity(m);
    let mut min_dist2 = vec![f64::INFINITY; n];
    let mut current = seed_index;
    selected.push(current);
    for _ in 1..m {
        let cp = cloud.points[current];
        let mut best = 0usize;
        let mut best_d = f64::NEG_INFINITY;
        for (i, d2) in min_dist2.iter_mut().enumerate() {
            let d = dist2(cloud.points[i], cp);
            if d < *d2 {
                *d2 = d;
            }
            if *d2 > best_d {
                best_d = *d2;
                best = i;
            }
        }
        current = best;
        selected.push(current);
    }
    Ok((cloud.select(&selected), selected))
}

/// Index of the lexicographically smallest point (by x, then y, then z).
/// The deterministic FPS seed for inference-time encodings.
pub fn lexicographic_min_index(cloud: &PointCloud) -> usize {
    let mut best = 0;
    for (i, p) in cloud.points.iter().enumerate().skip(1) {
        if p < &cloud.points[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_samples_is_empty_cloud() {
        let mesh = synth::box_mesh([1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_surface(&mesh, 0, &mut rng).is_empty());
    }

    #[test]
    fn single_triangle_samples_stay_inside_it() {
        let tri = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud = sample_surface(&tri, 500, &mut rng);
        for p in &cloud.points {
            // barycentric containment in the x+y<=1 triangle at z=0
            assert!(p[2].abs() < 1e-12);
            assert!(p[0] >= -1e-12 && p[1] >= -1e-12 && p[0] + p[1] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn cube_faces_sampled_in_area_proportion() {
        let cube = synth::box_mesh([1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = sample_surface(&cube, 60_000, &mut rng);
        // count samples on the +x face (x ~ 0.5)
        let mut per_face = [0usize; 6];
        for p in &cloud.points {
            let candidates = [
                (0, (p[0] - 0.5).abs()),
                (1, (p[0] + 0.5).abs()),
                (2, (p[1] - 0.5).abs()),
                (3, (p[1] + 0.5).abs()),
                (4, (p[2] - 0.5).abs()),
                (5, (p[2] + 0.5).abs()),
            ];
            let face = candidates
                .iter()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            per_face[face] += 1;
        }
        for &count in &per_face {
            let frac = count as f64 / 60_000.0;
            assert!((frac - 1.0 / 6.0).abs() < 0.01, "face fraction {frac}");
        }
    }

    #[test]
    fn near_surface_queries_stay_near_the_surface() {
        let mesh = synth::box_mesh([1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = QuerySpec {
            n_volume: 0,
            n_near: 200,
            near_sigmas: vec![0.05, 0.01],
        };
        let samples = sample_queries(&mesh, &spec, &mut rng).unwrap();
        assert_eq!(samples.len(), 200);
        for s in &samples {
            // distance to the cube surface; 4 sigma of the widest scale
            let d = cube_surface_distance(s.position, 0.5);
            assert!(d <= 4.0 * 0.05, "sample {:?} is {d} from surface", s.position);
        }
    }

    #[test]
    fn tiny_cube_volume_fraction_matches_expectation() {
        // cube edge 0.2 inside [-1,1]^3: inside fraction 0.2^3/8 = 0.001
        let mesh = synth::box_mesh([0.2, 0.2, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = QuerySpec {
            n_volume: 4000,
            n_near: 0,
            near_sigmas: vec![],
        };
        let samples = sample_queries(&mesh, &spec, &mut rng).unwrap();
        let inside = samples.iter().filter(|s| s.occupancy).count() as f64 / 4000.0;
        assert!(inside <= 0.004, "inside fraction {inside}");
    }

    #[test]
    fn empty_query_request_is_empty() {
        let mesh = synth::box_mesh([1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = QuerySpec {
            n_volume: 0,
            n_near: 0,
            near_sigmas: vec![0.05],
        };
        assert!(sample_queries(&mesh, &spec, &mut rng).unwrap().is_empty());
    }

    fn cube_surface_distance(p: [f64; 3], half: f64) -> f64 {
        let dx = (p[0].abs() - half).abs();
        let dy = (p[1].abs() - half).abs();
        let dz = (p[2].abs() - half).abs();
        let inside =
            p[0].abs() <= half && p[1].abs() <= half && p[2].abs() <= half;
        if inside {
            dx.min(dy).min(dz)
        } else {
            // outside: distance to the box
            let ox = (p[0].abs() - half).max(0.0);
            let oy = (p[1].abs() - half).max(0.0);
            let oz = (p[2].abs() - half).max(0.0);
            (ox * ox + oy * oy + oz * oz).sqrt()
        }
    }

    #[test]
    fn fps_all_points_and_single_point() {
        let cloud = PointCloud::new(vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]);
        let (all, order) = fps(&cloud, 3, 0).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(order[0], 0);
        let (one, idx) = fps(&cloud, 1, 2).unwrap();
        assert_eq!(one.points[0], [0.0, 1.0, 0.0]);
        assert_eq!(idx, vec![2]);
    }

    #[test]
    fn fps_picks_opposite_corner_of_square() {
        // unit square corners + center; from corner 0 the farthest is corner 2
        let cloud = PointCloud::new(vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ]);
        let (_, order) = fps(&cloud, 2, 0).unwrap();
        assert_eq!(order, vec![0, 2]);
    }

    #[test]
    fn fps_greedy_max_min_property_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        use rand::Rng as _;
        let n = 40;
        let cloud = PointCloud::new(
            (0..n)
                .map(|_| {
                    [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect(),
        );
        let (_, order) = fps(&cloud, 12, 3).unwrap();
        for k in 1..order.len() {
            let selected = &order[..k];
            let min_d = |i: usize| {
                selected
                    .iter()
                    .map(|&s| dist2(cloud.points[i], cloud.points[s]))
                    .fold(f64::INFINITY, f64::min)
            };
            let picked = min_d(order[k]);
            for i in 0..n {
                assert!(
                    min_d(i) <= picked + 1e-12,
                    "step {k}: point {i} is farther than the pick"
                );
            }
        }
    }

    #[test]
    fn fps_rejects_oversized_request() {
        let cloud = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]]);
        assert!(fps(&cloud, 3, 0).is_err());
    }
}
