//! Independent numerical cross-checks.
//!
//! Everything here exists to verify the production code paths and is kept
//! independent of them: the gradient checker uses central finite
//! differences, the inside/outside oracle uses generalized winding numbers
//! (the production path is ray parity), and the nearest-neighbor oracle is
//! the O(N²) double loop. Production modules must never call into this
//! module; tests and the acceptance suite do.

use crate::error::Result;
use crate::tensor::{Graph, Parameter, Var};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error across all checked parameter entries.
    pub max_rel_err: f64,
    /// `name[index]` of the worst entry.
    pub worst: String,
    /// Number of scalar entries compared.
    pub entries: usize,
}

/// Compare tape gradients of a scalar loss against central finite
/// differences with step `h`, for every entry of every parameter.
///
/// `build` must construct the loss from scratch on the given graph each
/// call; the checker perturbs parameter values between calls.
pub fn gradient_check<F>(params: &mut [Parameter], h: f64, build: F) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, &[Parameter]) -> Result<Var<'g>>,
{
    let analytic = {
        let graph = Graph::new();
        let loss = build(&graph, params)?;
        graph.backward(loss)?
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: String::new(),
        entries: 0,
    };

    let eval = |params: &[Parameter]| -> Result<f64> {
        let graph = Graph::new();
        let loss = build(&graph, params)?;
        loss.item()
    };

    for pi in 0..params.len() {
        let n = params[pi].tensor.len();
        for j in 0..n {
            let original = params[pi].tensor.data()[j];
            params[pi].tensor.data_mut()[j] = original + h;
            let f_plus = eval(params)?;
            params[pi].tensor.data_mut()[j] = original - h;
            let f_minus = eval(params)?;
            params[pi].tensor.data_mut()[j] = original;

            let fd = (f_plus - f_minus) / (2.0 * h);
            let a = analytic
                .get(&params[pi].name)
                .map(|t| t.data()[j])
                .unwrap_or(0.0);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
            report.entries += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = format!("{}[{}] analytic={a} fd={fd}", params[pi].name, j);
            }
        }
    }
    Ok(report)
}

/// Generalized winding number of `point` with respect to a triangle soup,
/// via the Van Oosterom–Strackee signed solid angle per triangle.
/// For a closed mesh the value is ~1 inside and ~0 outside.
pub fn winding_number(
    vertices: &[[f64; 3]],
    triangles: &[[usize; 3]],
    point: [f64; 3],
) -> f64 {
    let mut total = 0.0;
    for tri in triangles {
        let a = sub3(vertices[tri[0]], point);
        let b = sub3(vertices[tri[1]], point);
        let c = sub3(vertices[tri[2]], point);
        let la = norm3(a);
        let lb = norm3(b);
        let lc = norm3(c);
        let numerator = dot3(a, cross3(b, c));
        let denominator =
            la * lb * lc + dot3(a, b) * lc + dot3(b, c) * la + dot3(c, a) * lb;
        total += 2.0 * numerator.atan2(denominator);
    }
    total / (4.0 * std::f64::consts::PI)
}

/// Inside test from the winding number (threshold 1/2).
pub fn winding_number_inside(
    vertices: &[[f64; 3]],
    triangles: &[[usize; 3]],
    point: [f64; 3],
) -> bool {
    winding_number(vertices, triangles, point).abs() > 0.5
}

/// Exact nearest-neighbor distances by the O(|a|·|b|) double loop.
pub fn nearest_distances_brute_force(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<f64> {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| norm3(sub3(*p, *q)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Symmetric chamfer distance by brute force (unsquared L2 means).
pub fn chamfer_brute_force(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let da = nearest_distances_brute_force(a, b);
    let db = nearest_distances_brute_force(b, a);
    let ma = da.iter().sum::<f64>() / da.len() as f64;
    let mb = db.iter().sum::<f64>() / db.len() as f64;
    0.5 * ma + 0.5 * mb
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_param(name: &str, shape: &[usize], rng: &mut ChaCha8Rng) -> Parameter {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Parameter::new(name, Tensor::new(shape.to_vec(), data).unwrap())
    }

    /// Per-op finite-difference checks, the [DERIVED] oracle for backward.
    #[test]
    fn every_op_passes_finite_difference_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        type Case = (
            &'static str,
            Vec<Parameter>,
            Box<dyn for<'g> Fn(&'g Graph, &[Parameter]) -> Result<Var<'g>>>,
        );
        let mut w = rand_param("w", &[4, 3], &mut rng);
        // keep log() inputs positive
        for v in w.tensor.data_mut() {
            *v = v.abs() + 0.5;
        }
        let cases: Vec<Case> = vec![
            (
                "matmul",
                vec![
                    rand_param("a", &[3, 4], &mut rng),
                    rand_param("b", &[4, 2], &mut rng),
                ],
                Box::new(|g, p| {
                    let a = g.param(&p[0]);
                    let b = g.param(&p[1]);
                    a.matmul(b)?.square()?.sum()
                }),
            ),
            (
                "matmul_nt",
                vec![
                    rand_param("a", &[3, 4], &mut rng),
                    rand_param("b", &[5, 4], &mut rng),
                ],
                Box::new(|g, p| {
                    let a = g.param(&p[0]);
                    let b = g.param(&p[1]);
                    a.matmul_nt(b)?.square()?.sum()
                }),
            ),
            (
                "add_sub_mul",
                vec![
                    rand_param("a", &[2, 3], &mut rng),
                    rand_param("b", &[2, 3], &mut rng),
                ],
                Box::new(|g, p| {
                    let a = g.param(&p[0]);
                    let b = g.param(&p[1]);
                    a.add(b)?.mul(a.sub(b)?)?.sum()
                }),
            ),
            (
                "add_row",
                vec![
                    rand_param("a", &[3, 4], &mut rng),
                    rand_param("row", &[4], &mut rng),
                ],
                Box::new(|g, p| {
                    let a = g.param(&p[0]);
                    let r = g.param(&p[1]);
                    a.add_row(r)?.square()?.sum()
                }),
            ),
            (
                "exp_log",
                vec![w],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    x.log()?.add(x.exp()?)?.sum()
                }),
            ),
            (
                "sigmoid_gelu",
                vec![rand_param("x", &[2, 5], &mut rng)],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    x.sigmoid()?.mul(x.gelu()?)?.sum()
                }),
            ),
            (
                "softmax_rows",
                vec![rand_param("x", &[3, 5], &mut rng)],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    let weights = g.constant(Tensor::new(
                        vec![3, 5],
                        (0..15).map(|i| (i as f64 * 0.37).sin()).collect(),
                    )?);
                    x.softmax_rows()?.mul(weights)?.sum()
                }),
            ),
            (
                "softmax_axis0",
                vec![rand_param("x", &[4, 2], &mut rng)],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    let weights = g.constant(Tensor::new(
                        vec![4, 2],
                        (0..8).map(|i| (i as f64 * 0.61).cos()).collect(),
                    )?);
                    x.softmax(0)?.mul(weights)?.sum()
                }),
            ),
            (
                "layer_norm",
                vec![
                    rand_param("x", &[3, 6], &mut rng),
                    rand_param("gamma", &[6], &mut rng),
                    rand_param("beta", &[6], &mut rng),
                ],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    let gamma = g.param(&p[1]);
                    let beta = g.param(&p[2]);
                    x.layer_norm(gamma, beta, 1e-5)?.square()?.sum()
                }),
            ),
            (
                "mean_scale_clamp",
                vec![rand_param("x", &[7], &mut rng)],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    x.clamp(-0.9, 0.9)?.scale(3.0)?.add_scalar(1.0)?.mean()
                }),
            ),
            (
                "slice_concat_reshape",
                vec![rand_param("x", &[3, 4], &mut rng)],
                Box::new(|g, p| {
                    let x = g.param(&p[0]);
                    let left = x.slice_cols(0, 2)?;
                    let right = x.slice_cols(2, 2)?;
                    let swapped = crate::tensor::concat_cols(g, &[right, left])?;
                    swapped.reshape(vec![12])?.square()?.sum()
                }),
            ),
            (
                "bce_with_logits",
                vec![rand_param("z", &[6], &mut rng)],
                Box::new(|g, p| {
                    let z = g.param(&p[0]);
                    let targets =
                        Tensor::new(vec![6], vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
                    z.bce_with_logits(&targets)
                }),
            ),
        ];

        for (name, mut params, build) in cases {
            let report = gradient_check(&mut params, 1e-5, build).unwrap();
            assert!(
                report.max_rel_err < 1e-4,
                "{name}: rel err {} at {}",
                report.max_rel_err,
                report.worst
            );
        }
    }

    #[test]
    fn winding_number_of_tetrahedron() {
        let vertices = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        // outward-oriented faces
        let triangles = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        assert!(winding_number_inside(
            &vertices,
            &triangles,
            [0.2, 0.2, 0.2]
        ));
        assert!(!winding_number_inside(
            &vertices,
            &triangles,
            [0.9, 0.9, 0.9]
        ));
    }
}
