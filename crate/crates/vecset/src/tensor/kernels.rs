//! Raw matrix kernels on contiguous row-major slices.
//!
//! Each kernel has a sequential and a rayon-parallel variant; the unsuffixed
//! entry points dispatch on workload size (and fall back to sequential when
//! the `parallel` feature is off). Parallel variants partition disjoint
//! output rows, so results are bit-identical to the sequential path.

use crate::parallel;

/// Flop threshold below which matmul stays sequential.
const MATMUL_PAR_FLOPS: usize = 64 * 1024;

fn matmul_rows_into(a: &[f64], b: &[f64], k: usize, n: usize, i0: usize, out: &mut [f64]) {
    // ikj loop order: streams rows of b.
    for (di, out_row) in out.chunks_mut(n).enumerate() {
        let i = i0 + di;
        let a_row = &a[i * k..(i + 1) * k];
        for (l, &a_il) in a_row.iter().enumerate() {
            if a_il == 0.0 {
                continue;
            }
            let b_row = &b[l * n..(l + 1) * n];
            for (o, &b_lj) in out_row.iter_mut().zip(b_row) {
                *o += a_il * b_lj;
            }
        }
    }
}

/// `a (m×k) · b (k×n) -> m×n`, sequential.
pub fn matmul_seq(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    matmul_rows_into(a, b, k, n, 0, &mut out);
    out
}

/// `a (m×k) · b (k×n) -> m×n`, parallel over output rows.
#[cfg(feature = "parallel")]
pub fn matmul_par(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    let rows_per_chunk = (m / rayon::current_num_threads().max(1)).max(1);
    parallel::for_each_chunk_mut(&mut out, rows_per_chunk * n, 2, |ci, chunk| {
        matmul_rows_into(a, b, k, n, ci * rows_per_chunk, chunk);
    });
    out
}

/// `a (m×k) · b (k×n) -> m×n`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if m * k * n >= MATMUL_PAR_FLOPS && m > 1 {
        return matmul_par(a, b, m, k, n);
    }
    matmul_seq(a, b, m, k, n)
}

fn matmul_nt_rows_into(a: &[f64], b: &[f64], k: usize, n: usize, i0: usize, out: &mut [f64]) {
    for (di, out_row) in out.chunks_mut(n).enumerate() {
        let a_row = &a[(i0 + di) * k..(i0 + di + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            *o = acc;
        }
    }
}

/// `a (m×k) · bᵀ` with `b (n×k)` -> m×n, sequential.
pub fn matmul_nt_seq(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = vec![0.0; m * n];
    matmul_nt_rows_into(a, b, k, n, 0, &mut out);
    out
}

/// `a (m×k) · bᵀ` with `b (n×k)` -> m×n, parallel over output rows.
#[cfg(feature = "parallel")]
pub fn matmul_nt_par(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = vec![0.0; m * n];
    let rows_per_chunk = (m / rayon::current_num_threads().max(1)).max(1);
    parallel::for_each_chunk_mut(&mut out, rows_per_chunk * n, 2, |ci, chunk| {
        matmul_nt_rows_into(a, b, k, n, ci * rows_per_chunk, chunk);
    });
    out
}

/// `a (m×k) · bᵀ` with `b (n×k)` -> m×n.
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if m * k * n >= MATMUL_PAR_FLOPS && m > 1 {
        return matmul_nt_par(a, b, m, k, n);
    }
    matmul_nt_seq(a, b, m, k, n)
}

/// `aᵀ (k×m) · g (m×n) -> k×n` where `a` is stored as m×k.
/// Used for weight gradients: dB of `C = A·B` is `Aᵀ·G`.
pub fn matmul_tn(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(g.len(), m * n);
    let mut out = vec![0.0; k * n];
    #[cfg(feature = "parallel")]
    if m * k * n >= MATMUL_PAR_FLOPS && k > 1 {
        parallel::for_each_chunk_mut(&mut out, n, 2, |l, out_row| {
            for i in 0..m {
                let a_il = a[i * k + l];
                if a_il == 0.0 {
                    continue;
                }
                let g_row = &g[i * n..(i + 1) * n];
                for (o, &gv) in out_row.iter_mut().zip(g_row) {
                    *o += a_il * gv;
                }
            }
        });
        return out;
    }
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let g_row = &g[i * n..(i + 1) * n];
        for (l, &a_il) in a_row.iter().enumerate() {
            if a_il == 0.0 {
                continue;
            }
            let out_row = &mut out[l * n..(l + 1) * n];
            for (o, &gv) in out_row.iter_mut().zip(g_row) {
                *o += a_il * gv;
            }
        }
    }
    out
}

/// Row-wise numerically stabilized softmax over an m×n matrix, in place.
pub fn softmax_rows_inplace(data: &mut [f64], n: usize) {
    debug_assert!(n > 0);
    parallel::for_each_chunk_mut(data, n, 256, |_, row| {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    });
}
