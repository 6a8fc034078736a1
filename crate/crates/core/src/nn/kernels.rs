//! Plain slice kernels shared by the graph ops and the vector functions.
//!
//! Parallel paths split work by output row only, so results are identical
//! to the sequential path.

use rayon::prelude::*;

use crate::scalar::Scalar;

const PAR_WORK: usize = 1 << 16;

const MR: usize = 4;
const NR: usize = 8;

/// `out[m×n] = a[m×k] · b[k×n]`
///
/// Every output element is summed over `k` in index order, so the result does
/// not depend on tiling or on how rows are split across threads.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![T::zero(); m * n];
    if n == 0 || m == 0 {
        return out;
    }
    let body = |(blk, rows): (usize, &mut [T])| {
        let i0 = blk * MR;
        let nrows = rows.len() / n;
        let a_blk = &a[i0 * k..(i0 + nrows) * k];
        if nrows == MR {
            tile_rows(a_blk, b, rows, k, n);
        } else {
            for (r, row) in rows.chunks_mut(n).enumerate() {
                row_times(&a_blk[r * k..(r + 1) * k], b, row, n);
            }
        }
    };
    if m * k * n >= PAR_WORK {
        out.par_chunks_mut(MR * n).enumerate().for_each(body);
    } else {
        out.chunks_mut(MR * n).enumerate().for_each(body);
    }
    out
}

/// One output row, `row += arow · b`, accumulated in `k` order.
fn row_times<T: Scalar>(arow: &[T], b: &[T], row: &mut [T], n: usize) {
    for (p, &av) in arow.iter().enumerate() {
        let brow = &b[p * n..(p + 1) * n];
        for (o, &bv) in row.iter_mut().zip(brow) {
            *o += av * bv;
        }
    }
}

/// `MR` output rows, with `MR×NR` tiles held in registers across `k`.
fn tile_rows<T: Scalar>(a: &[T], b: &[T], out: &mut [T], k: usize, n: usize) {
    let (a0, rest) = a.split_at(k);
    let (a1, rest) = rest.split_at(k);
    let (a2, a3) = rest.split_at(k);
    let mut j = 0;
    while j + NR <= n {
        let mut acc = [[T::zero(); NR]; MR];
        for p in 0..k {
            let bt: &[T; NR] = b[p * n + j..p * n + j + NR].try_into().unwrap();
            let av = [a0[p], a1[p], a2[p], a3[p]];
            for r in 0..MR {
                for c in 0..NR {
                    acc[r][c] += av[r] * bt[c];
                }
            }
        }
        for (r, tile) in acc.iter().enumerate() {
            out[r * n + j..r * n + j + NR].copy_from_slice(tile);
        }
        j += NR;
    }
    if j < n {
        for (r, arow) in [a0, a1, a2, a3].into_iter().enumerate() {
            let row = &mut out[r * n + j..(r + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                let brow = &b[p * n + j..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
}

/// Transpose of a row-major `[rows×cols]` matrix.
pub fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// `a[m×k] · b[n×k]ᵀ`
pub fn matmul_nt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    matmul(a, &transpose(b, n, k), m, k, n)
}

/// `a[k×m]ᵀ · b[k×n]`
pub fn matmul_tn<T: Scalar>(a: &[T], b: &[T], k: usize, m: usize, n: usize) -> Vec<T> {
    matmul(&transpose(a, k, m), b, m, k, n)
}

/// In-place max-subtracted softmax. `-inf` entries get probability 0.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Stable `log Σ exp(row)`.
pub fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes `x` in place to zero mean / unit variance (population) and
/// returns the reciprocal standard deviation.
pub fn standardize<T: Scalar>(x: &mut [T], eps: T) -> T {
    let n = T::from_usize(x.len()).unwrap();
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let rstd = T::one() / (var + eps).sqrt();
    for v in x.iter_mut() {
        *v = (*v - mean) * rstd;
    }
    rstd
}

#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    half * x * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let cdf = half * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = (-half * x * x).exp() * T::lit(0.398_942_280_401_432_7);
    cdf + x * pdf
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiled_matmul_is_bitwise_the_plain_triple_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for &(m, k, n) in &[(1, 1, 1), (4, 3, 16), (5, 7, 17), (9, 33, 40), (64, 64, 256), (3, 0, 5)] {
            let a: Vec<f32> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f32> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut want = vec![0.0f32; m * n];
            for i in 0..m {
                for p in 0..k {
                    for j in 0..n {
                        want[i * n + j] += a[i * k + p] * b[p * n + j];
                    }
                }
            }
            assert_eq!(matmul(&a, &b, m, k, n), want, "{m}x{k}x{n}");
        }
    }

    #[test]
    fn matmul_small() {
        // [1 2; 3 4] · [5 6; 7 8]
        let c = matmul(&[1.0f64, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0], 2, 2, 2);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 - 2.5).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect(); // 4x3
        let bt = transpose(&b, 4, 3);
        assert_eq!(matmul_nt(&a, &b, 2, 3, 4), matmul(&a, &bt, 2, 3, 4));
        let at = transpose(&a, 2, 3); // 3x2
        assert_eq!(matmul_tn(&at, &bt, 3, 2, 4), matmul(&a, &bt, 2, 3, 4));
    }

    #[test]
    fn parallel_path_matches_sequential() {
        let m = 64;
        let k = 48;
        let n = 40;
        let a: Vec<f32> = (0..m * k).map(|i| ((i * 7 % 13) as f32) * 0.1).collect();
        let b: Vec<f32> = (0..k * n).map(|i| ((i * 5 % 11) as f32) * -0.2).collect();
        let fast = matmul(&a, &b, m, k, n);
        let mut slow = vec![0.0f32; m * n];
        for i in 0..m {
            for p in 0..k {
                for j in 0..n {
                    slow[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        assert_eq!(fast, slow);
    }

    #[test]
    fn softmax_masks_neg_inf() {
        let mut r = [0.0f64, f64::NEG_INFINITY, 0.0];
        softmax_in_place(&mut r);
        assert_eq!(r, [0.5, 0.0, 0.5]);
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[1.0f32, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0f32; 4]), 0);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }
}
