//! Row-major matrix product kernels. The hot path is a register-tiled
//! micro kernel that accumulates an MR x NR block of `c` across the whole
//! reduction, so each loaded `b` vector feeds MR output rows.

use super::Scalar;

const MR: usize = 8;
const NR: usize = 16;

/// Output size under which the whole `c` block is treated as cache
/// resident, switching to kernels that stream the big operand once.
const SMALL_C: usize = 32 * 1024;

/// c += a (m x k) * b (k x n)
pub fn matmul<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m * n <= SMALL_C && k > n {
        // small output, long reduction: keep `c` hot and stream `b` in one
        // sequential pass, one row per reduction step
        for kk in 0..k {
            let b_row = &b[kk * n..(kk + 1) * n];
            for i in 0..m {
                let aik = a[i * k + kk];
                let c_row = &mut c[i * n..(i + 1) * n];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = *cv + aik * bv;
                }
            }
        }
        return;
    }
    let m_main = m - m % MR;
    let n_main = n - n % NR;
    for i0 in (0..m_main).step_by(MR) {
        for j0 in (0..n_main).step_by(NR) {
            tile(a, b, c, i0, j0, k, n);
        }
        if n_main < n {
            edge(a, b, c, i0, i0 + MR, n_main, k, n);
        }
    }
    if m_main < m {
        edge(a, b, c, m_main, m, 0, k, n);
    }
}

/// One MR x NR output tile; the accumulators stay in vector registers
/// across the whole reduction.
#[inline]
fn tile<F: Scalar>(a: &[F], b: &[F], c: &mut [F], i0: usize, j0: usize, k: usize, n: usize) {
    let mut acc = [[F::zero(); NR]; MR];
    for kk in 0..k {
        let b_row = &b[kk * n + j0..kk * n + j0 + NR];
        for r in 0..MR {
            let aik = a[(i0 + r) * k + kk];
            let row = &mut acc[r];
            for j in 0..NR {
                row[j] = row[j] + aik * b_row[j];
            }
        }
    }
    for r in 0..MR {
        let c_row = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR];
        for j in 0..NR {
            c_row[j] = c_row[j] + acc[r][j];
        }
    }
}

/// Plain ikj loop over rows i0..i1 and columns j0..n for the fringes the
/// tiles do not cover.
fn edge<F: Scalar>(a: &[F], b: &[F], c: &mut [F], i0: usize, i1: usize, j0: usize, k: usize, n: usize) {
    for i in i0..i1 {
        let a_row = &a[i * k..(i + 1) * k];
        for (kk, &aik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n + j0..(kk + 1) * n];
            let c_row = &mut c[i * n + j0..(i + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv = *cv + aik * bv;
            }
        }
    }
}

/// c += a^T (k x m stored as m x k) * b (m x n), giving c (k x n).
/// Transposes `a` a chunk of rows at a time so the scratch stays small,
/// then reuses the tiled kernel with the chunk as the reduction.
pub fn matmul_at_b<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    if m * n <= SMALL_C {
        // few reduction rows: `b` is cache resident, so stream the output
        // rows of `c` (and the columns of `a`) in one sequential pass
        for kk in 0..k {
            let c_row = &mut c[kk * n..(kk + 1) * n];
            for i in 0..m {
                let aik = a[i * k + kk];
                let b_row = &b[i * n..(i + 1) * n];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = *cv + aik * bv;
                }
            }
        }
        return;
    }
    const CHUNK: usize = 256;
    let mut at = vec![F::zero(); k * CHUNK.min(m)];
    for i0 in (0..m).step_by(CHUNK) {
        let rows = CHUNK.min(m - i0);
        for i in 0..rows {
            for kk in 0..k {
                at[kk * rows + i] = a[(i0 + i) * k + kk];
            }
        }
        matmul(&at[..k * rows], &b[i0 * n..(i0 + rows) * n], c, k, rows, n);
    }
}

/// c += a (m x k) * b^T, with `b` stored row-major as (n x k), giving
/// c (m x n). Streams the rows of `b` exactly once when `a` is small.
pub fn matmul_a_bt<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m * k <= SMALL_C {
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            for i in 0..m {
                let a_row = &a[i * k..(i + 1) * k];
                c[i * n + j] = c[i * n + j] + dot(a_row, b_row);
            }
        }
        return;
    }
    let bt = transpose(b, n, k);
    matmul(a, &bt, c, m, k, n);
}

/// Dot product with eight partial sums so the reduction vectorizes.
#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    const LANES: usize = 8;
    let mut acc = [F::zero(); LANES];
    let chunks = a.len() / LANES * LANES;
    for (ca, cb) in a[..chunks].chunks_exact(LANES).zip(b[..chunks].chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] = acc[l] + ca[l] * cb[l];
        }
    }
    let mut s = F::zero();
    for l in 0..LANES {
        s = s + acc[l];
    }
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        s = s + *x * *y;
    }
    s
}

/// Transpose a (m x n) into (n x m).
pub fn transpose<F: Scalar>(a: &[F], m: usize, n: usize) -> Vec<F> {
    let mut out = vec![F::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}
