//! Small f32 matrix-multiply kernels backing the convolution layers.
//!
//! All products accumulate into the output (`c += a * b`), which is what the
//! convolution forward and backward passes need. Three layouts cover the
//! forward pass, the weight gradient, and the input gradient without any
//! transpose copies:
//!
//! - `gemm_nn`: C[m,n] += A[m,k] * B[k,n]
//! - `gemm_tn`: C[m,n] += A[k,m]^T * B[k,n]   (rank-1 update form)
//! - `gemm_nt`: C[m,n] += A[m,k] * B[n,k]^T   (dot-product form)
//!
//! The hot paths are register-blocked microkernels compiled for
//! AVX-512/AVX2+FMA and selected at runtime; plain scalar paths cover other
//! targets and double as references in tests. Every element of `c` is
//! written by exactly one task with a fixed accumulation order, so results
//! do not depend on the worker count.

use rayon::prelude::*;

/// k-slice kept hot in cache while walking a row block.
const KC: usize = 256;

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
pub fn gemm_nn(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k, "gemm_nn: a size");
    assert_eq!(b.len(), k * n, "gemm_nn: b size");
    assert_eq!(c.len(), m * n, "gemm_nn: c size");
    run_rows::<false>(c, a, b, m, k, n);
}

/// `c[m x n] += a[k x m]^T * b[k x n]`: `a` is stored transposed, as when
/// propagating a convolution's gradient through its weights (`w^T * delta`
/// with `w` stored `[c_out, c_in*kh*kw]`).
///
/// For wide outputs an explicit transpose of `a` plus the `nn` kernel wins;
/// for narrow outputs the direct rank-1 form avoids the copy.
pub fn gemm_tn(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), k * m, "gemm_tn: a size");
    assert_eq!(b.len(), k * n, "gemm_tn: b size");
    assert_eq!(c.len(), m * n, "gemm_tn: c size");
    if n <= 384 || k <= 2 {
        run_rows::<true>(c, a, b, m, k, n);
    } else {
        let mut at = vec![0.0f32; m * k];
        transpose(&mut at, a, k, m);
        run_rows::<false>(c, &at, b, m, k, n);
    }
}

/// `out[cols x rows] = in[rows x cols]^T`.
fn transpose(out: &mut [f32], input: &[f32], rows: usize, cols: usize) {
    const BLK: usize = 32;
    for r0 in (0..rows).step_by(BLK) {
        for c0 in (0..cols).step_by(BLK) {
            for r in r0..(r0 + BLK).min(rows) {
                for c in c0..(c0 + BLK).min(cols) {
                    out[c * rows + r] = input[r * cols + c];
                }
            }
        }
    }
}

fn run_rows<const TA: bool>(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let rows_per_task = task_rows(m, k, n);
    c.par_chunks_mut(rows_per_task * n)
        .enumerate()
        .for_each(|(task, c_chunk)| {
            let i0 = task * rows_per_task;
            let rows = c_chunk.len() / n;
            for p0 in (0..k).step_by(KC) {
                let kc = KC.min(k - p0);
                dispatch_block::<TA>(c_chunk, a, b, i0, rows, m, k, n, p0, kc);
            }
        });
}

/// `c[m x n] += a[m x k] * b[n x k]^T`: both operands indexed by k in their
/// last axis, as when accumulating a convolution's weight gradient
/// (`delta * cols^T`).
///
/// Large products route through the axpy kernel on the swapped problem
/// c^T += b * a^T (transposing only `a`, the small operand, and the
/// output); small ones use the direct dot kernel.
pub fn gemm_nt(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k, "gemm_nt: a size");
    assert_eq!(b.len(), n * k, "gemm_nt: b size");
    assert_eq!(c.len(), m * n, "gemm_nt: c size");
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let flops = 2.0 * m as f64 * k as f64 * n as f64;
    if flops >= 4e6 {
        let mut at = vec![0.0f32; k * m];
        transpose(&mut at, a, m, k);
        let mut ct = vec![0.0f32; n * m];
        run_rows::<false>(&mut ct, b, &at, n, k, m);
        // c += ct^T
        const BLK: usize = 32;
        for r0 in (0..n).step_by(BLK) {
            for c0 in (0..m).step_by(BLK) {
                for r in r0..(r0 + BLK).min(n) {
                    for cc in c0..(c0 + BLK).min(m) {
                        c[cc * n + r] += ct[r * m + cc];
                    }
                }
            }
        }
        return;
    }
    let rows_per_task = task_rows(m, k, n);
    // column blocks keep a panel of b rows (~256 KB) cache-resident across
    // row tiles
    let jb = ((1 << 16) / k.max(1)).max(4);
    c.par_chunks_mut(rows_per_task * n)
        .enumerate()
        .for_each(|(task, c_chunk)| {
            let i0 = task * rows_per_task;
            let rows = c_chunk.len() / n;
            for j0 in (0..n).step_by(jb) {
                let cols = jb.min(n - j0);
                #[cfg(target_arch = "x86_64")]
                {
                    if is_x86_feature_detected!("avx512f") {
                        unsafe { x86::dot_block_avx512(c_chunk, a, b, i0, rows, k, n, j0, cols) };
                        continue;
                    }
                    if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                        unsafe { x86::dot_block_avx2(c_chunk, a, b, i0, rows, k, n, j0, cols) };
                        continue;
                    }
                }
                dot_block_generic(c_chunk, a, b, i0, rows, k, n, j0, cols);
            }
        });
}

/// Rows handled per rayon task, rounded to the microkernel height.
fn task_rows(m: usize, k: usize, n: usize) -> usize {
    let flops = 2.0 * m as f64 * k as f64 * n as f64;
    if flops < 2e6 {
        return m;
    }
    let tasks = (rayon::current_num_threads() * 4).max(1).min(m);
    let rows = m.div_ceil(tasks);
    // round up to a multiple of 12 = lcm of the microkernel heights
    (rows.div_ceil(12) * 12).min(m)
}

#[allow(clippy::too_many_arguments)]
fn dispatch_block<const TA: bool>(
    c: &mut [f32],
    a: &[f32],
    b: &[f32],
    i0: usize,
    rows: usize,
    m: usize,
    k: usize,
    n: usize,
    p0: usize,
    kc: usize,
) {
    #[cfg(target_arch = "x86_64")]
    {
        if is_x86_feature_detected!("avx512f") {
            unsafe { x86::block_avx512::<TA>(c, a, b, i0, rows, m, k, n, p0, kc) };
            return;
        }
        if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            unsafe { x86::block_avx2::<TA>(c, a, b, i0, rows, m, k, n, p0, kc) };
            return;
        }
    }
    block_generic::<TA>(c, a, b, i0, rows, m, k, n, p0, kc);
}

/// A(i, p) for the two storage layouts: row-major [m x k], or transposed
/// [k x m].
#[inline(always)]
fn a_index<const TA: bool>(i: usize, p: usize, m: usize, k: usize) -> usize {
    if TA {
        p * m + i
    } else {
        i * k + p
    }
}

/// Portable fallback, also the reference in kernel tests. Handles the
/// k-slice [p0, p0+kc) of absolute row range [i0, i0+rows); `c` starts at
/// row i0.
#[allow(clippy::too_many_arguments)]
fn block_generic<const TA: bool>(
    c: &mut [f32],
    a: &[f32],
    b: &[f32],
    i0: usize,
    rows: usize,
    m: usize,
    k: usize,
    n: usize,
    p0: usize,
    kc: usize,
) {
    for r in 0..rows {
        let i = i0 + r;
        let c_row = &mut c[r * n..(r + 1) * n];
        for p in p0..p0 + kc {
            let aip = a[a_index::<TA>(i, p, m, k)];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dot_block_generic(
    c: &mut [f32],
    a: &[f32],
    b: &[f32],
    i0: usize,
    rows: usize,
    k: usize,
    n: usize,
    j0: usize,
    cols: usize,
) {
    for r in 0..rows {
        let a_row = &a[(i0 + r) * k..(i0 + r + 1) * k];
        for j in j0..j0 + cols {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0f32;
            for (av, bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            c[r * n + j] += acc;
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    //! Register-blocked microkernels. The axpy-style kernels compute an
    //! `R x 64` tile (4 zmm per row) walking the k slice, with a masked
    //! 16-wide strip for the column remainder; the dot-style kernels for
    //! `gemm_nt` accumulate 4x4 tiles of length-16 partial products and
    //! reduce at the tile edge. `R` is a const generic so row remainders
    //! stay vectorized.

    use super::a_index;
    use std::arch::x86_64::*;

    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn block_avx512<const TA: bool>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        rows: usize,
        m: usize,
        k: usize,
        n: usize,
        p0: usize,
        kc: usize,
    ) {
        let mut r = 0;
        while r < rows {
            let h = (rows - r).min(6);
            match h {
                6 => tile_512::<TA, 6>(c, a, b, i0, r, m, k, n, p0, kc),
                5 => tile_512::<TA, 5>(c, a, b, i0, r, m, k, n, p0, kc),
                4 => tile_512::<TA, 4>(c, a, b, i0, r, m, k, n, p0, kc),
                3 => tile_512::<TA, 3>(c, a, b, i0, r, m, k, n, p0, kc),
                2 => tile_512::<TA, 2>(c, a, b, i0, r, m, k, n, p0, kc),
                _ => tile_512::<TA, 1>(c, a, b, i0, r, m, k, n, p0, kc),
            }
            r += h;
        }
    }

    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn tile_512<const TA: bool, const R: usize>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        r0: usize,
        m: usize,
        k: usize,
        n: usize,
        p0: usize,
        kc: usize,
    ) {
        let mut j = 0;
        while j + 64 <= n {
            let mut acc = [[_mm512_setzero_ps(); 4]; R];
            for p in p0..p0 + kc {
                let bp = b.as_ptr().add(p * n + j);
                let b0 = _mm512_loadu_ps(bp);
                let b1 = _mm512_loadu_ps(bp.add(16));
                let b2 = _mm512_loadu_ps(bp.add(32));
                let b3 = _mm512_loadu_ps(bp.add(48));
                for (row, acc_r) in acc.iter_mut().enumerate() {
                    let av =
                        _mm512_set1_ps(*a.get_unchecked(a_index::<TA>(i0 + r0 + row, p, m, k)));
                    acc_r[0] = _mm512_fmadd_ps(av, b0, acc_r[0]);
                    acc_r[1] = _mm512_fmadd_ps(av, b1, acc_r[1]);
                    acc_r[2] = _mm512_fmadd_ps(av, b2, acc_r[2]);
                    acc_r[3] = _mm512_fmadd_ps(av, b3, acc_r[3]);
                }
            }
            for (row, acc_r) in acc.iter().enumerate() {
                let cp = c.as_mut_ptr().add((r0 + row) * n + j);
                for (q, &v) in acc_r.iter().enumerate() {
                    let cur = _mm512_loadu_ps(cp.add(q * 16));
                    _mm512_storeu_ps(cp.add(q * 16), _mm512_add_ps(cur, v));
                }
            }
            j += 64;
        }
        // masked 16-wide strips for the column remainder
        while j < n {
            let w = (n - j).min(16);
            let mask: __mmask16 = if w == 16 { !0 } else { (1u16 << w) - 1 };
            let mut acc = [_mm512_setzero_ps(); R];
            for p in p0..p0 + kc {
                let bv = _mm512_maskz_loadu_ps(mask, b.as_ptr().add(p * n + j));
                for (row, acc_r) in acc.iter_mut().enumerate() {
                    let av =
                        _mm512_set1_ps(*a.get_unchecked(a_index::<TA>(i0 + r0 + row, p, m, k)));
                    *acc_r = _mm512_fmadd_ps(av, bv, *acc_r);
                }
            }
            for (row, &v) in acc.iter().enumerate() {
                let cp = c.as_mut_ptr().add((r0 + row) * n + j);
                let cur = _mm512_maskz_loadu_ps(mask, cp);
                _mm512_mask_storeu_ps(cp, mask, _mm512_add_ps(cur, v));
            }
            j += w;
        }
    }

    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn block_avx2<const TA: bool>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        rows: usize,
        m: usize,
        k: usize,
        n: usize,
        p0: usize,
        kc: usize,
    ) {
        let mut r = 0;
        while r < rows {
            let h = (rows - r).min(4);
            match h {
                4 => tile_256::<TA, 4>(c, a, b, i0, r, m, k, n, p0, kc),
                3 => tile_256::<TA, 3>(c, a, b, i0, r, m, k, n, p0, kc),
                2 => tile_256::<TA, 2>(c, a, b, i0, r, m, k, n, p0, kc),
                _ => tile_256::<TA, 1>(c, a, b, i0, r, m, k, n, p0, kc),
            }
            r += h;
        }
    }

    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn tile_256<const TA: bool, const R: usize>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        r0: usize,
        m: usize,
        k: usize,
        n: usize,
        p0: usize,
        kc: usize,
    ) {
        let mut j = 0;
        while j + 24 <= n {
            let mut acc = [[_mm256_setzero_ps(); 3]; R];
            for p in p0..p0 + kc {
                let bp = b.as_ptr().add(p * n + j);
                let b0 = _mm256_loadu_ps(bp);
                let b1 = _mm256_loadu_ps(bp.add(8));
                let b2 = _mm256_loadu_ps(bp.add(16));
                for (row, acc_r) in acc.iter_mut().enumerate() {
                    let av =
                        _mm256_set1_ps(*a.get_unchecked(a_index::<TA>(i0 + r0 + row, p, m, k)));
                    acc_r[0] = _mm256_fmadd_ps(av, b0, acc_r[0]);
                    acc_r[1] = _mm256_fmadd_ps(av, b1, acc_r[1]);
                    acc_r[2] = _mm256_fmadd_ps(av, b2, acc_r[2]);
                }
            }
            for (row, acc_r) in acc.iter().enumerate() {
                let cp = c.as_mut_ptr().add((r0 + row) * n + j);
                for (q, &v) in acc_r.iter().enumerate() {
                    let cur = _mm256_loadu_ps(cp.add(q * 8));
                    _mm256_storeu_ps(cp.add(q * 8), _mm256_add_ps(cur, v));
                }
            }
            j += 24;
        }
        if j < n {
            for row in 0..R {
                for p in p0..p0 + kc {
                    let aip = *a.get_unchecked(a_index::<TA>(i0 + r0 + row, p, m, k));
                    if aip == 0.0 {
                        continue;
                    }
                    for col in j..n {
                        let cv = c.get_unchecked_mut((r0 + row) * n + col);
                        *cv += aip * b.get_unchecked(p * n + col);
                    }
                }
            }
        }
    }

    // ── dot-product kernels for gemm_nt ─────────────────────────────────

    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn dot_block_avx512(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        rows: usize,
        k: usize,
        n: usize,
        j0: usize,
        cols: usize,
    ) {
        let mut r = 0;
        while r < rows {
            let h = (rows - r).min(4);
            match h {
                4 => dot_tile_512::<4>(c, a, b, i0, r, k, n, j0, cols),
                3 => dot_tile_512::<3>(c, a, b, i0, r, k, n, j0, cols),
                2 => dot_tile_512::<2>(c, a, b, i0, r, k, n, j0, cols),
                _ => dot_tile_512::<1>(c, a, b, i0, r, k, n, j0, cols),
            }
            r += h;
        }
    }

    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn dot_tile_512<const R: usize>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        r0: usize,
        k: usize,
        n: usize,
        j0: usize,
        cols: usize,
    ) {
        let tail = k % 16;
        let tail_mask: __mmask16 = if tail == 0 { 0 } else { (1u16 << tail) - 1 };
        let mut j = j0;
        while j < j0 + cols {
            let s = (j0 + cols - j).min(4);
            let mut acc = [[_mm512_setzero_ps(); 4]; R]; // [row][col]
            let mut p = 0;
            while p + 16 <= k {
                let mut bv = [_mm512_setzero_ps(); 4];
                for (q, bvq) in bv.iter_mut().enumerate().take(s) {
                    *bvq = _mm512_loadu_ps(b.as_ptr().add((j + q) * k + p));
                }
                for (row, acc_r) in acc.iter_mut().enumerate() {
                    let av = _mm512_loadu_ps(a.as_ptr().add((i0 + r0 + row) * k + p));
                    for q in 0..s {
                        acc_r[q] = _mm512_fmadd_ps(av, bv[q], acc_r[q]);
                    }
                }
                p += 16;
            }
            if tail != 0 {
                let mut bv = [_mm512_setzero_ps(); 4];
                for (q, bvq) in bv.iter_mut().enumerate().take(s) {
                    *bvq = _mm512_maskz_loadu_ps(tail_mask, b.as_ptr().add((j + q) * k + p));
                }
                for (row, acc_r) in acc.iter_mut().enumerate() {
                    let av = _mm512_maskz_loadu_ps(tail_mask, a.as_ptr().add((i0 + r0 + row) * k + p));
                    for q in 0..s {
                        acc_r[q] = _mm512_fmadd_ps(av, bv[q], acc_r[q]);
                    }
                }
            }
            for (row, acc_r) in acc.iter().enumerate() {
                for (q, &v) in acc_r.iter().enumerate().take(s) {
                    *c.get_unchecked_mut((r0 + row) * n + j + q) += _mm512_reduce_add_ps(v);
                }
            }
            j += s;
        }
    }

    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn dot_block_avx2(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        rows: usize,
        k: usize,
        n: usize,
        j0: usize,
        cols: usize,
    ) {
        let mut r = 0;
        while r < rows {
            let h = (rows - r).min(4);
            match h {
                4 => dot_tile_256::<4>(c, a, b, i0, r, k, n, j0, cols),
                3 => dot_tile_256::<3>(c, a, b, i0, r, k, n, j0, cols),
                2 => dot_tile_256::<2>(c, a, b, i0, r, k, n, j0, cols),
                _ => dot_tile_256::<1>(c, a, b, i0, r, k, n, j0, cols),
            }
            r += h;
        }
    }

    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn dot_tile_256<const R: usize>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        i0: usize,
        r0: usize,
        k: usize,
        n: usize,
        j0: usize,
        cols: usize,
    ) {
        let mut j = j0;
        while j < j0 + cols {
            let s = (j0 + cols - j).min(4);
            let mut acc = [[_mm256_setzero_ps(); 4]; R];
            let mut p = 0;
            while p + 8 <= k {
                let mut bv = [_mm256_setzero_ps(); 4];
                for (q, bvq) in bv.iter_mut().enumerate().take(s) {
                    *bvq = _mm256_loadu_ps(b.as_ptr().add((j + q) * k + p));
                }
                for (row, acc_r) in acc.iter_mut().enumerate() {
                    let av = _mm256_loadu_ps(a.as_ptr().add((i0 + r0 + row) * k + p));
                    for q in 0..s {
                        acc_r[q] = _mm256_fmadd_ps(av, bv[q], acc_r[q]);
                    }
                }
                p += 8;
            }
            for (row, acc_r) in acc.iter().enumerate() {
                for (q, &v) in acc_r.iter().enumerate().take(s) {
                    let lo = _mm256_castps256_ps128(v);
                    let hi = _mm256_extractf128_ps(v, 1);
                    let sum4 = _mm_add_ps(lo, hi);
                    let sum2 = _mm_add_ps(sum4, _mm_movehl_ps(sum4, sum4));
                    let sum1 = _mm_add_ss(sum2, _mm_shuffle_ps(sum2, sum2, 1));
                    let mut dot = _mm_cvtss_f32(sum1);
                    // scalar k tail
                    for pp in (k / 8) * 8..k {
                        dot += a.get_unchecked((i0 + r0 + row) * k + pp)
                            * b.get_unchecked((j + q) * k + pp);
                    }
                    *c.get_unchecked_mut((r0 + row) * n + j + q) += dot;
                }
            }
            j += s;
        }
    }
}
