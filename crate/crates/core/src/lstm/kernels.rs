//! Dense vector kernels. Eight independent accumulators let the compiler
//! vectorize the reductions; the summation order is fixed, so results are
//! deterministic.

use super::Scalar;

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::ZERO; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = S::ZERO;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `out[r] += W[r, :] · x` for a row-major `W` with `x.len()` columns.
#[inline]
pub(crate) fn matvec_add<S: Scalar>(w: &[S], x: &[S], out: &mut [S]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ · d` for a row-major `W` with `out.len()` columns.
#[inline]
pub(crate) fn matvec_t_add<S: Scalar>(w: &[S], d: &[S], out: &mut [S]) {
    let cols = out.len();
    for (&di, row) in d.iter().zip(w.chunks_exact(cols)) {
        if di != S::ZERO {
            axpy(di, row, out);
        }
    }
}

/// `G += d ⊗ x` for a row-major `G` with `x.len()` columns.
#[inline]
pub(crate) fn outer_add<S: Scalar>(d: &[S], x: &[S], g: &mut [S]) {
    let cols = x.len();
    for (&di, row) in d.iter().zip(g.chunks_exact_mut(cols)) {
        if di != S::ZERO {
            axpy(di, x, row);
        }
    }
}
