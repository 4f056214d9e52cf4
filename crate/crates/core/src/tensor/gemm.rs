use super::Real;

/// Strided view descriptor: `(row_stride, col_stride)`.
pub(crate) type Strides = (usize, usize);

pub(crate) const ROW_MAJOR: fn(usize) -> Strides = |cols| (cols, 1);
pub(crate) const TRANSPOSED: fn(usize) -> Strides = |cols| (1, cols);

/// `c[m×n] = a[m×k] · b[k×n] + beta · c`, with `c` row-major contiguous.
///
/// `a` and `b` are read through the given strides so transposes are free.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_strides: Strides,
    b: &[T],
    b_strides: Strides,
    beta: T,
    c: &mut [T],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n, "gemm: output buffer too small");
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v = beta * *v);
        return;
    }
    assert!((m - 1) * a_strides.0 + (k - 1) * a_strides.1 < a.len(), "gemm: lhs out of bounds");
    assert!((k - 1) * b_strides.0 + (n - 1) * b_strides.1 < b.len(), "gemm: rhs out of bounds");
    // SAFETY: bounds asserted above; `c` is uniquely borrowed and cannot alias
    // the shared `a`/`b` borrows.
    unsafe {
        T::raw_gemm(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
