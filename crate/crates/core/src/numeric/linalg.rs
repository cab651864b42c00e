//! Dense helpers over flat row-major `f64` buffers.

use crate::numeric::rng::Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

/// `out = m · x` for an `rows × cols` row-major matrix.
pub fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `out = mᵀ · x` for an `rows × cols` row-major matrix.
pub fn matvec_t(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    out[..cols].fill(0.0);
    for (r, &xr) in x.iter().enumerate().take(rows) {
        if xr == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *o += v * xr;
        }
    }
}

/// General matrix product `C = alpha·A·B + beta·C` with explicit strides.
///
/// `a` is `m × k` with strides `(rsa, csa)`, `b` is `k × n` with `(rsb, csb)`
/// and `c` is a contiguous row-major `m × n` buffer.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Random `n × n` orthogonal matrix (Gram-Schmidt on Gaussian columns).
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        // Two passes keep the basis orthogonal to machine precision.
        for _ in 0..2 {
            for c in &cols {
                let p = dot(&v, c);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let len = norm(&v);
        if len < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= len);
        cols.push(v);
    }
    let mut m = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            m[i * n + j] = x;
        }
    }
    m
}
