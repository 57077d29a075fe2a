//! Symmetric eigensolvers: dense Householder tridiagonalization followed by
//! implicit QL, and a Lanczos iteration for the low end of large sparse spectra.

use crate::real::Real;

/// Eigen-decomposition of a dense symmetric matrix given row-major.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns of a row-major `n x n` matrix.
pub fn symmetric_eigen<T: Real>(matrix: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut v = matrix.to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut v, &mut d, &mut e, n);
    sort_pairs(d, v, n)
}

/// Eigen-decomposition of a symmetric tridiagonal matrix (`diag`, `off` with
/// `off[i]` coupling rows `i` and `i + 1`).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> (Vec<T>, Vec<T>) {
    let n = diag.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let mut d = diag.to_vec();
    // tql2 expects the sub-diagonal shifted by one
    let mut e = vec![T::zero(); n];
    for i in 1..n {
        e[i] = off[i - 1];
    }
    tql2(&mut v, &mut d, &mut e, n);
    sort_pairs(d, v, n)
}

fn sort_pairs<T: Real>(d: Vec<T>, v: Vec<T>, n: usize) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + k];
        }
    }
    (values, vectors)
}

fn tred2<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale = scale + d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
                v[at(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] = d[k] / scale;
                h = h + d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g = g + v[at(k, j)] * d[k];
                    e[k] = e[k] + v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] = v[at(k, j)] - (f * e[k] + g * d[k]);
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g = g + v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] = v[at(k, j)] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = T::zero();
    }
    v[at(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

fn tql2<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let row = k * n;
                        h = v[row + i + 1];
                        v[row + i + 1] = s * v[row + i] + c * h;
                        v[row + i] = c * v[row + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter > 30 * n.max(10) {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = T::zero();
    }
}

/// Sparse symmetric operator for the Lanczos iteration.
pub trait SymOp<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Smallest `count` eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalization. The Krylov space grows until every wanted Ritz pair has
/// residual below `tol` or the space spans the whole domain.
///
/// Returns eigenvalues ascending and eigenvectors as columns of a row-major
/// `dim x count` matrix.
pub fn lanczos_smallest<T: Real, A: SymOp<T>>(op: &A, count: usize, tol: T) -> (Vec<T>, Vec<T>) {
    let n = op.dim();
    let count = count.min(n);
    if count == 0 {
        return (Vec::new(), Vec::new());
    }

    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();

    // deterministic, non-structured start vector
    let mut q: Vec<T> = (0..n)
        .map(|i| {
            let h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ 0xD1B5_4A32_D192_ED03;
            T::lit((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect();
    normalize(&mut q);

    let mut w = vec![T::zero(); n];
    let mut next_check = (2 * count + 20).min(n);
    loop {
        op.apply(&q, &mut w);
        let a = dot(&q, &w);
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi = *wi - a * *qi;
        }
        if let Some(&b) = beta.last() {
            let prev = basis.last().expect("previous basis vector");
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi = *wi - b * *pi;
            }
        }
        basis.push(q.clone());
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi = *wi - c * *bi;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = basis.len();
        let exhausted = m == n || b <= T::epsilon() * T::lit(1e3);

        if m >= next_check || exhausted {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
            let converged = (0..count.min(m)).all(|k| (b * vecs[(m - 1) * m + k]).abs() < tol);
            if (converged && m >= count) || exhausted {
                let take = count.min(m);
                let mut out = vec![T::zero(); n * take];
                for k in 0..take {
                    for (j, bj) in basis.iter().enumerate() {
                        let y = vecs[j * m + k];
                        for i in 0..n {
                            out[i * take + k] = out[i * take + k] + y * bj[i];
                        }
                    }
                }
                // Ritz vectors lose a little orthogonality; tidy them up
                orthonormalize_columns(&mut out, n, take);
                return (vals[..take].to_vec(), out);
            }
            next_check = (m + 50.max(m / 4)).min(n);
        }
        beta.push(b);
        q = w.iter().map(|&x| x / b).collect();
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn normalize<T: Real>(x: &mut [T]) {
    let norm = dot(x, x).sqrt();
    if norm > T::zero() {
        for v in x.iter_mut() {
            *v = *v / norm;
        }
    }
}

fn orthonormalize_columns<T: Real>(m: &mut [T], rows: usize, cols: usize) {
    for k in 0..cols {
        for j in 0..k {
            let mut c = T::zero();
            for i in 0..rows {
                c = c + m[i * cols + k] * m[i * cols + j];
            }
            for i in 0..rows {
                m[i * cols + k] = m[i * cols + k] - c * m[i * cols + j];
            }
        }
        let mut norm = T::zero();
        for i in 0..rows {
            norm = norm + m[i * cols + k] * m[i * cols + k];
        }
        let norm = norm.sqrt();
        if norm > T::zero() {
            for i in 0..rows {
                m[i * cols + k] = m[i * cols + k] / norm;
            }
        }
    }
}
