//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit QL iteration (the EISPACK `tred2`/`tql2` pair), plus the
//! Cholesky reduction for symmetric-definite pencils.
//!
//! Matrices are dense, row-major and fully stored. Output ordering is
//! ascending with ties kept in the order the iteration produced them, which
//! is deterministic for a given input.

use crate::error::{Error, Result};

/// Dense symmetric matrix in full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        m
    }

    /// Build from row-major data. The lower triangle is mirrored from the
    /// upper one so the result is exactly symmetric.
    pub fn from_row_major(n: usize, mut data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data has the wrong length");
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Leading principal `k x k` block.
    pub fn leading(&self, k: usize) -> SymMatrix {
        assert!(k <= self.n);
        let mut data = Vec::with_capacity(k * k);
        for i in 0..k {
            data.extend_from_slice(&self.row(i)[..k]);
        }
        SymMatrix { n: k, data }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigenvalues (ascending) and, optionally, eigenvectors stored one per row.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[k * n .. (k + 1) * n]` is the unit eigenvector of `values[k]`.
    pub vectors: Option<Vec<f64>>,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Option<&[f64]> {
        let n = self.values.len();
        self.vectors.as_ref().map(|v| &v[k * n..(k + 1) * n])
    }
}

pub fn symmetric_eigenvalues(a: &SymMatrix) -> Result<Vec<f64>> {
    Ok(decompose(a, false)?.values)
}

pub fn symmetric_eigen(a: &SymMatrix) -> Result<Eigen> {
    decompose(a, true)
}

fn decompose(a: &SymMatrix, want_vectors: bool) -> Result<Eigen> {
    let n = a.size();
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: want_vectors.then(Vec::new) });
    }
    let (mut d, mut e, mut z) = tridiagonalize(a, want_vectors);
    tql2(&mut d, &mut e, z.as_mut().map(|v| v.as_mut_slice()), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = z.map(|zt| {
        let mut out = Vec::with_capacity(n * n);
        for &i in &order {
            out.extend_from_slice(&zt[i * n..(i + 1) * n]);
        }
        out
    });
    Ok(Eigen { values, vectors })
}

/// Householder reduction to tridiagonal form. Returns the diagonal, the
/// subdiagonal (`e[k]` couples `k` and `k + 1`, `e[n-1] = 0`) and, when
/// requested, the transposed orthogonal factor `Q^T` in row-major order.
///
/// Only the lower triangle of the working copy is read or updated.
fn tridiagonalize(a: &SymMatrix, want_vectors: bool) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let n = a.size();
    let mut m = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let len = n - start;
        let x: Vec<f64> = (start..n).map(|i| m[i * n + k]).collect();
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        d[k] = m[k * n + k];
        if tail_sq == 0.0 {
            e[k] = x[0];
            continue;
        }
        let norm = (x[0] * x[0] + tail_sq).sqrt();
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let beta = 2.0 / (v[0] * v[0] + tail_sq);

        // p = beta * A22 v using the lower triangle only
        let p = &mut p[..len];
        p.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..len {
            let off = (start + i) * n + start;
            let row = &m[off..off + i + 1];
            let (lower, diag) = row.split_at(i);
            p[i] += dot(lower, &v[..i]) + diag[0] * v[i];
            axpy(&mut p[..i], v[i], lower);
        }
        p.iter_mut().for_each(|x| *x *= beta);
        let kappa = 0.5 * beta * dot(p, &v);
        for i in 0..len {
            p[i] -= kappa * v[i];
        }
        // A22 -= v w^T + w v^T
        for i in 0..len {
            let off = (start + i) * n + start;
            let row = &mut m[off..off + i + 1];
            axpy(row, -v[i], &p[..=i]);
            axpy(row, -p[i], &v[..=i]);
        }
        e[k] = alpha;
        if want_vectors {
            reflectors.push((start, v, beta));
        }
    }
    if n >= 2 {
        d[n - 2] = m[(n - 2) * n + n - 2];
        e[n - 2] = m[(n - 1) * n + n - 2];
    }
    d[n - 1] = m[(n - 1) * n + n - 1];
    e[n - 1] = 0.0;

    let z = want_vectors.then(|| {
        // Q = H_0 H_1 ... ; we keep Q^T so that QL rotations act on rows.
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let mut u = vec![0.0; n];
        for (start, v, beta) in reflectors.iter().rev() {
            // rows start.. of Q get H applied from the left
            u.iter_mut().for_each(|x| *x = 0.0);
            for (i, vi) in v.iter().enumerate() {
                axpy(&mut u, *vi, &q[(start + i) * n..(start + i + 1) * n]);
            }
            for (i, vi) in v.iter().enumerate() {
                axpy(&mut q[(start + i) * n..(start + i + 1) * n], -beta * vi, &u);
            }
        }
        transpose(&q, n)
    });
    (d, e, z)
}

/// Dot product with eight fixed accumulators (vectorizes, order is fixed).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Implicit QL iteration on a symmetric tridiagonal matrix. `zt`, when
/// present, holds basis vectors as rows and receives every rotation.
fn tql2(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut [f64]>, n: usize) -> Result<()> {
    const MAX_ITER: usize = 60;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
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
                if iter > MAX_ITER {
                    return Err(Error::ConvergenceFailure { index: l });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..(i + 1) * n];
                        let zi1 = &mut hi[..n];
                        for k in 0..n {
                            let hk = zi1[k];
                            zi1[k] = s * zi[k] + c * hk;
                            zi[k] = c * zi[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// `rel_tol` rejects pivots below `rel_tol * max(diag)`.
pub fn cholesky(b: &SymMatrix, rel_tol: f64) -> Result<Vec<f64>> {
    let n = b.size();
    let scale = b.diagonal().into_iter().fold(0.0f64, f64::max);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = b.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > rel_tol * scale) {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve the symmetric-definite pencil `A x = mu B x`. Eigenvectors, when
/// requested, are `B`-orthonormal.
pub fn generalized_eigen(a: &SymMatrix, b: &SymMatrix, want_vectors: bool, pd_tol: f64) -> Result<Eigen> {
    let n = a.size();
    if b.size() != n {
        return Err(Error::DimensionMismatch(format!("pencil sizes {} and {}", n, b.size())));
    }
    let l = cholesky(b, pd_tol)?;
    // X = L^{-1} A, row by row.
    let mut x = vec![0.0; n * n];
    forward_solve_rows(&l, a.as_slice(), &mut x, n);
    // C = L^{-1} X^T
    let xt = transpose(&x, n);
    let mut c = vec![0.0; n * n];
    forward_solve_rows(&l, &xt, &mut c, n);
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[i * n + j] + c[j * n + i]);
            c[i * n + j] = avg;
            c[j * n + i] = avg;
        }
    }
    let reduced = SymMatrix { n, data: c };
    let mut eig = decompose(&reduced, want_vectors)?;
    if let Some(vecs) = eig.vectors.as_mut() {
        // x = L^{-T} y for every eigenvector row y.
        for k in 0..n {
            let y = &mut vecs[k * n..(k + 1) * n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for j in i + 1..n {
                    s -= l[j * n + i] * y[j];
                }
                y[i] = s / l[i * n + i];
            }
        }
    }
    Ok(eig)
}

fn forward_solve_rows(l: &[f64], rhs: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        let mut row = rhs[i * n..(i + 1) * n].to_vec();
        for k in 0..i {
            let lik = l[i * n + k];
            if lik != 0.0 {
                let prev = &out[k * n..(k + 1) * n];
                for c in 0..n {
                    row[c] -= lik * prev[c];
                }
            }
        }
        let inv = 1.0 / l[i * n + i];
        for (o, r) in out[i * n..(i + 1) * n].iter_mut().zip(&row) {
            *o = r * inv;
        }
    }
}
