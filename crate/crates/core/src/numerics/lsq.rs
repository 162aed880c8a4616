//! Weighted linear least squares by Householder QR.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub coefficients: Vec<f64>,
    /// Standard errors from the residual variance and `(R^T R)^{-1}`.
    pub std_errors: Vec<f64>,
    /// Ratio of largest to smallest |R_ii| after column scaling.
    pub condition: f64,
    pub residual_norm: f64,
}

/// Minimise `sum_i w_i^2 (y_i - sum_j X_ij c_j)^2`. `design` is row-major with
/// `cols` columns. Columns are scaled to unit norm before factoring.
pub fn weighted_lsq(design: &[f64], cols: usize, y: &[f64], w: &[f64]) -> Result<LsqFit> {
    let rows = y.len();
    if design.len() != rows * cols || w.len() != rows {
        return Err(Error::DimensionMismatch("least-squares inputs".into()));
    }
    if rows < cols {
        return Err(Error::WindowTooShort { points: rows, required: cols });
    }
    // Column-major working copy of W X.
    let mut a = vec![0.0; rows * cols];
    let mut b: Vec<f64> = y.iter().zip(w).map(|(y, w)| y * w).collect();
    for i in 0..rows {
        for j in 0..cols {
            a[j * rows + i] = design[i * cols + j] * w[i];
        }
    }
    let mut scale = vec![1.0; cols];
    for j in 0..cols {
        let n = a[j * rows..(j + 1) * rows].iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        scale[j] = n;
        a[j * rows..(j + 1) * rows].iter_mut().for_each(|v| *v /= n);
    }

    let mut rdiag = vec![0.0; cols];
    for k in 0..cols {
        let col = &a[k * rows..(k + 1) * rows];
        let norm = col[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[k..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        rdiag[k] = alpha;
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in k..cols {
            let c = &mut a[j * rows + k..(j + 1) * rows];
            let s: f64 = beta * c.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
            c.iter_mut().zip(&v).for_each(|(x, y)| *x -= s * y);
        }
        let s: f64 = beta * b[k..].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        b[k..].iter_mut().zip(&v).for_each(|(x, y)| *x -= s * y);
    }
    let r = |i: usize, j: usize| a[j * rows + i];

    let dmax = rdiag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmin = rdiag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let condition = if dmin == 0.0 { f64::INFINITY } else { dmax / dmin };
    if !condition.is_finite() {
        return Err(Error::IllConditioned(condition));
    }

    let mut c = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut s = b[i];
        for j in i + 1..cols {
            s -= r(i, j) * c[j];
        }
        c[i] = s / r(i, i);
    }
    let residual_norm = b[cols..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let dof = (rows - cols).max(1) as f64;
    let sigma2 = residual_norm * residual_norm / dof;

    // diag((R^T R)^{-1}) = row norms of R^{-1}
    let mut rinv = vec![0.0; cols * cols];
    for j in 0..cols {
        for i in (0..=j).rev() {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in i + 1..=j {
                s -= r(i, k) * rinv[k * cols + j];
            }
            rinv[i * cols + j] = s / r(i, i);
        }
    }
    let std_errors = (0..cols)
        .map(|i| {
            let row: f64 = (0..cols).map(|j| rinv[i * cols + j].powi(2)).sum();
            (sigma2 * row).sqrt() / scale[i]
        })
        .collect();
    let coefficients = c.iter().zip(&scale).map(|(c, s)| c / s).collect();
    Ok(LsqFit { coefficients, std_errors, condition, residual_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomial_recovered() {
        let ts: Vec<f64> = (0..30).map(|i| 0.01 * (i as f64 + 1.0)).collect();
        let mut design = Vec::new();
        let mut y = Vec::new();
        for &t in &ts {
            design.extend_from_slice(&[1.0, t, t * t]);
            y.push(2.0 - 3.0 * t + 0.5 * t * t);
        }
        let w: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
        let fit = weighted_lsq(&design, 3, &y, &w).unwrap();
        for (c, e) in fit.coefficients.iter().zip([2.0, -3.0, 0.5]) {
            assert!((c - e).abs() < 1e-10);
        }
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            weighted_lsq(&[1.0, 2.0], 2, &[1.0], &[1.0]),
            Err(Error::WindowTooShort { .. })
        ));
    }
}
