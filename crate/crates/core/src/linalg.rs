//! Small dense symmetric positive definite helpers (row-major `f64`).

/// In-place Cholesky factorization `A = L Lᵀ` of a row-major symmetric
/// matrix. Only the lower triangle is referenced and written. Returns the
/// column index of the first non-positive pivot on failure.
pub fn cholesky(a: &mut [f64], n: usize) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let l = a[j * n + k];
            d -= l * l;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                s -= a[ri + k] * a[rj + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// `y = L x` for the lower triangle of a factored matrix.
pub fn lower_mul(l: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), n);
    for i in 0..n {
        let row = &l[i * n..i * n + i + 1];
        let mut s = 0.0;
        for (lik, xk) in row.iter().zip(x.iter()) {
            s += lik * xk;
        }
        y[i] = s;
    }
}

/// Solves `A x = b` for symmetric positive definite `A`, destroying both.
/// Returns `None` when the factorization breaks down.
pub fn solve_spd(a: &mut [f64], n: usize, b: &mut [f64]) -> Option<()> {
    cholesky(a, n).ok()?;
    // forward substitution L z = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // back substitution Lᵀ x = z
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Some(())
}
