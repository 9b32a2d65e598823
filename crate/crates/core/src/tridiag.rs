use crate::error::{PcfError, Result};

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
        return Err(PcfError::SingularSolve { row: 0 });
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
            return Err(PcfError::SingularSolve { row: i });
        }
        c[i] = if i + 1 < n { sup[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_diagonally_dominant_system() {
        let n = 6;
        let sub = vec![-1.0; n];
        let diag = vec![4.0; n];
        let sup = vec![-1.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut r = diag[i] * x_true[i];
                if i > 0 {
                    r += sub[i] * x_true[i - 1];
                }
                if i + 1 < n {
                    r += sup[i] * x_true[i + 1];
                }
                r
            })
            .collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let r = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(PcfError::SingularSolve { row: 0 })));
    }
}
