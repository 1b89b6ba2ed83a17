//! Least-squares helpers shared by the unit-root test and the trend/seasonal
//! regression.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

pub(crate) struct OlsFit {
    pub coef: DVector<f64>,
    pub rss: f64,
    /// `(X'X)^{-1}`, the unscaled coefficient covariance.
    pub xtx_inv: DMatrix<f64>,
    pub nobs: usize,
}

impl OlsFit {
    pub fn sigma2(&self) -> f64 {
        self.rss / (self.nobs - self.coef.len()) as f64
    }

    pub fn std_err(&self, j: usize) -> f64 {
        (self.sigma2() * self.xtx_inv[(j, j)]).sqrt()
    }
}

/// Ordinary least squares through an SVD. Returns `None` when the design is
/// rank deficient.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<OlsFit> {
    let (n, k) = x.shape();
    if n <= k {
        return None;
    }
    // Column scaling keeps the rank test independent of regressor units.
    let scales: Vec<f64> = (0..k)
        .map(|j| {
            let norm = x.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = xs.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.iter().any(|&s| s <= RANK_TOL * smax) {
        return None;
    }
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let uty = u.transpose() * y;
    let mut coef_s = DVector::zeros(k);
    let mut inv_s = DMatrix::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        let vi = v_t.row(i).transpose();
        coef_s += &vi * (uty[i] / s);
        inv_s += &vi * vi.transpose() / (s * s);
    }
    let mut coef = coef_s;
    let mut xtx_inv = inv_s;
    for i in 0..k {
        coef[i] /= scales[i];
        for j in 0..k {
            xtx_inv[(i, j)] /= scales[i] * scales[j];
        }
    }
    let resid = y - x * &coef;
    Some(OlsFit { coef, rss: resid.norm_squared(), xtx_inv, nobs: n })
}

/// Solves `(X'X + diag(penalty)) b = X'y`. Returns `None` when the system is
/// not positive definite.
pub(crate) fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, penalty: &[f64]) -> Option<DVector<f64>> {
    let mut a = x.transpose() * x;
    for (j, p) in penalty.iter().enumerate() {
        a[(j, j)] += p;
    }
    let b = x.transpose() * y;
    let scale = a.diagonal().max();
    if !(scale > 0.0) {
        return None;
    }
    let chol = a.clone().cholesky()?;
    // A Cholesky factor with a tiny pivot means the system is numerically
    // singular even though the factorization succeeded.
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot <= 1e-12 * scale {
        return None;
    }
    Some(chol.solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_line() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(10, |i, _| 2.0 + 3.0 * i as f64);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-10 && (fit.coef[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn ols_detects_collinearity() {
        let x = DMatrix::from_fn(10, 2, |_, j| if j == 0 { 1.0 } else { 5.0 });
        let y = DVector::from_element(10, 1.0);
        assert!(ols(&x, &y).is_none());
    }

    #[test]
    fn ridge_zero_penalty_matches_ols() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * (j + 2)) as f64).sin() + j as f64);
        let y = DVector::from_fn(20, |i, _| (i as f64).cos());
        let a = ols(&x, &y).unwrap().coef;
        let b = ridge(&x, &y, &[0.0; 3]).unwrap();
        assert!((a - b).amax() < 1e-9);
    }
}
