//! Lag polynomials. An AR-side polynomial `1 - Σ a_i z^i` is stored as
//! `[a_1, .., a_p]`; an MA-side polynomial `1 + Σ b_i z^i` as `[b_1, .., b_q]`.

use nalgebra::{Complex, DMatrix};

/// Reciprocal roots closer to the unit circle than this are treated as on it.
const UNIT_MARGIN: f64 = 1e-8;

/// Coefficients of `(1 - Σ a_i z^i)(1 - Σ A_i z^{m i})` in AR-side form.
pub fn expand_ar(short: &[f64], seasonal: &[f64], m: usize) -> Vec<f64> {
    let full = multiply(&to_full(short, -1.0, 1), &to_full(seasonal, -1.0, m));
    full[1..].iter().map(|c| -c).collect()
}

/// Coefficients of `(1 + Σ b_i z^i)(1 + Σ B_i z^{m i})` in MA-side form.
pub fn expand_ma(short: &[f64], seasonal: &[f64], m: usize) -> Vec<f64> {
    let full = multiply(&to_full(short, 1.0, 1), &to_full(seasonal, 1.0, m));
    full[1..].to_vec()
}

/// Coefficients `[1, c_1, ..]` of `(1 - z)^d (1 - z^m)^D`.
pub fn differencing(d: usize, big_d: usize, m: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    for _ in 0..d {
        poly = multiply(&poly, &[1.0, -1.0]);
    }
    let mut seasonal = vec![0.0; m + 1];
    seasonal[0] = 1.0;
    seasonal[m] = -1.0;
    for _ in 0..big_d {
        poly = multiply(&poly, &seasonal);
    }
    poly
}

fn to_full(coef: &[f64], sign: f64, stride: usize) -> Vec<f64> {
    let mut full = vec![0.0; coef.len() * stride + 1];
    full[0] = 1.0;
    for (i, c) in coef.iter().enumerate() {
        full[(i + 1) * stride] = sign * c;
    }
    full
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Reciprocal roots of `1 - Σ a_i z^i`, i.e. eigenvalues of the companion
/// matrix. All have modulus below one exactly when every root lies outside
/// the unit circle.
pub fn reciprocal_roots(ar_side: &[f64]) -> Vec<Complex<f64>> {
    let p = ar_side.len();
    match p {
        0 => Vec::new(),
        1 => vec![Complex::new(ar_side[0], 0.0)],
        _ => {
            let mut c = DMatrix::zeros(p, p);
            for j in 0..p {
                c[(0, j)] = ar_side[j];
            }
            for i in 1..p {
                c[(i, i - 1)] = 1.0;
            }
            c.complex_eigenvalues().iter().copied().collect()
        }
    }
}

/// Largest modulus among the reciprocal roots of `1 - Σ a_i z^i`.
pub fn max_reciprocal_modulus(ar_side: &[f64]) -> f64 {
    match ar_side {
        [] => 0.0,
        [a] => a.abs(),
        _ => reciprocal_roots(ar_side).iter().map(|r| r.norm()).fold(0.0, f64::max),
    }
}

/// True when every root of `1 - Σ a_i z^i` lies strictly outside the unit
/// circle.
pub fn ar_is_stable(ar_side: &[f64]) -> bool {
    match ar_side {
        [] => true,
        [a] => a.abs() < 1.0 - UNIT_MARGIN,
        _ => reciprocal_roots(ar_side).iter().all(|r| r.norm() < 1.0 - UNIT_MARGIN),
    }
}

/// True when every root of `1 + Σ b_i z^i` lies strictly outside the unit
/// circle.
pub fn ma_is_invertible(ma_side: &[f64]) -> bool {
    let negated: Vec<f64> = ma_side.iter().map(|b| -b).collect();
    ar_is_stable(&negated)
}

/// Reflects reciprocal roots outside the unit disc to `1 / conj(r)` and
/// rebuilds the AR-side coefficients. Roots on the circle are pulled just
/// inside.
pub fn flip_ar(ar_side: &[f64]) -> Vec<f64> {
    if ar_is_stable(ar_side) {
        return ar_side.to_vec();
    }
    let inside = 1.0 - 1e-4;
    let roots: Vec<Complex<f64>> = reciprocal_roots(ar_side)
        .into_iter()
        .map(|r| {
            let norm = r.norm();
            if norm > 1.0 + 1e-12 {
                Complex::new(1.0, 0.0) / r.conj()
            } else if norm >= 1.0 - UNIT_MARGIN {
                r * (inside / norm)
            } else {
                r
            }
        })
        .collect();
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c.re).collect()
}

/// MA-side counterpart of [`flip_ar`].
pub fn flip_ma(ma_side: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = ma_side.iter().map(|b| -b).collect();
    flip_ar(&negated).into_iter().map(|a| -a).collect()
}
