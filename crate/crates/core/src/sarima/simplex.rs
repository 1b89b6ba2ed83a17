//! Nelder-Mead simplex minimization.

pub(crate) struct SimplexOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct SimplexOptions {
    pub max_iter: usize,
    /// Stop when the spread of objective values across the simplex falls
    /// below this fraction of the best value.
    pub rel_tol: f64,
    pub step: f64,
}

/// Minimizes `f` from `start`. The start vertex is part of the initial
/// simplex, so the returned value never exceeds `f(start)`.
pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, start: &[f64], opts: &SimplexOptions) -> SimplexOutcome {
    let n = start.len();
    let f0 = sanitize(f(start));
    if n == 0 {
        return SimplexOutcome { best: Vec::new(), value: f0, iterations: 0, converged: true };
    }
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut vals = vec![f0];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += if p[i].abs() > 1e-3 { opts.step * p[i].abs().max(1.0) } else { opts.step };
        vals.push(sanitize(f(&p)));
        pts.push(p);
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        if vals[n].is_finite() && spread <= opts.rel_tol * vals[0].abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };

        let reflected = along(-alpha);
        let fr = sanitize(f(&reflected));
        if fr < vals[0] {
            let expanded = along(-gamma);
            let fe = sanitize(f(&expanded));
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
            continue;
        }
        let (candidate, fc) = if fr < vals[n] {
            let c = along(-rho);
            let v = sanitize(f(&c));
            (c, v)
        } else {
            let c = along(rho);
            let v = sanitize(f(&c));
            (c, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = candidate;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = (0..n).map(|j| pts[0][j] + sigma * (pts[i][j] - pts[0][j])).collect();
            vals[i] = sanitize(f(&shrunk));
            pts[i] = shrunk;
        }
    }
    let best_idx = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexOutcome { best: pts[best_idx].clone(), value: vals[best_idx], iterations, converged }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}
