//! Lawson–Hanson active-set non-negative least squares for tall, thin
//! problems (many rows, a handful of columns).

/// Absolute tolerance on the gradient used for optimality decisions.
pub const TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// Squared residual norm ‖Ax − b‖².
    pub objective: f64,
    pub outer_iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(cols: &[&[f64]], x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    for (c, &xj) in cols.iter().zip(x) {
        if xj != 0.0 {
            for (ri, ci) in r.iter_mut().zip(c.iter()) {
                *ri -= xj * ci;
            }
        }
    }
    r
}

/// Least squares on a subset of columns via Householder QR. Returns `None`
/// if the subset is numerically rank deficient.
fn least_squares(cols: &[&[f64]], subset: &[usize], b: &[f64]) -> Option<Vec<f64>> {
    let n = subset.len();
    let mut a: Vec<Vec<f64>> = subset.iter().map(|&j| cols[j].to_vec()).collect();
    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let alpha_sq: f64 = a[k][k..].iter().map(|v| v * v).sum();
        let alpha = alpha_sq.sqrt();
        if alpha <= 1e-12 * norms[k] || alpha == 0.0 {
            return None;
        }
        let sign = if a[k][k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = a[k][k..].to_vec();
        v[0] += sign * alpha;
        let vv = dot(&v, &v);
        let reflect = |col: &mut [f64]| {
            let f = 2.0 * dot(&v, col) / vv;
            for (ci, vi) in col.iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        };
        for col in a.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut rhs[k..]);
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= a[j][i] * z[j];
        }
        z[i] = acc / a[i][i];
    }
    Some(z)
}

/// Solves min ‖Ax − b‖ subject to x ≥ 0, with A given column by column.
pub fn nnls(cols: &[&[f64]], b: &[f64]) -> NnlsSolution {
    let k = cols.len();
    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    // Columns that would make the passive set singular.
    let mut blocked = vec![false; k];
    let mut outer = 0;

    while outer < 3 * k {
        let r = residual(cols, &x, b);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && !blocked[j])
            .map(|j| (j, dot(cols[j], &r)))
            .filter(|&(_, g)| g > TOLERANCE)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((t, _)) = candidate else { break };
        outer += 1;
        passive[t] = true;

        loop {
            let subset: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            if subset.is_empty() {
                break;
            }
            let Some(z) = least_squares(cols, &subset, b) else {
                passive[t] = false;
                blocked[t] = true;
                break;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (&j, &v) in subset.iter().zip(&z) {
                    x[j] = v;
                }
                break;
            }
            // Move from x towards z until the first passive variable hits 0.
            let (mut alpha, mut leaving) = (f64::INFINITY, subset[0]);
            for (&j, &zj) in subset.iter().zip(&z) {
                if zj <= 0.0 {
                    let a = x[j] / (x[j] - zj);
                    if a < alpha {
                        alpha = a;
                        leaving = j;
                    }
                }
            }
            for (&j, &zj) in subset.iter().zip(&z) {
                x[j] += alpha * (zj - x[j]);
            }
            x[leaving] = 0.0;
            for &j in &subset {
                if x[j] <= 0.0 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }

    let r = residual(cols, &x, b);
    NnlsSolution {
        objective: dot(&r, &r),
        x,
        outer_iterations: outer,
    }
}
