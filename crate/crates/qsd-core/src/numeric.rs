//! Small numerical utilities shared across the crate: compensated summation
//! with a cancellation diagnostic, grids, least-squares line fits, and an
//! adaptive Simpson integrator.

/// Result of a compensated sum over signed terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedSum {
    pub value: f64,
    /// Sum of absolute values of the terms. The ratio `abs / |value|` grows
    /// when the result comes from cancellation of large terms.
    pub abs: f64,
}

impl SignedSum {
    /// Ratio of the absolute-term mass to the result; large values mean the
    /// digits of `value` are mostly noise.
    pub fn cancellation_ratio(&self) -> f64 {
        if self.value == 0.0 {
            if self.abs == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.abs / self.value.abs()
        }
    }
}

/// Neumaier compensated summation, tracking the absolute-value mass.
pub fn compensated_sum(terms: impl Iterator<Item = f64>) -> SignedSum {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs = 0.0f64;
    for t in terms {
        abs += t.abs();
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    SignedSum { value: sum + comp, abs }
}

/// `count` points spaced geometrically over `[a, b]`, endpoints included.
pub fn log_spaced(a: f64, b: f64, count: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && count >= 2, "need 0 < a < b, count >= 2");
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|k| (la + (lb - la) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// `count` points spaced evenly over `[a, b]`, endpoints included.
pub fn lin_spaced(a: f64, b: f64, count: usize) -> Vec<f64> {
    assert!(b > a && count >= 2, "need a < b, count >= 2");
    (0..count)
        .map(|k| a + (b - a) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Ordinary least-squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for a perfect two-point system).
    pub stderr_slope: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "need at least two points");
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| b - (intercept + slope * a))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let stderr_slope = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        stderr_slope,
        r_squared,
        residuals,
    }
}

/// Least-squares fit of `y = c0 + c1 * x + c2 * w` for an extra regressor `w`,
/// by solving the 3x3 normal equations.
pub fn fit_line_with_extra(x: &[f64], w: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 3 || w.len() != n || y.len() != n {
        return None;
    }
    // normal matrix for the basis (1, x, w)
    let mut a = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for k in 0..n {
        let row = [1.0, x[k], w[k]];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * y[k];
        }
    }
    solve3(a, rhs)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<(f64, f64, f64)> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let m = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (entry, pv) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *entry -= m * pv;
            }
            b[row] -= m * b[col];
        }
    }
    for col in (0..3).rev() {
        for k in col + 1..3 {
            b[col] -= a[col][k] * b[k];
        }
        b[col] /= a[col][col];
    }
    Some((b[0], b[1], b[2]))
}

/// Adaptive Simpson quadrature with a Richardson error estimate.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
