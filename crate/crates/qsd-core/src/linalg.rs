//! Symmetric tridiagonal eigenproblems.
//!
//! Full decompositions go through LAPACK `dstemr` (MRRR). The divide-and-conquer
//! route (`dstevd`) silently returns non-orthogonal vectors and wrong small
//! eigenvalues on strongly graded matrices like the symmetrized critical
//! birth-death block, so it is not used; see the bisection cross-checks in the
//! tests.
//!
//! Bisection with Sturm counts provides eigenvalue-only queries, and shifted
//! inverse iteration provides the bottom eigenpair without a full
//! decomposition. Both are independent of the LAPACK path, which the test
//! suite exploits.

use ndarray::Array2;
use std::ffi::c_char;

use crate::error::{Error, Result};

/// A symmetric tridiagonal matrix: `diag` of length n, `off` of length n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Structure("empty matrix".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::Structure(format!(
                "off-diagonal length {} does not match dimension {}",
                off.len(),
                diag.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// y = A x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }
}

/// Number of eigenvalues strictly below `x`, by the Sturm (LDL^T sign) count.
pub fn eigenvalues_below(t: &SymTridiag, x: f64) -> usize {
    let n = t.dim();
    let mut count = 0usize;
    let mut d = t.diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let prev = if d == 0.0 { 1e-300 } else { d };
        d = (t.diag[i] - x) - t.off[i - 1] * t.off[i - 1] / prev;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue by bisection, to near machine precision.
pub fn smallest_eigenvalue(t: &SymTridiag) -> f64 {
    let (mut lo, mut hi) = t.gershgorin();
    let scale = lo.abs().max(hi.abs()).max(1.0);
    // invariant: count(lo) == 0, count(hi) >= 1
    while hi - lo > 1e-15 * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eigenvalues_below(t, mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Flips `v` so its first significant component is positive.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if max == 0.0 {
        return;
    }
    for &x in v.iter() {
        if x.abs() > 1e-8 * max {
            if x < 0.0 {
                v.iter_mut().for_each(|y| *y = -*y);
            }
            return;
        }
    }
}

/// Solves `(T - sigma I) x = rhs` by Gaussian elimination with partial
/// pivoting (one extra superdiagonal of fill).
fn solve_shifted(t: &SymTridiag, sigma: f64, rhs: &[f64]) -> Vec<f64> {
    let n = t.dim();
    let mut a = vec![0.0; n]; // subdiagonal entering row i
    let mut b: Vec<f64> = t.diag.iter().map(|&d| d - sigma).collect();
    let mut c = vec![0.0; n]; // superdiagonal
    let mut d2 = vec![0.0; n]; // second superdiagonal fill
    a[1..n].copy_from_slice(&t.off);
    c[..n - 1].copy_from_slice(&t.off);
    let mut x = rhs.to_vec();
    let tiny = 1e-300;
    let guard = |v: f64| if v.abs() < tiny { if v < 0.0 { -tiny } else { tiny } } else { v };
    for i in 0..n - 1 {
        if a[i + 1].abs() > b[i].abs() {
            // swap rows i and i+1 (row i spans columns i..=i+2, row i+1 columns i..=i+2)
            let lower = (a[i + 1], b[i + 1], c[i + 1]);
            let upper = (b[i], c[i], d2[i]);
            b[i] = lower.0;
            c[i] = lower.1;
            d2[i] = lower.2;
            a[i + 1] = upper.0;
            b[i + 1] = upper.1;
            c[i + 1] = upper.2;
            x.swap(i, i + 1);
        }
        let m = a[i + 1] / guard(b[i]);
        b[i + 1] -= m * c[i];
        c[i + 1] -= m * d2[i];
        x[i + 1] -= m * x[i];
        a[i + 1] = 0.0;
    }
    // back substitution
    for i in (0..n).rev() {
        let mut v = x[i];
        if i + 1 < n {
            v -= c[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= d2[i] * x[i + 2];
        }
        x[i] = v / guard(b[i]);
    }
    x
}

/// Bottom eigenpair by bisection plus shifted inverse iteration.
///
/// Independent of the LAPACK decomposition path; the returned vector is
/// normalized with its first significant component positive.
pub fn bottom_eigenpair(t: &SymTridiag) -> Result<(f64, Vec<f64>)> {
    let n = t.dim();
    if n == 1 {
        return Ok((t.diag[0], vec![1.0]));
    }
    let sigma = smallest_eigenvalue(t);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = sigma;
    let scale = t.gershgorin().1.abs().max(t.gershgorin().0.abs()).max(1.0);
    let mut resid = f64::INFINITY;
    for _ in 0..8 {
        let mut w = solve_shifted(t, sigma, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical("inverse iteration broke down".into()));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        // Rayleigh quotient and residual
        let mut tv = vec![0.0; n];
        t.apply(&w, &mut tv);
        lambda = w.iter().zip(&tv).map(|(a, b)| a * b).sum();
        resid = tv
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0_f64, f64::max);
        v = w;
        if resid <= 1e-13 * scale {
            break;
        }
    }
    if resid > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "inverse iteration residual {resid:.2e} exceeds 1e-10 * {scale:.2e}"
        )));
    }
    fix_sign(&mut v);
    Ok((lambda, v))
}

/// Full eigendecomposition via LAPACK `dstemr`.
///
/// Returns eigenvalues in ascending order and the orthonormal eigenvectors as
/// the columns of a standard-layout matrix indexed `[state, mode]`, each with
/// its first significant component positive.
pub fn eigh_tridiag(t: &SymTridiag) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = t.dim();
    if n == 1 {
        return Ok((vec![t.diag[0]], Array2::from_elem((1, 1), 1.0)));
    }
    let mut d = t.diag.clone();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&t.off);
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n * n];
    let mut isuppz = vec![0i32; 2 * n];
    let mut tryrac = 1i32;
    let lwork = 18 * n;
    let liwork = 10 * n;
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0i32; liwork];
    let (mut m, mut info) = (0i32, 0i32);
    let nn = n as i32;
    let (jobz, range) = (b'V' as c_char, b'A' as c_char);
    let (vl, vu, il, iu) = (0.0f64, 0.0f64, 0i32, 0i32);
    unsafe {
        lapack_sys::dstemr_(
            &jobz,
            &range,
            &nn,
            d.as_mut_ptr(),
            e.as_mut_ptr(),
            &vl,
            &vu,
            &il,
            &iu,
            &mut m,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &nn,
            &nn,
            isuppz.as_mut_ptr(),
            &mut tryrac,
            work.as_mut_ptr(),
            &(lwork as i32),
            iwork.as_mut_ptr(),
            &(liwork as i32),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dstemr failed with info = {info}")));
    }
    if m as usize != n {
        return Err(Error::Numerical(format!(
            "dstemr returned {m} of {n} eigenpairs"
        )));
    }
    // z is column-major with z[k*n + i] = u_k(i); re-store row-contiguous over
    // modes so the spectral sums stream through memory.
    let mut basis = Array2::zeros((n, n));
    for k in 0..n {
        let col = &mut z[k * n..(k + 1) * n];
        fix_sign(col);
        for i in 0..n {
            basis[[i, k]] = col[i];
        }
    }
    Ok((w, basis))
}
