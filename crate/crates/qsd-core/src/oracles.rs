//! Closed-form reference quantities for golden tests.
//!
//! Killed M/M/1 queue (arrival `p`, service `q > p`, constants `a = p+q`,
//! `b = sqrt(p/q)`, `theta = 2 sqrt(pq)`):
//!
//! * decay parameter `lambda = a - theta`;
//! * invariant measure `m_j = j b^{j-1}` and vector `x_i = i b^{1-i}`
//!   (normalized so `m_1 = x_1 = 1`);
//! * limiting conditional distribution `(1-b)^2 j b^{j-1}`;
//! * long-time transition and survival laws
//!   `p_ij(t) ~ i j b^{j-i} (2 / (theta sqrt(2 pi theta))) t^{-3/2} e^{-lambda t}` and
//!   `1 - p_{i0}(t) ~ (i b^{-i} / (lambda sqrt(2 pi theta))) t^{-3/2} e^{-lambda t}`;
//! * resolvent `G_ij = integral of e^{lambda t} p_ij(t)`: solving the
//!   three-term recurrence `theta y_i = p y_{i+1} + q y_{i-1} + delta_ij` with
//!   `y_0 = 0` gives `(2/theta) min(i,j) b^{j-i}`. The displayed literature
//!   value `2i/theta` matches at `i = j` but carries neither the `min` nor the
//!   `b^{j-i}` factor; both candidates are reported by the classifier rather
//!   than silently reconciled.
//!
//! Critical linear birth-death chain (rate `rho` per individual):
//! `p_{10}(t) = rho t / (1 + rho t)` and
//! `p_{1j}(t) = (rho t)^{j-1} / (1 + rho t)^{j+1}`.
//!
//! Continuous-time random walk on the integers:
//! `p_{00}(t) = e^{-(p+q) t} I_0(2 sqrt(pq) t)`.

use crate::error::{Error, Result};
use crate::model::Mm1Constants;

/// Modified Bessel function `I_0(z)` for `z >= 0`.
///
/// Power series with term-ratio stopping below `z = 100`, large-argument
/// expansion above; the two branches agree near the crossover to full
/// precision (asserted in the tests).
pub fn bessel_i0(z: f64) -> f64 {
    if z > 100.0 {
        return log_bessel_i0(z).exp();
    }
    i0_series(z)
}

/// `ln I_0(z)`, valid for arbitrarily large `z`.
pub fn log_bessel_i0(z: f64) -> f64 {
    if z <= 100.0 {
        return i0_series(z).ln();
    }
    z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + i0_asymptotic_factor(z).ln()
}

fn i0_series(z: f64) -> f64 {
    let w = 0.25 * z * z;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..1000 {
        term *= w / ((k * k) as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

/// The slowly varying factor in `I_0(z) = e^z / sqrt(2 pi z) * factor`.
fn i0_asymptotic_factor(z: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..60u32 {
        let kf = k as f64;
        // term_k = term_{k-1} * (2k-1)^2 / (8 k z)
        term *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf * z);
        if term < 1e-16 * sum {
            break;
        }
        sum += term;
    }
    sum
}

fn mm1_constants(p: f64, q: f64) -> Result<Mm1Constants> {
    if !(p > 0.0) || !(q > 0.0) || !p.is_finite() || !q.is_finite() {
        return Err(Error::Domain(format!("rates must be positive, got p={p}, q={q}")));
    }
    if p >= q {
        return Err(Error::Domain(format!(
            "M/M/1 reference formulas require p < q, got p={p}, q={q}"
        )));
    }
    Ok(Mm1Constants::new(p, q))
}

fn check_state(name: &str, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::Domain(format!("{name} must be a transient state >= 1")));
    }
    Ok(())
}

fn check_time(t: f64, strict: bool) -> Result<()> {
    if !t.is_finite() || t < 0.0 || (strict && t == 0.0) {
        return Err(Error::Domain(format!("time {t} out of range")));
    }
    Ok(())
}

/// Decay parameter `p + q - 2 sqrt(pq)` of the killed M/M/1 queue.
pub fn mm1_lambda(p: f64, q: f64) -> Result<f64> {
    Ok(mm1_constants(p, q)?.lambda())
}

/// Invariant measure `m_j = j b^{j-1}` (normalized `m_1 = 1`).
pub fn mm1_m(p: f64, q: f64, j: usize) -> Result<f64> {
    check_state("j", j)?;
    let c = mm1_constants(p, q)?;
    Ok(j as f64 * c.b.powi(j as i32 - 1))
}

/// Invariant vector `x_i = i b^{1-i}` (normalized `x_1 = 1`).
pub fn mm1_x(p: f64, q: f64, i: usize) -> Result<f64> {
    check_state("i", i)?;
    let c = mm1_constants(p, q)?;
    Ok(i as f64 * c.b.powi(1 - i as i32))
}

/// Limiting conditional distribution `(1-b)^2 j b^{j-1}`.
pub fn mm1_lcd(p: f64, q: f64, j: usize) -> Result<f64> {
    check_state("j", j)?;
    let c = mm1_constants(p, q)?;
    Ok((1.0 - c.b) * (1.0 - c.b) * j as f64 * c.b.powi(j as i32 - 1))
}

/// Long-time transition law `i j b^{j-i} (2/(theta sqrt(2 pi theta))) t^{-3/2} e^{-lambda t}`.
pub fn mm1_asymptotic_p(p: f64, q: f64, i: usize, j: usize, t: f64) -> Result<f64> {
    Ok(mm1_log_asymptotic_p(p, q, i, j, t)?.exp())
}

/// Logarithm of [`mm1_asymptotic_p`], safe at very large `t`.
pub fn mm1_log_asymptotic_p(p: f64, q: f64, i: usize, j: usize, t: f64) -> Result<f64> {
    check_state("i", i)?;
    check_state("j", j)?;
    check_time(t, true)?;
    let c = mm1_constants(p, q)?;
    let tau = 2.0 * std::f64::consts::PI * c.theta;
    Ok((i as f64 * j as f64).ln() + (j as f64 - i as f64) * c.b.ln()
        + (2.0 / (c.theta * tau.sqrt())).ln()
        - 1.5 * t.ln()
        - c.lambda() * t)
}

/// Long-time survival law `(i b^{-i} / (lambda sqrt(2 pi theta))) t^{-3/2} e^{-lambda t}`.
pub fn mm1_asymptotic_survival(p: f64, q: f64, i: usize, t: f64) -> Result<f64> {
    Ok(mm1_log_asymptotic_survival(p, q, i, t)?.exp())
}

/// Logarithm of [`mm1_asymptotic_survival`].
pub fn mm1_log_asymptotic_survival(p: f64, q: f64, i: usize, t: f64) -> Result<f64> {
    check_state("i", i)?;
    check_time(t, true)?;
    let c = mm1_constants(p, q)?;
    let tau = 2.0 * std::f64::consts::PI * c.theta;
    Ok((i as f64).ln() - i as f64 * c.b.ln() - (c.lambda() * tau.sqrt()).ln()
        - 1.5 * t.ln()
        - c.lambda() * t)
}

/// Resolvent `(2/theta) min(i,j) b^{j-i}` from the three-term recurrence.
pub fn mm1_resolvent(p: f64, q: f64, i: usize, j: usize) -> Result<f64> {
    check_state("i", i)?;
    check_state("j", j)?;
    let c = mm1_constants(p, q)?;
    Ok(2.0 / c.theta * i.min(j) as f64 * c.b.powi(j as i32 - i as i32))
}

/// The displayed literature value `2i/theta` for the resolvent, reported as a
/// candidate alongside [`mm1_resolvent`].
pub fn mm1_resolvent_displayed(p: f64, q: f64, i: usize) -> Result<f64> {
    check_state("i", i)?;
    let c = mm1_constants(p, q)?;
    Ok(2.0 * i as f64 / c.theta)
}

/// Extinction probability `p_{10}(t) = rho t / (1 + rho t)` of the critical
/// linear birth-death chain started at 1.
pub fn critbd_extinction(rho: f64, t: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    check_time(t, false)?;
    Ok(rho * t / (1.0 + rho * t))
}

/// `p_{1j}(t) = (rho t)^{j-1} / (1 + rho t)^{j+1}` for `j >= 1`, evaluated in
/// the log domain so deep tails neither overflow nor turn into `inf/inf`.
pub fn critbd_p1j(rho: f64, j: usize, t: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    check_state("j", j)?;
    check_time(t, false)?;
    let rt = rho * t;
    if rt == 0.0 {
        return Ok(if j == 1 { 1.0 } else { 0.0 });
    }
    Ok(((j as f64 - 1.0) * rt.ln() - (j as f64 + 1.0) * rt.ln_1p()).exp())
}

/// Return probability `p_{00}(t) = e^{-(p+q)t} I_0(2 sqrt(pq) t)` of the
/// continuous-time random walk.
pub fn rw_return_probability(p: f64, q: f64, t: f64) -> Result<f64> {
    Ok(rw_log_return_probability(p, q, t)?.exp())
}

/// Logarithm of [`rw_return_probability`]; stays finite at large `t`.
pub fn rw_log_return_probability(p: f64, q: f64, t: f64) -> Result<f64> {
    if !(p > 0.0) || !(q > 0.0) {
        return Err(Error::Domain(format!("rates must be positive, got p={p}, q={q}")));
    }
    check_time(t, false)?;
    Ok(-(p + q) * t + log_bessel_i0(2.0 * (p * q).sqrt() * t))
}

/// Enumerated oracle quantities, for report plumbing.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleQuantity {
    Mm1Lambda { p: f64, q: f64 },
    Mm1M { p: f64, q: f64, j: usize },
    Mm1X { p: f64, q: f64, i: usize },
    Mm1Lcd { p: f64, q: f64, j: usize },
    Mm1AsymptoticP { p: f64, q: f64, i: usize, j: usize, t: f64 },
    Mm1AsymptoticSurvival { p: f64, q: f64, i: usize, t: f64 },
    Mm1Resolvent { p: f64, q: f64, i: usize, j: usize },
    CritBdExtinction { rho: f64, t: f64 },
    CritBdP1j { rho: f64, j: usize, t: f64 },
    RwReturn { p: f64, q: f64, t: f64 },
}

/// Evaluates an oracle quantity, with domain checks.
pub fn oracle_eval(q: &OracleQuantity) -> Result<f64> {
    use OracleQuantity::*;
    match *q {
        Mm1Lambda { p, q } => mm1_lambda(p, q),
        Mm1M { p, q, j } => mm1_m(p, q, j),
        Mm1X { p, q, i } => mm1_x(p, q, i),
        Mm1Lcd { p, q, j } => mm1_lcd(p, q, j),
        Mm1AsymptoticP { p, q, i, j, t } => mm1_asymptotic_p(p, q, i, j, t),
        Mm1AsymptoticSurvival { p, q, i, t } => mm1_asymptotic_survival(p, q, i, t),
        Mm1Resolvent { p, q, i, j } => mm1_resolvent(p, q, i, j),
        CritBdExtinction { rho, t } => critbd_extinction(rho, t),
        CritBdP1j { rho, j, t } => critbd_p1j(rho, j, t),
        RwReturn { p, q, t } => rw_return_probability(p, q, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn golden_values() {
        assert_abs_diff_eq!(mm1_lambda(1.0, 4.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mm1_lcd(1.0, 4.0, 2).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(mm1_m(1.0, 4.0, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mm1_m(1.0, 4.0, 3).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(mm1_x(1.0, 4.0, 2).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(critbd_extinction(1.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(rw_return_probability(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(mm1_resolvent(1.0, 4.0, 1, 1).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mm1_resolvent(1.0, 4.0, 1, 2).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn domain_checks() {
        assert!(mm1_lambda(4.0, 1.0).is_err()); // needs p < q
        assert!(mm1_lcd(1.0, 4.0, 0).is_err());
        assert!(mm1_asymptotic_p(1.0, 4.0, 1, 1, 0.0).is_err());
        assert!(critbd_extinction(-1.0, 1.0).is_err());
        assert!(rw_return_probability(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn critbd_laws_form_a_distribution() {
        for &t in &[0.3, 1.0, 2.0, 7.5] {
            let mut total = critbd_extinction(1.0, t).unwrap();
            for j in 1..4000 {
                total += critbd_p1j(1.0, j, t).unwrap();
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn resolvent_satisfies_recurrence() {
        let (p, q) = (1.0, 4.0);
        let theta = 4.0;
        for j in 1..=10usize {
            for i in 1..=10usize {
                let y = |k: usize| -> f64 {
                    if k == 0 {
                        0.0
                    } else {
                        mm1_resolvent(p, q, k, j).unwrap()
                    }
                };
                let lhs = theta * y(i);
                let rhs = p * y(i + 1) + q * y(i - 1) + if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn asymptotic_ratio_reproduces_lcd_exactly() {
        // p_ij / (1 - p_i0) limits: the algebraic identity behind the
        // conditional law
        for &(p, q) in &[(1.0, 4.0), (0.3, 0.7), (2.0, 9.0)] {
            for i in 1..=3usize {
                for j in 1..=6usize {
                    for &t in &[5.0, 50.0, 500.0] {
                        let num = mm1_log_asymptotic_p(p, q, i, j, t).unwrap();
                        let den = mm1_log_asymptotic_survival(p, q, i, t).unwrap();
                        let lcd = mm1_lcd(p, q, j).unwrap();
                        assert_relative_eq!((num - den).exp(), lcd, max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn bessel_branches_agree_at_crossover() {
        for &z in &[80.0, 95.0, 99.9, 100.1, 110.0, 130.0] {
            let series = i0_series(z).ln();
            let asym = z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + i0_asymptotic_factor(z).ln();
            assert_relative_eq!(series, asym, max_relative = 1e-13);
        }
        // small-argument sanity: I_0(0) = 1, I_0(1) known value
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_relative_eq!(bessel_i0(1.0), 1.2660658777520084, max_relative = 1e-14);
    }

    #[test]
    fn oracle_eval_dispatches() {
        let v = oracle_eval(&OracleQuantity::Mm1Lambda { p: 1.0, q: 4.0 }).unwrap();
        assert_eq!(v, 1.0);
        assert!(oracle_eval(&OracleQuantity::CritBdP1j { rho: 1.0, j: 0, t: 1.0 }).is_err());
    }
}
