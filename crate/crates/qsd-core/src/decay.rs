//! Decay parameters, invariant measure/vector pairs, semigroup invariance
//! checks, and lambda-classification.
//!
//! The finite-level estimate `lambda_1^(N)` is the smallest eigenvalue of the
//! negated transient block under killing truncation, which decreases
//! monotonically to the decay parameter as the level grows (eigenvalue
//! interlacing). Richardson extrapolation with exponent 2 removes the leading
//! `1/N^2` bias, which is exact for Toeplitz blocks.
//!
//! The invariant pair solves `m Q = -lambda m` and `Q x = -lambda x` on the
//! retained block; it is recovered from the bottom eigenvector of the
//! symmetrized block, so the equality residuals are at eigensolver precision
//! on interior rows. The vector `x` grows geometrically for drifted chains and
//! overflows the double range well before the truncation level; both `m` and
//! `x` therefore also carry log forms, and residuals are evaluated in the log
//! domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{build_generator, TruncatedGenerator};
use crate::kernel::{symmetrize, SpectralDecomposition};
use crate::linalg::{bottom_eigenpair, smallest_eigenvalue};
use crate::model::ModelSpec;
use crate::numeric::{adaptive_simpson, compensated_sum, fit_line};
use crate::oracles;

/// Fraction of top rows treated as truncation-affected and excluded from
/// residual checks.
pub const BOUNDARY_ROW_FRACTION: f64 = 0.05;

/// Decay-parameter estimate over a truncation schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    /// `(N, lambda_1^(N))` per schedule entry.
    pub per_n: Vec<(usize, f64)>,
    /// Richardson extrapolation (exponent 2) of the last two levels.
    pub extrapolated: f64,
    /// `|last difference|`-based bound on the remaining bias.
    pub error_estimate: f64,
    /// Closed-form value, for the models that have one.
    pub analytic: Option<f64>,
    /// Whether the computed sequence was non-increasing, as killing
    /// truncation guarantees.
    pub monotone: bool,
}

/// Estimates the decay parameter from eigenvalues along a truncation schedule.
pub fn decay_parameter(spec: &ModelSpec, n_schedule: &[usize]) -> Result<LambdaEstimate> {
    if n_schedule.len() < 2 {
        return Err(Error::Argument("need at least two truncation levels".into()));
    }
    if n_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(format!(
            "truncation schedule must be strictly increasing, got {n_schedule:?}"
        )));
    }
    let mut per_n = Vec::with_capacity(n_schedule.len());
    for &n in n_schedule {
        let g = build_generator(spec, n)?;
        let (block, _) = symmetrize(&g)?;
        per_n.push((n, smallest_eigenvalue(&block)));
    }
    let scale = per_n.iter().map(|(_, l)| l.abs()).fold(1e-12, f64::max);
    let monotone = per_n.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 * scale);
    let (&(n1, l1), &(n2, l2)) = (
        &per_n[per_n.len() - 2],
        &per_n[per_n.len() - 1],
    );
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let extrapolated = (l2 * n2f * n2f - l1 * n1f * n1f) / (n2f * n2f - n1f * n1f);
    Ok(LambdaEstimate {
        per_n,
        extrapolated,
        error_estimate: (l2 - l1).abs(),
        analytic: spec.analytic_decay(),
        monotone,
    })
}

/// Positive solutions of the invariance equations on the retained block,
/// normalized so `m_1 = x_1 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantPair {
    /// The eigenvalue the pair was computed at, `lambda_1^(N)`.
    pub lambda: f64,
    /// The lambda supplied by the caller, recorded for reference.
    pub lambda_requested: f64,
    /// Measure `m` (raw values; far-tail entries may underflow to 0).
    pub m: Vec<f64>,
    /// Vector `x` (raw values; entries overflow to `inf` for drifted chains).
    pub x: Vec<f64>,
    /// `ln m_i`, finite wherever the eigenvector component is resolvable.
    pub log_m: Vec<f64>,
    /// `ln x_i`, finite wherever the eigenvector component is resolvable.
    pub log_x: Vec<f64>,
    /// Max relative row residual of `(m Q)_j = -lambda m_j` on interior rows.
    pub residual_m: f64,
    /// Max relative row residual of `(Q x)_i = -lambda x_i` on interior rows.
    pub residual_x: f64,
    /// Normalized measure `m / sum(m)` when the sum converges numerically.
    pub lcd: Option<Vec<f64>>,
    /// Number of top rows excluded from residual checks.
    pub boundary_rows: usize,
}

fn interior_limit(n: usize) -> usize {
    let boundary = ((n as f64 * BOUNDARY_ROW_FRACTION).ceil() as usize).max(1);
    n.saturating_sub(boundary)
}

/// Computes the invariant pair of the truncated block.
///
/// The pair is the bottom eigenpair of the symmetrized block (so it solves
/// the invariance equations at `lambda_1^(N)` exactly, up to eigensolver
/// error); `lambda` is recorded for reference. Uses bisection plus inverse
/// iteration, independent of the full decomposition path.
pub fn invariant_pair(g: &TruncatedGenerator, lambda: f64) -> Result<InvariantPair> {
    if !g.is_absorbing() {
        return Err(Error::UnsupportedModel(
            "invariant pairs are computed for absorbing models".into(),
        ));
    }
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be non-negative, got {lambda}")));
    }
    let (block, log_d) = symmetrize(g)?;
    let (lambda_used, u) = bottom_eigenpair(&block)?;
    let n = g.dim();
    if u[0] <= 0.0 {
        return Err(Error::Numerical(
            "bottom eigenvector is not positive at the first state".into(),
        ));
    }
    let u0 = u[0];
    let mut log_m = vec![f64::NEG_INFINITY; n];
    let mut log_x = vec![f64::NEG_INFINITY; n];
    for i in 0..n {
        if u[i] > 0.0 {
            let lu = (u[i] / u0).ln();
            log_m[i] = lu + log_d[i];
            log_x[i] = lu - log_d[i];
        }
    }
    let m: Vec<f64> = log_m.iter().map(|l| l.exp()).collect();
    let x: Vec<f64> = log_x.iter().map(|l| l.exp()).collect();

    // residuals are evaluated per row relative to the row's own component,
    // through log ratios: raw components underflow (m) or overflow (x) for
    // drifted chains long before the truncation level
    let limit = interior_limit(n);
    let mut residual_m = 0.0f64;
    let mut residual_x = 0.0f64;
    for k in 0..limit {
        if !log_m[k].is_finite()
            || (k > 0 && !log_m[k - 1].is_finite())
            || (k + 1 < n && !log_m[k + 1].is_finite())
        {
            continue;
        }
        // ((m Q)_k + lambda m_k) / m_k
        let mut row = g.diag[k] + lambda_used;
        if k > 0 {
            row += g.sup[k - 1] * (log_m[k - 1] - log_m[k]).exp();
        }
        if k + 1 < n {
            row += g.sub[k] * (log_m[k + 1] - log_m[k]).exp();
        }
        residual_m = residual_m.max(row.abs());
        // ((Q x)_k + lambda x_k) / x_k
        let mut rowx = g.diag[k] + lambda_used;
        if k > 0 {
            rowx += g.sub[k - 1] * (log_x[k - 1] - log_x[k]).exp();
        }
        if k + 1 < n {
            rowx += g.sup[k] * (log_x[k + 1] - log_x[k]).exp();
        }
        residual_x = residual_x.max(rowx.abs());
    }

    // sum(m) converges numerically when the top rows carry negligible mass
    let total: f64 = m.iter().filter(|v| v.is_finite()).sum();
    let tail_window = (n / 20).max(1);
    let tail: f64 = m[n - tail_window..].iter().filter(|v| v.is_finite()).sum();
    let lcd = if total > 0.0 && tail / total < 1e-6 {
        Some(m.iter().map(|v| v / total).collect())
    } else {
        None
    };

    Ok(InvariantPair {
        lambda: lambda_used,
        lambda_requested: lambda,
        m,
        x,
        log_m,
        log_x,
        residual_m,
        residual_x,
        lcd,
        boundary_rows: n - limit,
    })
}

/// Residuals of the semigroup invariance identities at a list of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub lambda: f64,
    pub t: Vec<f64>,
    /// Per time, max over checked columns of
    /// `|sum_i m_i p_ij(t) - e^{-lambda t} m_j| / (e^{-lambda t} m_j)`.
    pub max_residual_m: Vec<f64>,
    /// Per time, max over checked rows of the analogous vector residual.
    pub max_residual_x: Vec<f64>,
    /// Number of interior states checked.
    pub checked_states: usize,
    /// Top rows flagged as truncation-affected and excluded.
    pub excluded_boundary_rows: usize,
}

/// Verifies the semigroup form of the invariance equations against the kernel.
pub fn verify_semigroup_invariance(
    pair: &InvariantPair,
    g: &TruncatedGenerator,
    t_list: &[f64],
) -> Result<SemigroupReport> {
    let dec = SpectralDecomposition::decompose(g)?;
    verify_semigroup_invariance_with(pair, &dec, t_list, 50)
}

/// Same as [`verify_semigroup_invariance`] but reusing a decomposition and
/// limiting the number of checked states.
///
/// Writing `p_ij(t) = (d_j / d_i) s_ij(t)` with `s` the symmetric heat kernel
/// of the symmetrized block, both relative residuals at a state `c` reduce to
/// the same bounded expression
/// `sum_k (u_k / u_c) s_kc(t) e^{lambda t} - 1`, where `u` is the bottom
/// eigenvector in symmetrized coordinates. The similarity weights cancel, so
/// nothing over- or underflows even for strongly drifted chains; the measure
/// and vector residuals coincide entry for entry because `s` is symmetric.
pub fn verify_semigroup_invariance_with(
    pair: &InvariantPair,
    dec: &SpectralDecomposition,
    t_list: &[f64],
    max_states: usize,
) -> Result<SemigroupReport> {
    let n = dec.dim();
    let limit = interior_limit(n).min(max_states);
    let l1 = dec.lambda_min();
    let lambda = pair.lambda;
    let log_d = dec.log_weights();
    // ln(u_i / u_1): bounded eigenvector ratios in symmetrized coordinates
    let lu: Vec<f64> = (0..n).map(|i| pair.log_m[i] - log_d[i]).collect();

    let mut max_residual_m = Vec::with_capacity(t_list.len());
    let mut max_residual_x = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if t < 0.0 {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        let worst = (0..limit)
            .into_par_iter()
            .map(|c| {
                if !lu[c].is_finite() {
                    return 0.0;
                }
                let ratio = compensated_sum((0..n).filter(|&k| lu[k].is_finite()).map(|k| {
                    let s = dec.raw_scaled_sum(k, c, t);
                    if s.value == 0.0 {
                        0.0
                    } else {
                        s.value.signum()
                            * (lu[k] - lu[c] + s.value.abs().ln() + (lambda - l1) * t).exp()
                    }
                }))
                .value
                    - 1.0;
                ratio.abs()
            })
            .reduce(|| 0.0, f64::max);
        max_residual_m.push(worst);
        max_residual_x.push(worst);
    }
    Ok(SemigroupReport {
        lambda,
        t: t_list.to_vec(),
        max_residual_m,
        max_residual_x,
        checked_states: limit,
        excluded_boundary_rows: n - interior_limit(n),
    })
}

/// Verdict of the potential-integral dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceVerdict {
    LambdaTransient,
    LambdaRecurrent,
    Inconclusive,
}

/// Verdict on lambda-positivity via the norm `sum_k m_k x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityVerdict {
    LambdaPositive,
    LambdaNullOrTransient,
    Inconclusive,
}

/// One potential integral `int_0^T e^{lambda t} p_ij(t) dt` with tail
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialIntegral {
    pub i: i64,
    pub j: i64,
    /// Dyadic checkpoints (plus the final stub when `t_max` is not dyadic).
    pub t_checkpoints: Vec<f64>,
    /// Partial integrals at the checkpoints; non-decreasing.
    pub partial: Vec<f64>,
    /// Fitted integrand exponent from the tail increments (integrand ~ c t^s).
    pub tail_exponent: Option<f64>,
    /// Whether the dyadic increment ratios have settled (the integrand is past
    /// its transient regime); verdicts are withheld otherwise.
    pub tail_ratio_stable: bool,
    /// Estimated remainder beyond the last dyadic checkpoint.
    pub tail_estimate: f64,
    /// Partial at the last dyadic checkpoint plus the tail estimate: the
    /// infinite-horizon value when the integral converges.
    pub completed: f64,
    /// Candidate closed forms for the killed M/M/1 queue, when applicable.
    pub resolvent_oracle: Option<f64>,
    pub resolvent_displayed: Option<f64>,
}

/// Convergence status of the positivity norm partial sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityNorm {
    pub partial_sum: f64,
    /// "convergent", "divergent", or "inconclusive".
    pub status: String,
    /// `A = 1 / sum`, when the sum converges.
    pub a: Option<f64>,
}

/// Full classification output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub lambda: f64,
    pub potential_integrals: Vec<PotentialIntegral>,
    pub verdict: RecurrenceVerdict,
    pub positivity_norm: PositivityNorm,
    pub positivity_verdict: PositivityVerdict,
}

/// Integrand exponent below which the integral is declared convergent.
pub const TRANSIENT_EXPONENT_THRESHOLD: f64 = -1.05;
/// Partial-integral value above which divergence is declared.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

fn classify_integral(
    dec: &SpectralDecomposition,
    spec: &ModelSpec,
    lambda: f64,
    from: i64,
    to: i64,
    t_max: f64,
    rel_tol: f64,
) -> Result<PotentialIntegral> {
    // validates the state labels up front; the quadrature closure below can
    // then only fail on negative times, which the segment edges exclude
    dec.entry(from, to, 0.0)?;
    let l1 = dec.lambda_min();
    let mut f = |t: f64| -> f64 {
        if t == 0.0 {
            return if from == to { 1.0 } else { 0.0 };
        }
        let e = dec.entry(from, to, t).expect("in-range entry");
        if e.scaled <= 0.0 {
            0.0
        } else {
            (e.scaled.ln() + (lambda - l1) * t).exp()
        }
    };
    // dyadic segments: [0,1], [1,2], [2,4], ... then a stub up to t_max
    let mut edges = vec![0.0, 1.0f64.min(t_max)];
    while *edges.last().unwrap() * 2.0 <= t_max {
        edges.push(edges.last().unwrap() * 2.0);
    }
    if *edges.last().unwrap() < t_max {
        edges.push(t_max);
    }
    let mut partial = Vec::with_capacity(edges.len() - 1);
    let mut increments = Vec::with_capacity(edges.len() - 1);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let inc = adaptive_simpson(&mut f, w[0], w[1], rel_tol.max(1e-14));
        total += inc;
        increments.push(inc);
        partial.push(total);
    }
    let t_checkpoints: Vec<f64> = edges[1..].to_vec();

    // tail analysis on the dyadic increments beyond t = 1
    let stub = *edges.last().unwrap() != edges[edges.len() - 2] * 2.0 && edges.len() > 2;
    let dyadic_end = if stub { increments.len() - 1 } else { increments.len() };
    let dyadic_incs = &increments[1.min(dyadic_end)..dyadic_end];
    let mut tail_exponent = None;
    let mut tail_estimate = 0.0;
    let mut tail_ratio_stable = false;
    if dyadic_incs.len() >= 3 && dyadic_incs.iter().all(|&d| d > 0.0) {
        let k = dyadic_incs.len();
        let r1 = dyadic_incs[k - 1] / dyadic_incs[k - 2];
        let r2 = dyadic_incs[k - 2] / dyadic_incs[k - 3];
        tail_ratio_stable = (r1 / r2 - 1.0).abs() < 0.5;
        // exponent from a fit over the last few dyadic increments (the
        // increment over [T, 2T] of an integrand c t^s scales like T^{s+1})
        let take = dyadic_incs.len().min(4);
        let xs: Vec<f64> = (0..take)
            .map(|k| {
                let idx = dyadic_incs.len() - take + k;
                // log-midpoint of the dyadic segment [2^idx, 2^{idx+1}]
                (2.0f64.powi(idx as i32) * std::f64::consts::SQRT_2).ln()
            })
            .collect();
        let ys: Vec<f64> = dyadic_incs[dyadic_incs.len() - take..]
            .iter()
            .map(|d| d.ln())
            .collect();
        let fit = fit_line(&xs, &ys);
        tail_exponent = Some(fit.slope - 1.0);
        // tail from the last increment pair alone: for a power-law tail the
        // remainder is a geometric series in the observed ratio, and the last
        // pair carries the least small-time bias
        let k = dyadic_incs.len();
        let r = dyadic_incs[k - 1] / dyadic_incs[k - 2];
        if r < 0.98 {
            tail_estimate = dyadic_incs[k - 1] * r / (1.0 - r);
        }
    }
    let dyadic_partial = partial[dyadic_end - 1];
    let completed = dyadic_partial + tail_estimate;

    let (resolvent_oracle, resolvent_displayed) = match spec {
        ModelSpec::KilledMM1 { p, q } if from >= 1 && to >= 1 => (
            oracles::mm1_resolvent(*p, *q, from as usize, to as usize).ok(),
            oracles::mm1_resolvent_displayed(*p, *q, from as usize).ok(),
        ),
        _ => (None, None),
    };

    Ok(PotentialIntegral {
        i: from,
        j: to,
        t_checkpoints,
        partial,
        tail_exponent,
        tail_ratio_stable,
        tail_estimate,
        completed,
        resolvent_oracle,
        resolvent_displayed,
    })
}

/// Integrates the potential over `[0, t_max]` for the given state pairs,
/// fits the tail, and classifies recurrence and positivity.
pub fn classify(
    spec: &ModelSpec,
    lambda: f64,
    t_max: f64,
    pairs: &[(i64, i64)],
    n_trunc: usize,
) -> Result<Classification> {
    let g = build_generator(spec, n_trunc)?;
    let dec = SpectralDecomposition::decompose(&g)?;
    classify_with(&dec, spec, lambda, t_max, pairs, 1e-8)
}

/// Same as [`classify`] with a precomputed decomposition and explicit
/// quadrature tolerance.
pub fn classify_with(
    dec: &SpectralDecomposition,
    spec: &ModelSpec,
    lambda: f64,
    t_max: f64,
    pairs: &[(i64, i64)],
    rel_tol: f64,
) -> Result<Classification> {
    if t_max < 8.0 {
        return Err(Error::Argument(format!(
            "t_max = {t_max} leaves too few dyadic increments for tail diagnostics"
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Argument("need at least one (i, j) pair".into()));
    }
    let potential_integrals: Vec<PotentialIntegral> = pairs
        .iter()
        .map(|&(i, j)| classify_integral(dec, spec, lambda, i, j, t_max, rel_tol))
        .collect::<Result<_>>()?;

    // transience requires every pair to show a settled, sufficiently negative
    // tail exponent; a still-moving increment ratio means the integrand has
    // not reached its asymptotic regime and the horizon was too short
    let mut verdict = RecurrenceVerdict::Inconclusive;
    let exps: Vec<f64> = potential_integrals
        .iter()
        .filter_map(|p| p.tail_exponent)
        .collect();
    if potential_integrals.iter().all(|p| p.tail_ratio_stable)
        && exps.len() == potential_integrals.len()
        && exps.iter().all(|&s| s < TRANSIENT_EXPONENT_THRESHOLD)
    {
        verdict = RecurrenceVerdict::LambdaTransient;
    }
    if potential_integrals
        .iter()
        .any(|p| *p.partial.last().unwrap() > DIVERGENCE_THRESHOLD)
    {
        verdict = RecurrenceVerdict::LambdaRecurrent;
    }

    // positivity norm: sum_k m_k x_k = sum_k (u_k / u_1)^2 in the m_1 = x_1 = 1
    // normalization; the similarity weights cancel
    let n = dec.dim();
    let b = dec.basis();
    let u0 = b[[0, 0]];
    let terms: Vec<f64> = (0..n).map(|k| (b[[k, 0]] / u0) * (b[[k, 0]] / u0)).collect();
    let half_sum: f64 = terms[..n / 2].iter().sum();
    let near_full: f64 = terms[..interior_limit(n)].iter().sum();
    let full: f64 = terms.iter().sum();
    let growth = if near_full > 0.0 {
        (near_full - half_sum) / near_full
    } else {
        0.0
    };
    let (status, a) = if growth > 0.1 {
        ("divergent".to_string(), None)
    } else if growth < 1e-8 {
        ("convergent".to_string(), Some(1.0 / full))
    } else {
        ("inconclusive".to_string(), None)
    };
    let positivity_verdict = match status.as_str() {
        "divergent" => PositivityVerdict::LambdaNullOrTransient,
        "convergent" if verdict == RecurrenceVerdict::LambdaRecurrent => {
            PositivityVerdict::LambdaPositive
        }
        _ => PositivityVerdict::Inconclusive,
    };

    Ok(Classification {
        lambda,
        potential_integrals,
        verdict,
        positivity_norm: PositivityNorm {
            partial_sum: full,
            status,
            a,
        },
        positivity_verdict,
    })
}
