//! Transition kernels on the truncated state space.
//!
//! Two evaluation routes are provided and cross-checked:
//!
//! * **Uniformization**: the Poisson-mixture representation of `exp(tQ)`.
//!   All terms are non-negative, the neglected tail is certified below the
//!   requested tolerance, and accuracy is uniform over entries. Cost grows
//!   linearly with `max_rate * t`, so it is the small/moderate-time route.
//! * **Spectral**: the transient block is symmetrized by the diagonal
//!   similarity `d` with `d_{i+1}/d_i = sqrt(sup_i / sub_i)` and fully
//!   diagonalized. Long-time evaluation factors out the slowest mode, so the
//!   scaled field `h_ij(t) = e^{lambda_1 t} p_ij(t)` never underflows. Signed
//!   spectral sums are accumulated with compensated summation and carry a
//!   cancellation diagnostic: entries dominated by cancellation (deep
//!   off-diagonal entries of strongly drifted chains at short times) are
//!   flagged rather than trusted.
//!
//! The default (`Auto`) method uses uniformization while its term count stays
//! within budget and the spectral route beyond.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{StateSpace, TruncatedGenerator};
use crate::linalg::{self, SymTridiag};
use crate::numeric::{compensated_sum, SignedSum};

/// Poisson term budget above which `Auto` switches to the spectral route.
pub const UNIFORMIZATION_TERM_BUDGET: usize = 20_000;

/// Hard cap on uniformization terms before giving up.
const UNIFORMIZATION_TERM_CAP: usize = 5_000_000;

/// Requested evaluation method for [`transition_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Uniformization,
    Spectral,
    Auto,
}

/// Method actually used, with its cost tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum KernelMethodUsed {
    Uniformization { terms: usize },
    Spectral,
}

/// Eigendecomposition of the symmetrized negated transient block.
///
/// Eigenvalues are ascending and strictly positive; `basis` is orthonormal
/// with the deterministic sign convention of [`linalg::eigh_tridiag`], indexed
/// `[state, mode]`. The similarity weights are kept in log form because they
/// span thousands of orders of magnitude for drifted chains.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    states: StateSpace,
    absorbing: bool,
    eigenvalues: Vec<f64>,
    basis: Array2<f64>,
    log_weights: Vec<f64>,
    log_weight_max: f64,
    /// `W_k = sum_j e^{log d_j - max} u_k(j)`, for survival sums.
    survival_w: Vec<f64>,
    /// `V_k = sum_j e^{log d_j - max} a_j u_k(j)`, for absorption sums.
    absorb_w: Vec<f64>,
    max_rate: f64,
}

/// Symmetrizes the negated transient block; also returns the log similarity
/// weights (log d, with d_1 = 1).
pub(crate) fn symmetrize(g: &TruncatedGenerator) -> Result<(SymTridiag, Vec<f64>)> {
    let n = g.dim();
    for (k, (&up, &down)) in g.sup.iter().zip(&g.sub).enumerate() {
        if !(up > 0.0) || !(down > 0.0) {
            return Err(Error::Structure(format!(
                "zero coupling rate at offset {k}: symmetrization impossible"
            )));
        }
    }
    let diag: Vec<f64> = g.diag.iter().map(|&d| -d).collect();
    let off: Vec<f64> = g
        .sup
        .iter()
        .zip(&g.sub)
        .map(|(&up, &down)| -(up * down).sqrt())
        .collect();
    let mut log_d = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        log_d[k + 1] = log_d[k] + 0.5 * (g.sup[k].ln() - g.sub[k].ln());
    }
    Ok((SymTridiag::new(diag, off)?, log_d))
}

/// A signed spectral evaluation in the scaled (slow-mode-factored) field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledEntry {
    /// `h_ij(t) = e^{lambda_1 t} p_ij(t)`.
    pub scaled: f64,
    /// Raw probability `p_ij(t)`; 0 when it underflows.
    pub prob: f64,
    /// `ln p_ij(t)`, present whenever the spectral sum is positive.
    pub log_prob: Option<f64>,
    /// Absolute-mass over result ratio of the spectral sum; large values mean
    /// the entry is dominated by cancellation noise.
    pub cancellation: f64,
}

/// Conditional law of the chain at time `t` given survival in the transient
/// class, starting from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    pub start: i64,
    pub t: f64,
    /// Probabilities over transient states (internal order), summing to 1.
    pub probs: Vec<f64>,
    /// In-class survival probability `sum_j p_ij(t)`.
    pub survival: f64,
    pub log_survival: f64,
    /// Mass killed at the truncation boundary by time `t` (raw scale).
    pub leak_mass: f64,
    /// Worst cancellation diagnostic across components.
    pub max_cancellation: f64,
}

impl SpectralDecomposition {
    /// Full eigendecomposition of the symmetrized transient block of `g`.
    pub fn decompose(g: &TruncatedGenerator) -> Result<Self> {
        let (neg_block, log_weights) = symmetrize(g)?;
        let (eigenvalues, basis) = linalg::eigh_tridiag(&neg_block)?;
        if eigenvalues[0] <= 0.0 {
            return Err(Error::Numerical(format!(
                "smallest eigenvalue {:.3e} is not positive; the block is not strictly substochastic",
                eigenvalues[0]
            )));
        }
        let n = g.dim();
        let log_weight_max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let wd: Vec<f64> = log_weights.iter().map(|l| (l - log_weight_max).exp()).collect();
        let mut survival_w = vec![0.0; n];
        let mut absorb_w = vec![0.0; n];
        for k in 0..n {
            let mut s = 0.0;
            let mut a = 0.0;
            for i in 0..n {
                let u = basis[[i, k]];
                s += wd[i] * u;
                a += wd[i] * g.absorb[i] * u;
            }
            survival_w[k] = s;
            absorb_w[k] = a;
        }
        Ok(Self {
            states: g.states,
            absorbing: g.is_absorbing(),
            eigenvalues,
            basis,
            log_weights,
            log_weight_max,
            survival_w,
            absorb_w,
            max_rate: g.max_rate(),
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn states(&self) -> StateSpace {
        self.states
    }

    pub fn is_absorbing(&self) -> bool {
        self.absorbing
    }

    /// Smallest eigenvalue of the negated transient block, the finite-level
    /// decay-rate estimate.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    fn idx(&self, label: i64) -> Result<usize> {
        self.states
            .index(label)
            .ok_or_else(|| Error::Domain(format!("state {label} is not in the retained block")))
    }

    /// `sum_k u_k(i) u_k(j) e^{-(lambda_k - lambda_1) t}`, compensated.
    /// Internal indices; the symmetric heat kernel of the symmetrized block
    /// scaled by `e^{lambda_1 t}`.
    pub(crate) fn raw_scaled_sum(&self, i: usize, j: usize, t: f64) -> SignedSum {
        self.scaled_sum(i, j, t)
    }

    fn scaled_sum(&self, i: usize, j: usize, t: f64) -> SignedSum {
        let l1 = self.eigenvalues[0];
        let row_i = self.basis.row(i);
        let row_j = self.basis.row(j);
        compensated_sum(
            self.eigenvalues
                .iter()
                .zip(row_i.iter().zip(row_j.iter()))
                .map(|(&lk, (&ui, &uj))| ui * uj * (-(lk - l1) * t).exp()),
        )
    }

    /// Spectral evaluation of a single transition entry, by state label.
    pub fn entry(&self, from: i64, to: i64, t: f64) -> Result<ScaledEntry> {
        if t < 0.0 {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        let i = self.idx(from)?;
        let j = self.idx(to)?;
        if t == 0.0 {
            let delta = if i == j { 1.0 } else { 0.0 };
            return Ok(ScaledEntry {
                scaled: delta,
                prob: delta,
                log_prob: if i == j { Some(0.0) } else { None },
                cancellation: 1.0,
            });
        }
        let sum = self.scaled_sum(i, j, t);
        let pref = self.log_weights[j] - self.log_weights[i];
        let l1t = self.eigenvalues[0] * t;
        let (scaled, prob, log_prob) = if sum.value > 0.0 {
            let ls = pref + sum.value.ln();
            (ls.exp(), (ls - l1t).exp(), Some(ls - l1t))
        } else if sum.value == 0.0 {
            (0.0, 0.0, None)
        } else {
            let ls = pref + (-sum.value).ln();
            (-ls.exp(), -(ls - l1t).exp(), None)
        };
        Ok(ScaledEntry {
            scaled,
            prob,
            log_prob,
            cancellation: sum.cancellation_ratio(),
        })
    }

    /// In-class survival probability `sum_j p_ij(t)` as `(value, ln value)`.
    ///
    /// The sum is accumulated in the scaled field, so `ln value` stays valid
    /// long after the raw value underflows.
    pub fn survival(&self, from: i64, t: f64) -> Result<(f64, f64)> {
        let (value, log_value, _) = self.survival_with_diag(from, t)?;
        Ok((value, log_value))
    }

    pub(crate) fn survival_with_diag(&self, from: i64, t: f64) -> Result<(f64, f64, f64)> {
        if !self.absorbing {
            return Err(Error::UnsupportedModel(
                "survival requires an absorbing model".into(),
            ));
        }
        if t < 0.0 {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        let i = self.idx(from)?;
        if t == 0.0 {
            return Ok((1.0, 0.0, 1.0));
        }
        let l1 = self.eigenvalues[0];
        let row_i = self.basis.row(i);
        let sum = compensated_sum(
            self.eigenvalues
                .iter()
                .zip(row_i.iter().zip(self.survival_w.iter()))
                .map(|(&lk, (&ui, &wk))| ui * wk * (-(lk - l1) * t).exp()),
        );
        if sum.value <= 0.0 {
            return Err(Error::Numerical(format!(
                "survival sum lost to cancellation at state {from}, t = {t} \
                 (abs mass {:.3e}); use uniformization here",
                sum.abs
            )));
        }
        let log_value = (self.log_weight_max - self.log_weights[i]) + sum.value.ln() - l1 * t;
        Ok((log_value.exp(), log_value, sum.cancellation_ratio()))
    }

    /// Absorption probability `p_{i0}(t)`, clipped to `[0, 1]`.
    pub fn absorption(&self, from: i64, t: f64) -> Result<f64> {
        if !self.absorbing {
            return Ok(0.0);
        }
        if t < 0.0 {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        let i = self.idx(from)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let sum = compensated_sum(
            self.eigenvalues
                .iter()
                .zip(self.basis.row(i).iter().zip(self.absorb_w.iter()))
                .map(|(&lk, (&ui, &vk))| ui * vk * (1.0 - (-lk * t).exp()) / lk),
        );
        let pref = self.log_weight_max - self.log_weights[i];
        let value = if sum.value > 0.0 {
            (pref + sum.value.ln()).exp()
        } else {
            0.0
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Conditional law at time `t` given in-class survival, starting at `from`.
    ///
    /// Components are computed from scaled quantities, so the ratio is stable
    /// at every `t`; they sum to one exactly after excluding the
    /// boundary-leaked mass, which is reported in `leak_mass`.
    pub fn conditional(&self, from: i64, t: f64) -> Result<ConditionalDistribution> {
        if !self.absorbing {
            return Err(Error::UnsupportedModel(
                "conditional law requires an absorbing model".into(),
            ));
        }
        if t < 0.0 {
            return Err(Error::Domain(format!("negative time {t}")));
        }
        let i = self.idx(from)?;
        let n = self.dim();
        if t == 0.0 {
            let mut probs = vec![0.0; n];
            probs[i] = 1.0;
            return Ok(ConditionalDistribution {
                start: from,
                t,
                probs,
                survival: 1.0,
                log_survival: 0.0,
                leak_mass: 0.0,
                max_cancellation: 1.0,
            });
        }
        let (survival, log_survival, surv_cancel) = self.survival_with_diag(from, t)?;
        let mut numer = vec![0.0; n];
        let mut max_cancellation = surv_cancel;
        for (j, slot) in numer.iter_mut().enumerate() {
            let sum = self.scaled_sum(i, j, t);
            let v = (self.log_weights[j] - self.log_weight_max).exp() * sum.value;
            if v > 0.0 {
                *slot = v;
                max_cancellation = max_cancellation.max(sum.cancellation_ratio());
            }
        }
        let total: f64 = numer.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numerical(
                "conditional law lost to cancellation; use uniformization here".into(),
            ));
        }
        let probs: Vec<f64> = numer.iter().map(|v| v / total).collect();
        let absorbed = self.absorption(from, t)?;
        let leak_mass = (1.0 - absorbed - survival).max(0.0);
        Ok(ConditionalDistribution {
            start: from,
            t,
            probs,
            survival,
            log_survival,
            leak_mass,
            max_cancellation,
        })
    }
}

/// A transition kernel at one time point: raw probabilities, the absorption
/// column, and the scaled field `h_ij(t) = e^{lambda_1 t} p_ij(t)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub t: f64,
    pub method: KernelMethodUsed,
    pub states: StateSpace,
    pub trans: Array2<f64>,
    pub absorb_col: Vec<f64>,
    pub scaled: Array2<f64>,
    pub lambda1: f64,
    /// Per-row mass killed at the truncation boundary by time `t`.
    pub row_deficit: Vec<f64>,
    /// Entries replaced by their nearest admissible value because the spectral
    /// sum was pure cancellation noise (negative or above one).
    pub suspect_entries: usize,
    /// Max deviation of a spot-check against the other method, when performed.
    pub cross_check: Option<f64>,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.absorb_col.len()
    }

    /// Transition probability by state labels.
    pub fn p(&self, from: i64, to: i64) -> Option<f64> {
        let i = self.states.index(from)?;
        let j = self.states.index(to)?;
        Some(self.trans[[i, j]])
    }

    pub fn p_absorb(&self, from: i64) -> Option<f64> {
        Some(self.absorb_col[self.states.index(from)?])
    }
}

/// Estimated Poisson term count for uniformization at `max_rate * t`.
pub fn uniformization_terms_estimate(g: &TruncatedGenerator, t: f64) -> usize {
    let lt = uniformization_rate(g) * t;
    (lt + 8.5 * (lt + 1.0).sqrt() + 10.0) as usize
}

/// Evolves one uniformized row; returns (row of p_ij, p_i0, terms used).
///
/// Stops once the neglected Poisson tail is certifiably below `tol`, either by
/// the accumulated weight reaching `1 - tol` or, for tolerances below the
/// resolution of `1 - cum`, by the geometric tail bound
/// `w_k * r / (1 - r)` with `r = lt / (k + 1) < 1`.
pub(crate) fn uniformized_row(
    g: &TruncatedGenerator,
    lam: f64,
    start: usize,
    t: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = g.dim();
    let lt = lam * t;
    let mut v = vec![0.0; n];
    v[start] = 1.0;
    let mut absorbed = 0.0f64;
    let mut out = vec![0.0; n];
    let mut out0 = 0.0f64;
    let mut logw = -lt;
    let mut cum = 0.0f64;
    let mut next = vec![0.0; n];
    let mut k = 0usize;
    loop {
        let w = logw.exp();
        if w > 0.0 {
            for (o, &x) in out.iter_mut().zip(&v) {
                *o += w * x;
            }
            out0 += w * absorbed;
            cum += w;
        }
        if cum >= 1.0 - tol {
            return Ok((out, out0, k + 1));
        }
        let ratio = lt / (k as f64 + 1.0);
        if ratio < 1.0 && w * ratio / (1.0 - ratio) <= tol {
            return Ok((out, out0, k + 1));
        }
        if k >= UNIFORMIZATION_TERM_CAP {
            return Err(Error::Numerical(format!(
                "uniformization needs more than {UNIFORMIZATION_TERM_CAP} terms at t = {t}; \
                 use the spectral method"
            )));
        }
        // one step of the uniformized jump chain
        for j in 0..n {
            let mut x = v[j] * (1.0 + g.diag[j] / lam);
            if j > 0 {
                x += v[j - 1] * g.sup[j - 1] / lam;
            }
            if j + 1 < n {
                x += v[j + 1] * g.sub[j] / lam;
            }
            next[j] = x;
        }
        absorbed += v.iter().zip(&g.absorb).map(|(&x, &a)| x * a).sum::<f64>() / lam;
        std::mem::swap(&mut v, &mut next);
        k += 1;
        logw += lt.ln() - (k as f64).ln();
    }
}

/// Max total jump rate, the uniformization constant.
pub(crate) fn uniformization_rate(g: &TruncatedGenerator) -> f64 {
    g.diag.iter().fold(0.0f64, |a, &d| a.max(-d))
}

fn kernel_by_uniformization(g: &TruncatedGenerator, t: f64, tol: f64) -> Result<Kernel> {
    let n = g.dim();
    let lam = uniformization_rate(g);
    let rows: Vec<(Vec<f64>, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| uniformized_row(g, lam, i, t, tol))
        .collect::<Result<_>>()?;
    let (neg_block, _) = symmetrize(g)?;
    let lambda1 = linalg::smallest_eigenvalue(&neg_block);
    let mut trans = Array2::zeros((n, n));
    let mut absorb_col = vec![0.0; n];
    let mut terms = 0usize;
    for (i, (row, a0, k)) in rows.into_iter().enumerate() {
        for (j, p) in row.into_iter().enumerate() {
            trans[[i, j]] = p;
        }
        absorb_col[i] = a0;
        terms = terms.max(k);
    }
    let scaled = scaled_from_trans(&trans, lambda1, t);
    let row_deficit = deficits(&trans, &absorb_col);
    Ok(Kernel {
        t,
        method: KernelMethodUsed::Uniformization { terms },
        states: g.states,
        trans,
        absorb_col,
        scaled,
        lambda1,
        row_deficit,
        suspect_entries: 0,
        cross_check: None,
    })
}

fn scaled_from_trans(trans: &Array2<f64>, lambda1: f64, t: f64) -> Array2<f64> {
    trans.mapv(|p| if p > 0.0 { (p.ln() + lambda1 * t).exp() } else { 0.0 })
}

fn deficits(trans: &Array2<f64>, absorb_col: &[f64]) -> Vec<f64> {
    trans
        .rows()
        .into_iter()
        .zip(absorb_col)
        .map(|(row, &a)| 1.0 - a - row.sum())
        .collect()
}

/// Full kernel from a precomputed decomposition.
pub fn kernel_from_decomposition(dec: &SpectralDecomposition, t: f64) -> Result<Kernel> {
    if t < 0.0 {
        return Err(Error::Domain(format!("negative time {t}")));
    }
    let n = dec.dim();
    let l1 = dec.lambda_min();
    if t == 0.0 {
        return Ok(Kernel {
            t,
            method: KernelMethodUsed::Spectral,
            states: dec.states,
            trans: Array2::eye(n),
            absorb_col: vec![0.0; n],
            scaled: Array2::eye(n),
            lambda1: l1,
            row_deficit: vec![0.0; n],
            suspect_entries: 0,
            cross_check: None,
        });
    }
    // G = C C^T with C = basis * diag(e^{-(lambda_k - lambda_1) t / 2});
    // then h_ij = e^{log d_j - log d_i} G_ij.
    let mut c = dec.basis.clone();
    for k in 0..n {
        let f = (-(dec.eigenvalues[k] - l1) * t * 0.5).exp();
        c.column_mut(k).mapv_inplace(|v| v * f);
    }
    let gmat = c.dot(&c.t());
    let mut trans = Array2::zeros((n, n));
    let mut scaled = Array2::zeros((n, n));
    let mut suspect = 0usize;
    for i in 0..n {
        for j in 0..n {
            let gv: f64 = gmat[[i, j]];
            let pref = dec.log_weights[j] - dec.log_weights[i];
            let (mut h, mut p) = if gv > 0.0 {
                let ls = pref + gv.ln();
                (ls.exp(), (ls - l1 * t).exp())
            } else {
                (0.0, 0.0)
            };
            if gv < 0.0 {
                suspect += 1;
            } else if p > 1.0 + 1e-9 {
                // true probabilities cannot exceed one; this entry is noise
                h = 0.0;
                p = 0.0;
                suspect += 1;
            }
            trans[[i, j]] = p;
            scaled[[i, j]] = h;
        }
    }
    let absorb_col: Vec<f64> = (0..n)
        .map(|i| dec.absorption(dec.states.label(i), t))
        .collect::<Result<_>>()?;
    let row_deficit = deficits(&trans, &absorb_col);
    Ok(Kernel {
        t,
        method: KernelMethodUsed::Spectral,
        states: dec.states,
        trans,
        absorb_col,
        scaled,
        lambda1: l1,
        row_deficit,
        suspect_entries: suspect,
        cross_check: None,
    })
}

/// Transition kernel `P(t)` of the truncated chain.
///
/// `tol` is the certified absolute entry tolerance of the uniformization
/// route; the spectral route is accurate to eigensolver precision wherever its
/// cancellation diagnostics are clean.
pub fn transition_matrix(
    g: &TruncatedGenerator,
    t: f64,
    method: KernelMethod,
    tol: f64,
) -> Result<Kernel> {
    if t < 0.0 {
        return Err(Error::Domain(format!("negative time {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    match method {
        KernelMethod::Uniformization => kernel_by_uniformization(g, t, tol),
        KernelMethod::Spectral => {
            let dec = SpectralDecomposition::decompose(g)?;
            kernel_from_decomposition(&dec, t)
        }
        KernelMethod::Auto => {
            if uniformization_terms_estimate(g, t) <= UNIFORMIZATION_TERM_BUDGET {
                let mut kernel = kernel_by_uniformization(g, t, tol)?;
                // cross-check band: spot-check against the spectral route when
                // a decomposition is cheap
                if g.dim() <= 400 {
                    let dec = SpectralDecomposition::decompose(g)?;
                    let mut dev = 0.0f64;
                    let n = g.dim();
                    for s in 0..5.min(n) {
                        let i = (s * n.max(1)) / 5;
                        let e = dec.entry(g.states.label(i), g.states.label(i), t)?;
                        dev = dev.max((e.prob - kernel.trans[[i, i]]).abs());
                    }
                    kernel.cross_check = Some(dev);
                }
                Ok(kernel)
            } else {
                let dec = SpectralDecomposition::decompose(g)?;
                kernel_from_decomposition(&dec, t)
            }
        }
    }
}

/// `1 - p_{i0}(t)` as `(value, ln value)`; stable at large `t`.
pub fn survival_probability(g: &TruncatedGenerator, from: i64, t: f64) -> Result<(f64, f64)> {
    if !g.is_absorbing() {
        return Err(Error::UnsupportedModel(
            "survival requires an absorbing model".into(),
        ));
    }
    SpectralDecomposition::decompose(g)?.survival(from, t)
}

/// Conditional law at time `t` given survival, starting at `from`.
pub fn conditional_distribution(
    g: &TruncatedGenerator,
    from: i64,
    t: f64,
) -> Result<ConditionalDistribution> {
    SpectralDecomposition::decompose(g)?.conditional(from, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_generator;
    use crate::model::ModelSpec;
    use approx::assert_abs_diff_eq;

    fn mm1(n: usize) -> TruncatedGenerator {
        build_generator(&ModelSpec::killed_mm1(1.0, 4.0).unwrap(), n).unwrap()
    }

    /// Characteristic-polynomial root bracketing for the n=3 block, used as an
    /// oracle independent of LAPACK.
    fn charpoly_roots_3(t: &SymTridiag) -> Vec<f64> {
        let eval = |x: f64| {
            // det(T - xI) by the three-term recurrence
            let mut pm1 = 1.0;
            let mut p = t.diag[0] - x;
            for i in 1..t.dim() {
                let pn = (t.diag[i] - x) * p - t.off[i - 1] * t.off[i - 1] * pm1;
                pm1 = p;
                p = pn;
            }
            p
        };
        let mut roots = Vec::new();
        let (lo, hi) = t.gershgorin();
        let steps = 4000;
        let mut prev = eval(lo);
        for s in 1..=steps {
            let x = lo + (hi - lo) * s as f64 / steps as f64;
            let v = eval(x);
            if prev.signum() != v.signum() {
                let (mut a, mut b) = (x - (hi - lo) / steps as f64, x);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if eval(a).signum() == eval(m).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev = v;
        }
        roots
    }

    #[test]
    fn mm1_eigenvalues_are_toeplitz_closed_form() {
        let g = mm1(3);
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let s2 = 2.0f64.sqrt();
        let expect = [5.0 - 2.0 * s2, 5.0, 5.0 + 2.0 * s2];
        for (got, want) in dec.eigenvalues().iter().zip(expect) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        // independent oracle: characteristic polynomial roots
        let (block, _) = symmetrize(&g).unwrap();
        let roots = charpoly_roots_3(&block);
        assert_eq!(roots.len(), 3);
        for (got, want) in dec.eigenvalues().iter().zip(roots) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_transient_state() {
        let spec = ModelSpec::custom_tridiagonal(vec![], vec![3.0]).unwrap();
        let g = build_generator(&spec, 5).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        assert_eq!(dec.eigenvalues(), &[3.0]);
        assert_eq!(dec.basis()[[0, 0]], 1.0);
        let (s, ls) = dec.survival(1, 2.0).unwrap();
        assert_abs_diff_eq!(s, (-6.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(ls, -6.0, epsilon = 1e-12);
    }

    #[test]
    fn critical_bd_2x2_quadratic_oracle() {
        let spec = ModelSpec::critical_linear_bd(1.0).unwrap();
        let g = build_generator(&spec, 2).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        // negated symmetrized block [[2, -sqrt(2)], [-sqrt(2), 4]]:
        // eigenvalues 3 -+ sqrt(3) by the quadratic formula
        let s3 = 3.0f64.sqrt();
        assert_abs_diff_eq!(dec.eigenvalues()[0], 3.0 - s3, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvalues()[1], 3.0 + s3, epsilon = 1e-14);
    }

    #[test]
    fn decompose_is_orthonormal_and_reconstructs() {
        let g = build_generator(&ModelSpec::critical_linear_bd(1.3).unwrap(), 60).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let n = dec.dim();
        let b = dec.basis();
        let mut ortho: f64 = 0.0;
        for a in 0..n {
            for c in a..n {
                let dot: f64 = (0..n).map(|i| b[[i, a]] * b[[i, c]]).sum();
                ortho = ortho.max((dot - if a == c { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(ortho < 1e-12, "orthonormality defect {ortho:.2e}");
        let (block, _) = symmetrize(&g).unwrap();
        let mut recon: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += b[[i, k]] * dec.eigenvalues()[k] * b[[j, k]];
                }
                let want = if i == j {
                    block.diag[i]
                } else if i + 1 == j || j + 1 == i {
                    block.off[i.min(j)]
                } else {
                    0.0
                };
                recon = recon.max((v - want).abs());
            }
        }
        assert!(recon < 1e-10 * g.max_rate(), "reconstruction defect {recon:.2e}");
    }

    #[test]
    fn t_zero_is_identity() {
        let g = mm1(20);
        for method in [KernelMethod::Uniformization, KernelMethod::Spectral] {
            let k = transition_matrix(&g, 0.0, method, 1e-10).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    assert_eq!(k.trans[[i, j]], if i == j { 1.0 } else { 0.0 });
                }
                assert_eq!(k.absorb_col[i], 0.0);
            }
        }
    }

    /// Entrywise agreement bound: the uniformization tolerance plus the
    /// spectral noise floor amplified by the similarity ratio `d_j / d_i`
    /// (spectral entries lose exactly that many digits; see the module docs).
    fn assert_methods_agree(g: &TruncatedGenerator, t: f64, tol: f64) {
        let ku = transition_matrix(g, t, KernelMethod::Uniformization, tol).unwrap();
        let ks = transition_matrix(g, t, KernelMethod::Spectral, tol).unwrap();
        let dec = SpectralDecomposition::decompose(g).unwrap();
        let lw = dec.log_weights();
        let n = g.dim();
        for i in 0..n {
            for j in 0..n {
                let amp = (lw[j] - lw[i]).max(0.0).exp();
                let allowed = 10.0 * (tol + 1e-13 * amp);
                let dev = (ku.trans[[i, j]] - ks.trans[[i, j]]).abs();
                assert!(
                    dev <= allowed,
                    "entry ({i}, {j}) at t = {t}: deviation {dev:.2e} > {allowed:.2e}"
                );
            }
            let dev0 = (ku.absorb_col[i] - ks.absorb_col[i]).abs();
            let amp0 = (lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lw[i])
                .max(0.0)
                .exp();
            assert!(dev0 <= 10.0 * (tol + 1e-13 * amp0), "absorption row {i}: {dev0:.2e}");
        }
    }

    #[test]
    fn methods_agree_on_drifted_model() {
        assert_methods_agree(&mm1(100), 1.0, 1e-12);
    }

    #[test]
    fn methods_agree_on_undrifted_model() {
        let g = build_generator(&ModelSpec::critical_linear_bd(1.0).unwrap(), 60).unwrap();
        assert_methods_agree(&g, 0.5, 1e-12);
    }

    #[test]
    fn row_mass_stays_below_one() {
        let g = mm1(50);
        let k = transition_matrix(&g, 2.0, KernelMethod::Uniformization, 1e-12).unwrap();
        for i in 0..50 {
            let mass: f64 = k.absorb_col[i] + k.trans.row(i).sum();
            assert!(mass <= 1.0 + 1e-12);
            assert!(k.row_deficit[i] >= -1e-12);
            // killed mass is bounded by the leak rate times elapsed time
            assert!(k.row_deficit[i] <= g.boundary_leak * k.t + 1e-12);
        }
        // interior rows lose essentially nothing to the boundary at t = 2
        assert!(k.row_deficit[0] < 1e-12);
    }

    #[test]
    fn diagonal_entries_are_cancellation_free() {
        // c_k(i, i) = u_k(i)^2 >= 0: the diagonal spectral sums are sums of
        // positive terms, so their cancellation ratio is exactly one
        let g = mm1(80);
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        for i in [1i64, 7, 40, 79] {
            for &t in &[0.1, 1.0, 10.0, 200.0] {
                let e = dec.entry(i, i, t).unwrap();
                assert!(e.cancellation <= 1.0 + 1e-12, "ratio {}", e.cancellation);
                assert!(e.scaled > 0.0);
            }
        }
    }

    #[test]
    fn scaled_field_survives_underflow() {
        let g = mm1(300);
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let e = dec.entry(1, 1, 1000.0).unwrap();
        assert!(e.prob == 0.0, "raw probability should underflow, got {}", e.prob);
        assert!(e.scaled > 0.0 && e.scaled.is_finite());
        let lp = e.log_prob.unwrap();
        assert_abs_diff_eq!(lp, e.scaled.ln() - dec.lambda_min() * 1000.0, epsilon = 1e-9);
    }

    #[test]
    fn survival_is_monotone_in_time() {
        let g = mm1(200);
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let mut prev = 1.0 + 1e-15;
        for k in 0..30 {
            let t = 0.25 * k as f64;
            let (s, _) = dec.survival(1, t).unwrap();
            assert!(s <= prev + 1e-12, "survival increased at t = {t}");
            prev = s;
        }
    }

    #[test]
    fn critical_bd_survival_matches_closed_form() {
        // 1 - p_{10}(t) = 1/(1+t) for the critical chain started at 1
        let g = build_generator(&ModelSpec::critical_linear_bd(1.0).unwrap(), 200).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let (s, _) = dec.survival(1, 1.0).unwrap();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn conditional_at_t_zero_is_point_mass() {
        let g = mm1(10);
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let c = dec.conditional(3, 0.0).unwrap();
        assert_eq!(c.probs[2], 1.0);
        assert_eq!(c.probs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn critical_bd_conditional_mass_at_one() {
        // p_{11}(t) / (1 - p_{10}(t)) = 1/(1+t): 1/3 at t = 2
        let g = build_generator(&ModelSpec::critical_linear_bd(1.0).unwrap(), 400).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let c = dec.conditional(1, 2.0).unwrap();
        assert_abs_diff_eq!(c.probs[0], 1.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(c.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_walk_rejects_absorbing_queries() {
        let g = build_generator(&ModelSpec::random_walk_z(1.0, 1.0).unwrap(), 20).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        assert!(matches!(
            dec.survival(0, 1.0),
            Err(Error::UnsupportedModel(_))
        ));
        assert!(matches!(
            dec.conditional(0, 1.0),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn random_walk_return_probability_matches_bessel() {
        // p_00(t) = e^{-2t} I_0(2t) for unit rates; truncation negligible
        let g = build_generator(&ModelSpec::random_walk_z(1.0, 1.0).unwrap(), 60).unwrap();
        let dec = SpectralDecomposition::decompose(&g).unwrap();
        let t = 3.0;
        let e = dec.entry(0, 0, t).unwrap();
        let oracle = crate::oracles::rw_return_probability(1.0, 1.0, t).unwrap();
        assert_abs_diff_eq!(e.prob, oracle, epsilon = 1e-10);
    }

    #[test]
    fn negative_time_is_rejected() {
        let g = mm1(10);
        assert!(matches!(
            transition_matrix(&g, -1.0, KernelMethod::Auto, 1e-8),
            Err(Error::Domain(_))
        ));
    }
}
