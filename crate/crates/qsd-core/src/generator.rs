//! Truncated generators (q-matrices) with killing at the truncation boundary.
//!
//! Absorbing models keep transient states `1..=n`; jumps above the boundary
//! are dropped from the transient block and accounted as `boundary_leak`, so
//! the retained block is the generator of the chain killed at the boundary.
//! The random walk keeps `-N..=N` and is killed at both ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// How internal indices `0..n` map onto state labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSpace {
    /// Labels `1..=n`, with the absorbing state 0 outside the block.
    Absorbing { n: usize },
    /// Labels `-half..=half` for the random walk on the integers.
    TwoSided { half: usize },
}

impl StateSpace {
    pub fn len(&self) -> usize {
        match self {
            Self::Absorbing { n } => *n,
            Self::TwoSided { half } => 2 * half + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, idx: usize) -> i64 {
        match self {
            Self::Absorbing { .. } => idx as i64 + 1,
            Self::TwoSided { half } => idx as i64 - *half as i64,
        }
    }

    pub fn index(&self, label: i64) -> Option<usize> {
        match self {
            Self::Absorbing { n } => {
                if label >= 1 && label <= *n as i64 {
                    Some(label as usize - 1)
                } else {
                    None
                }
            }
            Self::TwoSided { half } => {
                let h = *half as i64;
                if label >= -h && label <= h {
                    Some((label + h) as usize)
                } else {
                    None
                }
            }
        }
    }
}

/// The transient block of a truncated q-matrix, stored as three diagonals,
/// plus the absorption rates into state 0.
///
/// Row `k` (internal indexing) reads
/// `sub[k-1], diag[k], sup[k]` with absorption rate `absorb[k]`; any remaining
/// outflow was killed at the truncation boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGenerator {
    pub model: ModelSpec,
    pub states: StateSpace,
    /// Rates one step down: `sub[k]` is the rate from internal state `k+1` to `k`.
    pub sub: Vec<f64>,
    /// Diagonal entries, all finite and non-positive.
    pub diag: Vec<f64>,
    /// Rates one step up: `sup[k]` is the rate from internal state `k` to `k+1`.
    pub sup: Vec<f64>,
    /// Rates into the absorbing state 0 (all zero for the random walk).
    pub absorb: Vec<f64>,
    /// Total rate dropped at the truncation boundary.
    pub boundary_leak: f64,
}

/// Outcome of [`validate_generator`]; problems are reported, never thrown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDiagnostics {
    /// Every row balances: off-diagonal outflow plus diagonal sums to zero,
    /// up to the recorded boundary leak.
    pub conservative: bool,
    /// All diagonal entries are finite and non-positive.
    pub stable: bool,
    /// All retained sub/super rates are strictly positive.
    pub irreducible_c: bool,
    /// Total rate lost at the truncation boundary, recomputed from the rows.
    pub boundary_leak: f64,
    pub messages: Vec<String>,
}

impl GeneratorDiagnostics {
    pub fn all_ok(&self) -> bool {
        self.conservative && self.stable && self.irreducible_c
    }
}

/// Number of transient states actually retained when truncating `spec` at `n`.
fn effective_states(spec: &ModelSpec, n: usize) -> usize {
    match spec.max_known_state() {
        Some(k) => n.min(k),
        None => n,
    }
}

/// Builds the generator of `spec` truncated to (at most) `n` transient states.
///
/// Truncation policy is killing: transitions above the retained block are
/// dropped and accumulated in `boundary_leak`. For finite chains whose rate
/// arrays end below `n`, the whole chain is retained and nothing leaks unless
/// the top state itself has a birth rate.
pub fn build_generator(spec: &ModelSpec, n: usize) -> Result<TruncatedGenerator> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::Size(format!("need n >= 2, got {n}")));
    }

    if let Some((p, q)) = spec.walk_rates() {
        let half = n;
        let m = 2 * half + 1;
        let sub = vec![q; m - 1];
        let sup = vec![p; m - 1];
        let diag = vec![-(p + q); m];
        let absorb = vec![0.0; m];
        return Ok(TruncatedGenerator {
            model: spec.clone(),
            states: StateSpace::TwoSided { half },
            sub,
            diag,
            sup,
            absorb,
            boundary_leak: p + q,
        });
    }

    let m = effective_states(spec, n);
    let mut sub = Vec::with_capacity(m.saturating_sub(1));
    let mut sup = Vec::with_capacity(m.saturating_sub(1));
    let mut diag = Vec::with_capacity(m);
    let mut absorb = vec![0.0; m];
    let mut boundary_leak = 0.0;

    for state in 1..=m {
        let r = spec.rates_at(state)?;
        let up = r.up.unwrap_or(0.0);
        diag.push(-(up + r.down));
        if state == 1 {
            absorb[0] = r.down;
        } else {
            sub.push(r.down);
        }
        if state < m {
            match r.up {
                Some(u) => sup.push(u),
                None => {
                    return Err(Error::Structure(format!(
                        "chain has a ceiling at state {state} below the retained block"
                    )))
                }
            }
        } else if let Some(u) = r.up {
            boundary_leak += u;
        }
    }

    Ok(TruncatedGenerator {
        model: spec.clone(),
        states: StateSpace::Absorbing { n: m },
        sub,
        diag,
        sup,
        absorb,
        boundary_leak,
    })
}

impl TruncatedGenerator {
    /// Number of retained transient states.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Largest absolute rate appearing in the block, used to scale residual
    /// tolerances.
    pub fn max_rate(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.sub.iter())
            .chain(self.sup.iter())
            .chain(self.absorb.iter())
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }

    pub fn is_absorbing(&self) -> bool {
        matches!(self.states, StateSpace::Absorbing { .. })
    }

    /// Row sum of the transient block plus absorption, for internal row `k`.
    /// Zero for interior rows of a conservative chain; `-leak` at boundaries.
    pub fn row_balance(&self, k: usize) -> f64 {
        let mut s = self.diag[k] + self.absorb[k];
        if k > 0 {
            s += self.sub[k - 1];
        }
        if k + 1 < self.dim() {
            s += self.sup[k];
        }
        s
    }
}

/// Checks every structural invariant of `g` and reports the findings.
pub fn validate_generator(g: &TruncatedGenerator) -> GeneratorDiagnostics {
    let n = g.dim();
    let tol = 1e-12 * g.max_rate().max(1.0);
    let mut messages = Vec::new();
    let mut conservative = true;
    let mut stable = true;
    let mut irreducible_c = true;

    if g.sub.len() + 1 != n || g.sup.len() + 1 != n || g.absorb.len() != n {
        messages.push(format!(
            "inconsistent array lengths: diag {n}, sub {}, sup {}, absorb {}",
            g.sub.len(),
            g.sup.len(),
            g.absorb.len()
        ));
        return GeneratorDiagnostics {
            conservative: false,
            stable: false,
            irreducible_c: false,
            boundary_leak: f64::NAN,
            messages,
        };
    }

    for (k, &d) in g.diag.iter().enumerate() {
        if !d.is_finite() || d > 0.0 {
            stable = false;
            messages.push(format!("diag[{k}] = {d} is not finite and non-positive"));
        }
    }
    for (name, arr) in [("sub", &g.sub), ("sup", &g.sup), ("absorb", &g.absorb)] {
        for (k, &v) in arr.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                conservative = false;
                messages.push(format!("off-diagonal {name}[{k}] = {v} is negative"));
            }
        }
    }
    for (name, arr) in [("sub", &g.sub), ("sup", &g.sup)] {
        for (k, &v) in arr.iter().enumerate() {
            if !(v > 0.0) {
                irreducible_c = false;
                messages.push(format!("{name}[{k}] = {v} disconnects the transient class"));
            }
        }
    }

    let mut leak = 0.0;
    for k in 0..n {
        let balance = g.row_balance(k);
        if balance > tol {
            conservative = false;
            messages.push(format!(
                "row {k} has positive net rate {balance:.3e} (creates probability)"
            ));
        } else {
            leak += -balance.min(0.0);
        }
    }
    if (leak - g.boundary_leak).abs() > tol.max(1e-9 * leak.abs()) {
        conservative = false;
        messages.push(format!(
            "recorded boundary_leak {} disagrees with row deficit total {leak:.6e}",
            g.boundary_leak
        ));
    }

    GeneratorDiagnostics {
        conservative,
        stable,
        irreducible_c,
        boundary_leak: leak,
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm1() -> ModelSpec {
        ModelSpec::killed_mm1(1.0, 4.0).unwrap()
    }

    #[test]
    fn mm1_rows_at_n5() {
        let g = build_generator(&mm1(), 5).unwrap();
        assert_eq!(g.dim(), 5);
        // state 1: rate 4 to state 0, rate 1 to state 2, diagonal -5
        assert_eq!(g.absorb[0], 4.0);
        assert_eq!(g.sup[0], 1.0);
        assert_eq!(g.diag[0], -5.0);
        // state 5: rate 4 to state 4, diagonal -5, leak 1
        assert_eq!(g.sub[3], 4.0);
        assert_eq!(g.diag[4], -5.0);
        assert_eq!(g.boundary_leak, 1.0);
        assert_eq!(g.row_balance(4), -1.0);
    }

    #[test]
    fn critical_bd_rows_are_linear() {
        let spec = ModelSpec::critical_linear_bd(1.0).unwrap();
        let g = build_generator(&spec, 3).unwrap();
        // state 2: rate 2 down, rate 2 up, diagonal -4
        assert_eq!(g.sub[0], 2.0);
        assert_eq!(g.sup[1], 2.0);
        assert_eq!(g.diag[1], -4.0);
    }

    #[test]
    fn truncation_is_nested() {
        let g5 = build_generator(&mm1(), 5).unwrap();
        let g9 = build_generator(&mm1(), 9).unwrap();
        assert_eq!(g5.diag[..4], g9.diag[..4]);
        assert_eq!(g5.sup[..4], g9.sup[..4]);
        assert_eq!(g5.sub[..4], g9.sub[..4]);
        assert_eq!(g5.absorb[..4], g9.absorb[..4]);
    }

    #[test]
    fn build_is_deterministic() {
        let spec = ModelSpec::critical_linear_bd(0.7).unwrap();
        assert_eq!(build_generator(&spec, 40).unwrap(), build_generator(&spec, 40).unwrap());
    }

    #[test]
    fn size_and_parameter_errors() {
        assert!(matches!(build_generator(&mm1(), 1), Err(Error::Size(_))));
        let bad = ModelSpec::KilledMM1 { p: -1.0, q: 4.0 };
        assert!(matches!(build_generator(&bad, 10), Err(Error::Parameter(_))));
    }

    #[test]
    fn validate_accepts_built_generators() {
        let g = build_generator(&mm1(), 100).unwrap();
        let d = validate_generator(&g);
        assert!(d.all_ok(), "{:?}", d.messages);
        assert_eq!(d.boundary_leak, 1.0);
    }

    #[test]
    fn validate_flags_negative_offdiagonal() {
        let mut g = build_generator(&mm1(), 5).unwrap();
        g.sub[2] = -4.0;
        let d = validate_generator(&g);
        assert!(!d.conservative);
        assert!(d.messages.iter().any(|m| m.contains("sub[2]")));
    }

    #[test]
    fn random_walk_leaks_at_both_ends() {
        let spec = ModelSpec::random_walk_z(1.0, 1.0).unwrap();
        let g = build_generator(&spec, 50).unwrap();
        assert_eq!(g.dim(), 101);
        assert_eq!(g.states.label(0), -50);
        assert_eq!(g.states.label(100), 50);
        let d = validate_generator(&g);
        assert!(d.all_ok(), "{:?}", d.messages);
        assert_eq!(d.boundary_leak, 2.0);
    }

    #[test]
    fn finite_chain_is_retained_whole() {
        // single transient state with kill rate a = 3
        let spec = ModelSpec::custom_tridiagonal(vec![], vec![3.0]).unwrap();
        let g = build_generator(&spec, 10).unwrap();
        assert_eq!(g.dim(), 1);
        assert_eq!(g.diag[0], -3.0);
        assert_eq!(g.absorb[0], 3.0);
        assert_eq!(g.boundary_leak, 0.0);
    }
}
