//! Model specifications for the chains under study.
//!
//! Every model lives on a state space `{0} ∪ {1, 2, ...}` with an absorbing
//! state 0 and tridiagonal jump structure, except [`ModelSpec::RandomWalkZ`]
//! which lives on the integers with no absorbing state and is used for decay
//! studies only.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Jump rates available at a transient state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRates {
    /// Rate of jumping one step up, `None` when the chain has a hard ceiling here.
    pub up: Option<f64>,
    /// Rate of jumping one step down (into the absorbing state from state 1).
    pub down: f64,
}

/// Derived constants of the killed M/M/1 queue: `a = p + q`, `b = sqrt(p/q)`,
/// `theta = 2 sqrt(p q)`. The decay parameter is `a - theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mm1Constants {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Mm1Constants {
    pub fn new(p: f64, q: f64) -> Self {
        Self {
            a: p + q,
            b: (p / q).sqrt(),
            theta: 2.0 * (p * q).sqrt(),
        }
    }

    /// Decay parameter `a - theta = p + q - 2 sqrt(pq)`.
    pub fn lambda(&self) -> f64 {
        self.a - self.theta
    }
}

/// Specification of a chain, prior to truncation.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// M/M/1 queue with arrival rate `p` and service rate `q`, killed on
    /// first hitting queue length 0.
    KilledMM1 { p: f64, q: f64 },
    /// Birth-death chain with explicit rate sequences for states 1, 2, ...;
    /// `death[0]` is the absorption rate from state 1 into state 0.
    /// `birth` may be one shorter than `death`, making the top state a ceiling.
    KilledBirthDeath { birth: Vec<f64>, death: Vec<f64> },
    /// Continuous-time simple random walk on the integers, right rate `p`,
    /// left rate `q`. No absorbing state; decay studies only.
    RandomWalkZ { p: f64, q: f64 },
    /// Critical linear birth-death chain: birth and death rate both `n * rho`
    /// at population size n. Decay parameter 0.
    CriticalLinearBd { rho: f64 },
    /// Arbitrary user-supplied tridiagonal rates, same layout as
    /// [`ModelSpec::KilledBirthDeath`]. Regularity of the untruncated chain is
    /// not checkable from finite arrays; only the truncated object is validated.
    CustomTridiagonal { birth: Vec<f64>, death: Vec<f64> },
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Parameter(format!(
            "{name} must be strictly positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn check_rate_seq(name: &str, vs: &[f64]) -> Result<()> {
    for (k, &v) in vs.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!(
                "{name}[{k}] must be strictly positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

fn check_arrays(birth: &[f64], death: &[f64]) -> Result<()> {
    if death.is_empty() {
        return Err(Error::Parameter("death rate array must be non-empty".into()));
    }
    if birth.len() + 1 != death.len() && birth.len() != death.len() {
        return Err(Error::Parameter(format!(
            "birth array length {} must equal death array length {} or be one shorter",
            birth.len(),
            death.len()
        )));
    }
    check_rate_seq("birth", birth)?;
    check_rate_seq("death", death)
}

impl ModelSpec {
    pub fn killed_mm1(p: f64, q: f64) -> Result<Self> {
        check_rate("p", p)?;
        check_rate("q", q)?;
        Ok(Self::KilledMM1 { p, q })
    }

    pub fn killed_birth_death(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        check_arrays(&birth, &death)?;
        Ok(Self::KilledBirthDeath { birth, death })
    }

    pub fn random_walk_z(p: f64, q: f64) -> Result<Self> {
        check_rate("p", p)?;
        check_rate("q", q)?;
        Ok(Self::RandomWalkZ { p, q })
    }

    pub fn critical_linear_bd(rho: f64) -> Result<Self> {
        check_rate("rho", rho)?;
        Ok(Self::CriticalLinearBd { rho })
    }

    pub fn custom_tridiagonal(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        check_arrays(&birth, &death)?;
        Ok(Self::CustomTridiagonal { birth, death })
    }

    /// Re-checks all parameter invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::KilledMM1 { p, q } | Self::RandomWalkZ { p, q } => {
                check_rate("p", *p)?;
                check_rate("q", *q)
            }
            Self::KilledBirthDeath { birth, death } | Self::CustomTridiagonal { birth, death } => {
                check_arrays(birth, death)
            }
            Self::CriticalLinearBd { rho } => check_rate("rho", *rho),
        }
    }

    /// True when the model has the absorbing state 0.
    pub fn is_absorbing(&self) -> bool {
        !matches!(self, Self::RandomWalkZ { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::KilledMM1 { .. } => "killed_mm1",
            Self::KilledBirthDeath { .. } => "killed_birth_death",
            Self::RandomWalkZ { .. } => "random_walk_z",
            Self::CriticalLinearBd { .. } => "critical_linear_bd",
            Self::CustomTridiagonal { .. } => "custom_tridiagonal",
        }
    }

    /// Derived M/M/1 constants, when this is a killed M/M/1 model.
    pub fn mm1_constants(&self) -> Option<Mm1Constants> {
        match self {
            Self::KilledMM1 { p, q } => Some(Mm1Constants::new(*p, *q)),
            _ => None,
        }
    }

    /// Closed-form decay parameter, for the models that have one.
    pub fn analytic_decay(&self) -> Option<f64> {
        match self {
            Self::KilledMM1 { .. } => Some(self.mm1_constants().unwrap().lambda()),
            Self::CriticalLinearBd { .. } => Some(0.0),
            _ => None,
        }
    }

    /// Largest state whose jump rates are known, `None` when rates exist for
    /// every state.
    pub fn max_known_state(&self) -> Option<usize> {
        match self {
            Self::KilledBirthDeath { death, .. } | Self::CustomTridiagonal { death, .. } => {
                Some(death.len())
            }
            _ => None,
        }
    }

    /// Jump rates at transient state `n >= 1` of an absorbing model.
    ///
    /// Errors for [`ModelSpec::RandomWalkZ`] (no absorbing-state indexing) and
    /// for array-backed models above the last known state.
    pub fn rates_at(&self, n: usize) -> Result<StateRates> {
        if n == 0 {
            return Err(Error::Domain("state 0 is absorbing, not transient".into()));
        }
        match self {
            Self::KilledMM1 { p, q } => Ok(StateRates {
                up: Some(*p),
                down: *q,
            }),
            Self::CriticalLinearBd { rho } => Ok(StateRates {
                up: Some(n as f64 * rho),
                down: n as f64 * rho,
            }),
            Self::KilledBirthDeath { birth, death } | Self::CustomTridiagonal { birth, death } => {
                if n > death.len() {
                    return Err(Error::Domain(format!(
                        "rates unknown above state {} (requested {n})",
                        death.len()
                    )));
                }
                Ok(StateRates {
                    up: birth.get(n - 1).copied(),
                    down: death[n - 1],
                })
            }
            Self::RandomWalkZ { .. } => Err(Error::UnsupportedModel(
                "random walk on Z has no absorbing-state indexing".into(),
            )),
        }
    }

    /// Right/left rates of the random walk, when applicable.
    pub fn walk_rates(&self) -> Option<(f64, f64)> {
        match self {
            Self::RandomWalkZ { p, q } => Some((*p, *q)),
            _ => None,
        }
    }

    /// The same model with every rate multiplied by `c > 0` (a pure change of
    /// time units).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        check_rate("scale", c)?;
        Ok(match self {
            Self::KilledMM1 { p, q } => Self::KilledMM1 { p: c * p, q: c * q },
            Self::RandomWalkZ { p, q } => Self::RandomWalkZ { p: c * p, q: c * q },
            Self::CriticalLinearBd { rho } => Self::CriticalLinearBd { rho: c * rho },
            Self::KilledBirthDeath { birth, death } => Self::KilledBirthDeath {
                birth: birth.iter().map(|r| c * r).collect(),
                death: death.iter().map(|r| c * r).collect(),
            },
            Self::CustomTridiagonal { birth, death } => Self::CustomTridiagonal {
                birth: birth.iter().map(|r| c * r).collect(),
                death: death.iter().map(|r| c * r).collect(),
            },
        })
    }
}

/// Flat JSON form shared by [`ModelSpec`] and [`ModelInput`].
#[derive(Serialize, Deserialize, Default)]
struct ModelJson {
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    birth: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    death: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_trunc: Option<usize>,
}

impl ModelJson {
    fn into_spec<E: serde::de::Error>(self) -> std::result::Result<(ModelSpec, Option<usize>), E> {
        let need = |opt: Option<f64>, field: &str| {
            opt.ok_or_else(|| E::custom(format!("model {:?} requires field {field}", self.model)))
        };
        let need_seq = |opt: &Option<Vec<f64>>, field: &str| {
            opt.clone()
                .ok_or_else(|| E::custom(format!("model {:?} requires field {field}", self.model)))
        };
        let spec = match self.model.as_str() {
            "killed_mm1" => ModelSpec::killed_mm1(need(self.p, "p")?, need(self.q, "q")?),
            "random_walk_z" => ModelSpec::random_walk_z(need(self.p, "p")?, need(self.q, "q")?),
            "critical_linear_bd" => ModelSpec::critical_linear_bd(need(self.rho, "rho")?),
            "killed_birth_death" => ModelSpec::killed_birth_death(
                need_seq(&self.birth, "birth")?,
                need_seq(&self.death, "death")?,
            ),
            "custom_tridiagonal" => ModelSpec::custom_tridiagonal(
                need_seq(&self.birth, "birth")?,
                need_seq(&self.death, "death")?,
            ),
            other => return Err(E::custom(format!("unknown model {other:?}"))),
        };
        spec.map(|s| (s, self.n_trunc)).map_err(|e| E::custom(e.to_string()))
    }
}

impl From<&ModelSpec> for ModelJson {
    fn from(spec: &ModelSpec) -> Self {
        let mut j = ModelJson {
            model: spec.name().to_string(),
            ..ModelJson::default()
        };
        match spec {
            ModelSpec::KilledMM1 { p, q } | ModelSpec::RandomWalkZ { p, q } => {
                j.p = Some(*p);
                j.q = Some(*q);
            }
            ModelSpec::CriticalLinearBd { rho } => j.rho = Some(*rho),
            ModelSpec::KilledBirthDeath { birth, death }
            | ModelSpec::CustomTridiagonal { birth, death } => {
                j.birth = Some(birth.clone());
                j.death = Some(death.clone());
            }
        }
        j
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(d)?;
        j.into_spec().map(|(spec, _)| spec)
    }
}

/// A model together with an optional inline truncation level, as accepted on
/// the command line and in config files.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub spec: ModelSpec,
    pub n_trunc: Option<usize>,
}

impl Serialize for ModelInput {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut j = ModelJson::from(&self.spec);
        j.n_trunc = self.n_trunc;
        j.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(d)?;
        j.into_spec().map(|(spec, n_trunc)| ModelInput { spec, n_trunc })
    }
}

impl std::str::FromStr for ModelInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parameter(format!("bad model JSON: {e}")))
    }
}
