//! Channel models in which a test outcome depends only on the number of
//! defectives `k` in the pool.
//!
//! | model        | `f(0)` | `f(k >= 1)`          |
//! |--------------|--------|----------------------|
//! | `noise-free` | 0      | 1                    |
//! | `addition`   | q      | 1                    |
//! | `dilution`   | 0      | 1 - u^k              |
//! | `add-dilute` | q      | 1 - u^k (1 - q)      |
//!
//! where `f(k) = P(Y = 1 | k)`. The combined model applies dilution first and
//! then independent false-positive noise, so a diluted pool reads positive
//! with probability `q`.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

/// Anything that maps a defective count to `P(positive)`.
///
/// The information and likelihood code is written against this trait so that
/// a perturbed law can be substituted in negative-control runs.
pub trait ChannelLaw {
    fn positive_prob(&self, k: usize) -> f64;

    /// `P(Y = 0 | k)`. Override when `1 - f(k)` would lose precision.
    fn negative_prob(&self, k: usize) -> f64 {
        1.0 - self.positive_prob(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    NoiseFree,
    Addition,
    Dilution,
    AddDilute,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{name} must lie in [0, 1), got {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("unknown noise model `{0}`")]
    UnknownKind(String),
    #[error("malformed parameter `{0}` (expected key=value)")]
    Malformed(String),
    #[error("parameter `{key}` is not valid for model `{kind}`")]
    UnexpectedParam { kind: &'static str, key: String },
    #[error("model `{kind}` needs parameter `{key}`")]
    MissingParam {
        kind: &'static str,
        key: &'static str,
    },
    #[error("parameter `{0}` given twice")]
    DuplicateParam(String),
}

/// A validated channel model. Parameters a kind does not use are stored as 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    q: f64,
    u: f64,
}

fn check_prob(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if (0.0..1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModelError::BadProbability { name, value })
    }
}

impl NoiseModel {
    pub const NOISE_FREE: NoiseModel = NoiseModel {
        kind: NoiseKind::NoiseFree,
        q: 0.0,
        u: 0.0,
    };

    pub fn noise_free() -> Self {
        Self::NOISE_FREE
    }

    pub fn addition(q: f64) -> Result<Self, ModelError> {
        Ok(NoiseModel {
            kind: NoiseKind::Addition,
            q: check_prob("q", q)?,
            u: 0.0,
        })
    }

    pub fn dilution(u: f64) -> Result<Self, ModelError> {
        Ok(NoiseModel {
            kind: NoiseKind::Dilution,
            q: 0.0,
            u: check_prob("u", u)?,
        })
    }

    pub fn add_dilute(q: f64, u: f64) -> Result<Self, ModelError> {
        Ok(NoiseModel {
            kind: NoiseKind::AddDilute,
            q: check_prob("q", q)?,
            u: check_prob("u", u)?,
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// False-positive rate (0 for kinds without addition noise).
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Per-defective dilution rate (0 for kinds without dilution).
    pub fn u(&self) -> f64 {
        self.u
    }

    /// Same kind family with a new false-positive rate. Kinds without
    /// addition noise gain it (`noise-free` becomes `addition`).
    pub fn with_q(&self, q: f64) -> Result<Self, ModelError> {
        match self.kind {
            NoiseKind::NoiseFree | NoiseKind::Addition => Self::addition(q),
            NoiseKind::Dilution | NoiseKind::AddDilute => Self::add_dilute(q, self.u),
        }
    }

    /// Same kind family with a new dilution rate.
    pub fn with_u(&self, u: f64) -> Result<Self, ModelError> {
        match self.kind {
            NoiseKind::NoiseFree | NoiseKind::Dilution => Self::dilution(u),
            NoiseKind::Addition | NoiseKind::AddDilute => Self::add_dilute(self.q, u),
        }
    }

    fn dilution_factor(&self, k: usize) -> f64 {
        // u^k; exact for integer k via repeated squaring in pow
        libm::pow(self.u, k as f64)
    }
}

impl ChannelLaw for NoiseModel {
    fn positive_prob(&self, k: usize) -> f64 {
        match (self.kind, k) {
            (NoiseKind::NoiseFree | NoiseKind::Dilution, 0) => 0.0,
            (NoiseKind::Addition | NoiseKind::AddDilute, 0) => self.q,
            (NoiseKind::NoiseFree | NoiseKind::Addition, _) => 1.0,
            (NoiseKind::Dilution, _) => 1.0 - self.dilution_factor(k),
            (NoiseKind::AddDilute, _) => 1.0 - self.dilution_factor(k) * (1.0 - self.q),
        }
    }

    fn negative_prob(&self, k: usize) -> f64 {
        match (self.kind, k) {
            (NoiseKind::NoiseFree | NoiseKind::Dilution, 0) => 1.0,
            (NoiseKind::Addition | NoiseKind::AddDilute, 0) => 1.0 - self.q,
            (NoiseKind::NoiseFree | NoiseKind::Addition, _) => 0.0,
            (NoiseKind::Dilution, _) => self.dilution_factor(k),
            (NoiseKind::AddDilute, _) => self.dilution_factor(k) * (1.0 - self.q),
        }
    }
}

impl<L: ChannelLaw + ?Sized> ChannelLaw for &L {
    fn positive_prob(&self, k: usize) -> f64 {
        (**self).positive_prob(k)
    }

    fn negative_prob(&self, k: usize) -> f64 {
        (**self).negative_prob(k)
    }
}

/// Draws one test outcome for a pool holding `k` defectives.
///
/// Always consumes exactly one `f64` from `rng`, so the stream position after
/// `t` tests does not depend on the outcomes.
pub fn sample_outcome<L, R>(law: &L, k: usize, rng: &mut R) -> bool
where
    L: ChannelLaw + ?Sized,
    R: Rng + ?Sized,
{
    let draw: f64 = rng.random();
    draw < law.positive_prob(k)
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NoiseKind::NoiseFree => f.write_str("noise-free"),
            NoiseKind::Addition => write!(f, "addition:q={}", self.q),
            NoiseKind::Dilution => write!(f, "dilution:u={}", self.u),
            NoiseKind::AddDilute => write!(f, "add-dilute:q={},u={}", self.q, self.u),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = ModelError;

    /// Parses `noise-free`, `addition:q=<f>`, `dilution:u=<f>` or
    /// `add-dilute:q=<f>,u=<f>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((name, params)) => (name.trim(), params),
            None => (s, ""),
        };
        let (kind, allowed): (&'static str, &[&'static str]) = match name {
            "noise-free" => ("noise-free", &[]),
            "addition" => ("addition", &["q"]),
            "dilution" => ("dilution", &["u"]),
            "add-dilute" => ("add-dilute", &["q", "u"]),
            other => return Err(ModelError::UnknownKind(other.into())),
        };

        let mut q = None;
        let mut u = None;
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| ModelError::Malformed(part.into()))?;
            let key = key.trim();
            if !allowed.contains(&key) {
                return Err(ModelError::UnexpectedParam {
                    kind,
                    key: key.into(),
                });
            }
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| ModelError::Malformed(part.into()))?;
            let slot = if key == "q" { &mut q } else { &mut u };
            if slot.replace(value).is_some() {
                return Err(ModelError::DuplicateParam(key.into()));
            }
        }

        let need = |v: Option<f64>, key| v.ok_or(ModelError::MissingParam { kind, key });
        match kind {
            "noise-free" => Ok(Self::noise_free()),
            "addition" => Self::addition(need(q, "q")?),
            "dilution" => Self::dilution(need(u, "u")?),
            _ => Self::add_dilute(need(q, "q")?, need(u, "u")?),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for NoiseModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for NoiseModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
