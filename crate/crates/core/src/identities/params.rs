//! Scenario parameters and user overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IdentityError;

/// Every tunable quantity a scenario may read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Sample size per side (paths, draws or points).
    pub n: usize,
    pub t: f64,
    pub mu: f64,
    pub x: f64,
    pub nu: f64,
    pub theta: f64,
    pub a: f64,
    pub level: f64,
    pub lambda: f64,
    pub xi: f64,
    pub v: f64,
    pub y: f64,
    /// Path grid resolution.
    pub steps: u32,
}

impl Params {
    pub const BASE: Params = Params {
        n: 100_000,
        t: 1.0,
        mu: 1.0,
        x: 0.5,
        nu: 1.0,
        theta: 0.5,
        a: 2.0,
        level: 1.0,
        lambda: 0.5,
        xi: 1.0,
        v: 1.0,
        y: 1.0,
        steps: 1 << 10,
    };

    fn set(&mut self, key: Param, value: f64) {
        match key {
            Param::N => self.n = value as usize,
            Param::T => self.t = value,
            Param::Mu => self.mu = value,
            Param::X => self.x = value,
            Param::Nu => self.nu = value,
            Param::Theta => self.theta = value,
            Param::A => self.a = value,
            Param::Level => self.level = value,
            Param::Lambda => self.lambda = value,
            Param::Xi => self.xi = value,
            Param::V => self.v = value,
            Param::Y => self.y = value,
            Param::Steps => self.steps = value as u32,
        }
    }
}

/// Names of the keys in [`Params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    N,
    T,
    Mu,
    X,
    Nu,
    Theta,
    A,
    Level,
    Lambda,
    Xi,
    V,
    Y,
    Steps,
}

impl Param {
    pub const ALL: [Param; 13] = [
        Param::N,
        Param::T,
        Param::Mu,
        Param::X,
        Param::Nu,
        Param::Theta,
        Param::A,
        Param::Level,
        Param::Lambda,
        Param::Xi,
        Param::V,
        Param::Y,
        Param::Steps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::N => "n",
            Param::T => "t",
            Param::Mu => "mu",
            Param::X => "x",
            Param::Nu => "nu",
            Param::Theta => "theta",
            Param::A => "a",
            Param::Level => "level",
            Param::Lambda => "lambda",
            Param::Xi => "xi",
            Param::V => "v",
            Param::Y => "y",
            Param::Steps => "steps",
        }
    }

    fn check(self, value: f64) -> Result<(), &'static str> {
        if !value.is_finite() {
            return Err("must be finite");
        }
        match self {
            Param::N => {
                if value.fract() != 0.0 || !(1.0..=1e8).contains(&value) {
                    return Err("must be an integer in [1, 1e8]");
                }
            }
            Param::Steps => {
                if value.fract() != 0.0 || !(64.0..=16_777_216.0).contains(&value) {
                    return Err("must be an integer in [64, 2^24]");
                }
            }
            Param::T | Param::Mu | Param::Nu | Param::Level | Param::V => {
                if value <= 0.0 {
                    return Err("must be positive");
                }
            }
            Param::Lambda => {
                if value < 0.0 {
                    return Err("must be non-negative");
                }
            }
            Param::X | Param::Theta | Param::A | Param::Xi | Param::Y => {}
        }
        Ok(())
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| IdentityError::UnknownParameter(s.to_owned()))
    }
}

/// User-supplied values replacing scenario defaults, plus an optional
/// significance level replacing the scenario's own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    values: BTreeMap<Param, f64>,
    alpha: Option<f64>,
}

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key` (a [`Param`] name or `alpha`) after validating `value`.
    pub fn set(&mut self, key: &str, value: f64) -> Result<&mut Self, IdentityError> {
        if key == "alpha" {
            if !(value > 0.0 && value < 0.5) {
                return Err(IdentityError::InvalidOverride {
                    key: key.to_owned(),
                    value,
                    reason: "must lie in (0, 0.5)",
                });
            }
            self.alpha = Some(value);
            return Ok(self);
        }
        let param: Param = key.parse()?;
        param.check(value).map_err(|reason| IdentityError::InvalidOverride {
            key: key.to_owned(),
            value,
            reason,
        })?;
        self.values.insert(param, value);
        Ok(self)
    }

    pub fn with(mut self, key: &str, value: f64) -> Result<Self, IdentityError> {
        self.set(key, value)?;
        Ok(self)
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn get(&self, key: Param) -> Option<f64> {
        self.values.get(&key).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty() && self.alpha.is_none()
    }

    /// Applies the overrides to `defaults`. With `strict`, a key the
    /// scenario does not read is an error; otherwise it is skipped.
    pub(super) fn apply(&self, id: &str, defaults: Params, uses: &[Param], strict: bool) -> Result<Params, IdentityError> {
        let mut p = defaults;
        for (&key, &value) in &self.values {
            if uses.contains(&key) {
                p.set(key, value);
            } else if strict {
                return Err(IdentityError::UnusedParameter {
                    id: id.to_owned(),
                    key: key.name(),
                });
            }
        }
        Ok(p)
    }
}
