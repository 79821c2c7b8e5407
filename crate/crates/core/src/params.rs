//! Model parameters of the directed preferential attachment model and the
//! constants derived from them.
//!
//! A config file is a flat `key = value` list with keys `alpha`, `beta`,
//! `gamma`, `delta_in`, `delta_out`. Blank lines and `#` comments are ignored.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `alpha + beta + gamma = 1`.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta_in: f64,
    pub delta_out: f64,
}

/// Constants shared by the limit law and the tail measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    /// `c2 / c1`
    pub a: f64,
    pub alpha_in: f64,
    pub alpha_out: f64,
    /// Regular-variation index of `b_in(t) = t^(1/gamma_in)`, equal to `alpha_in - 1`.
    pub gamma_in: f64,
    pub gamma_out: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta_in: f64, delta_out: f64) -> Self {
        ModelParams {
            alpha,
            beta,
            gamma,
            delta_in,
            delta_out,
        }
    }

    /// The reference parameter set (0.3, 0.5, 0.2, 1, 1).
    pub fn reference() -> Self {
        ModelParams::new(0.3, 0.5, 0.2, 1.0, 1.0)
    }

    /// Checks every constraint and returns the parameters with the three
    /// probabilities renormalized to sum to one.
    pub fn validate(&self) -> Result<ModelParams> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta_in", self.delta_in),
            ("delta_out", self.delta_out),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        for (name, v) in &fields[..3] {
            if *v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} < 0")));
            }
            if *v >= 1.0 {
                return Err(Error::InvalidParams(format!("{name} = {v} is not < 1")));
            }
        }
        if self.delta_in < 0.0 {
            return Err(Error::InvalidParams("delta_in < 0".into()));
        }
        if self.delta_out < 0.0 {
            return Err(Error::InvalidParams("delta_out < 0".into()));
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParams(format!(
                "alpha+beta+gamma = {sum} ≠ 1"
            )));
        }
        Ok(ModelParams {
            alpha: self.alpha / sum,
            beta: self.beta / sum,
            gamma: self.gamma / sum,
            ..*self
        })
    }

    /// Derived constants. Fails with `DegenerateTail` when either marginal
    /// power-law side condition does not hold.
    pub fn derive(&self) -> Result<DerivedConstants> {
        let p = self.validate()?;
        if p.alpha * p.delta_in + p.gamma <= 0.0 {
            return Err(Error::DegenerateTail(
                "alpha*delta_in + gamma = 0: no in-degree power law".into(),
            ));
        }
        if p.gamma * p.delta_out + p.alpha <= 0.0 {
            return Err(Error::DegenerateTail(
                "gamma*delta_out + alpha = 0: no out-degree power law".into(),
            ));
        }
        let ag = p.alpha + p.gamma;
        let c1 = (p.alpha + p.beta) / (1.0 + p.delta_in * ag);
        let c2 = (p.beta + p.gamma) / (1.0 + p.delta_out * ag);
        let gamma_in = 1.0 / c1;
        let gamma_out = 1.0 / c2;
        Ok(DerivedConstants {
            c1,
            c2,
            a: c2 / c1,
            alpha_in: 1.0 + gamma_in,
            alpha_out: 1.0 + gamma_out,
            gamma_in,
            gamma_out,
        })
    }

    /// Tail-measure operations need both offsets strictly positive.
    pub fn require_positive_deltas(&self) -> Result<()> {
        if self.delta_in > 0.0 && self.delta_out > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "tail analytics need delta_in > 0 and delta_out > 0".into(),
            ))
        }
    }

    /// Probability `gamma / (alpha + gamma)` of the first mixture branch.
    pub fn branch_probability(&self) -> Result<f64> {
        let ag = self.alpha + self.gamma;
        if ag <= 0.0 {
            return Err(Error::InvalidParams("alpha + gamma = 0".into()));
        }
        Ok(self.gamma / ag)
    }

    /// The parameters with the roles of in- and out-degree exchanged.
    pub fn mirrored(&self) -> ModelParams {
        ModelParams {
            alpha: self.gamma,
            beta: self.beta,
            gamma: self.alpha,
            delta_in: self.delta_out,
            delta_out: self.delta_in,
        }
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "alpha = {}\nbeta = {}\ngamma = {}\ndelta_in = {}\ndelta_out = {}\n",
            self.alpha, self.beta, self.gamma, self.delta_in, self.delta_out
        )
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::reference()
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={} beta={} gamma={} delta_in={} delta_out={}",
            self.alpha, self.beta, self.gamma, self.delta_in, self.delta_out
        )
    }
}

impl FromStr for ModelParams {
    type Err = Error;

    /// Parses the flat `key = value` config format. All five keys are required.
    fn from_str(s: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 5] = [None; 5];
        const KEYS: [&str; 5] = ["alpha", "beta", "gamma", "delta_in", "delta_out"];
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().replace('-', "_");
            let idx = KEYS.iter().position(|k| *k == key).ok_or_else(|| {
                Error::Format(format!("line {}: unknown key '{}'", lineno + 1, key))
            })?;
            let v: f64 = value.trim().parse().map_err(|_| {
                Error::Format(format!("line {}: bad number '{}'", lineno + 1, value.trim()))
            })?;
            vals[idx] = Some(v);
        }
        let get = |i: usize| {
            vals[i].ok_or_else(|| Error::Format(format!("missing key '{}'", KEYS[i])))
        };
        Ok(ModelParams::new(get(0)?, get(1)?, get(2)?, get(3)?, get(4)?))
    }
}
