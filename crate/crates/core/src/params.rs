//! Model parameters under moderate scaling: `s_N = alpha / f(N)` and
//! `m_N = mu / f(N)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// How the scaling value `f(N)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FScaling {
    /// An explicit value.
    Value { value: f64 },
    /// `c * ln N`.
    Log { c: f64 },
    /// `c * N^gamma` with `gamma < 1`.
    Power { c: f64, gamma: f64 },
}

impl FScaling {
    pub fn evaluate(&self, n: u64) -> Result<f64> {
        let nf = n as f64;
        let f = match *self {
            FScaling::Value { value } => value,
            FScaling::Log { c } => c * nf.ln(),
            FScaling::Power { c, gamma } => {
                if !(gamma < 1.0) {
                    return domain(format!("power family needs gamma < 1, got {gamma}"));
                }
                c * nf.powf(gamma)
            }
        };
        if !f.is_finite() || f < 1.0 {
            return domain(format!("f(N) must be finite and >= 1, got {f}"));
        }
        Ok(f)
    }
}

/// Validated parameters in the subcritical regime `0 < mu < alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: u64,
    pub alpha: f64,
    pub mu: f64,
    pub f_of_n: f64,
}

impl Params {
    pub fn new(n: u64, alpha: f64, mu: f64, f_of_n: f64) -> Result<Self> {
        if n == 0 {
            return domain("population size N must be positive");
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        if !(mu.is_finite() && mu > 0.0 && mu < alpha) {
            return domain(format!(
                "need 0 < mu < alpha, got mu = {mu}, alpha = {alpha}"
            ));
        }
        if !(f_of_n.is_finite() && f_of_n >= 1.0) {
            return domain(format!("f(N) must be >= 1, got {f_of_n}"));
        }
        Ok(Self {
            n,
            alpha,
            mu,
            f_of_n,
        })
    }

    pub fn with_scaling(n: u64, alpha: f64, mu: f64, scaling: FScaling) -> Result<Self> {
        Self::new(n, alpha, mu, scaling.evaluate(n)?)
    }

    /// Selection rate per event, `alpha / f(N)`.
    pub fn s_n(&self) -> f64 {
        self.alpha / self.f_of_n
    }

    /// Mutation rate per line, `mu / f(N)`.
    pub fn m_n(&self) -> f64 {
        self.mu / self.f_of_n
    }

    pub fn rho(&self) -> f64 {
        self.mu / self.alpha
    }

    pub fn q(&self) -> f64 {
        self.mu / (self.alpha + self.mu)
    }

    /// `N / f(N)`, the carrying-capacity scale of the ASG.
    pub fn n_over_f(&self) -> f64 {
        self.n as f64 / self.f_of_n
    }

    pub fn rates(&self) -> Rates {
        Rates {
            n: self.n,
            s: self.s_n(),
            m: self.m_n(),
        }
    }
}

/// Per-event rates consumed by the simulators. Unlike [`Params`] this admits
/// the degenerate corners `s = 0` and `m = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub n: u64,
    pub s: f64,
    pub m: f64,
}

impl Rates {
    pub fn new(n: u64, s: f64, m: f64) -> Result<Self> {
        if n == 0 {
            return domain("population size N must be positive");
        }
        if !(s.is_finite() && s >= 0.0 && m.is_finite() && m >= 0.0) {
            return domain(format!(
                "rates must be finite and nonnegative, got s = {s}, m = {m}"
            ));
        }
        Ok(Self { n, s, m })
    }
}

impl From<Params> for Rates {
    fn from(p: Params) -> Self {
        p.rates()
    }
}
