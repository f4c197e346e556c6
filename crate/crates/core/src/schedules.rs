//! Step-size sequences `γ(n)` and the summability checker.
//!
//! The checker reports whether a schedule satisfies `γ(n) > 0`,
//! `Σγ(n) = ∞` and `Σγ(n)² < ∞`. Schedules that violate the last condition
//! (the cyclic schedule used in the SPSA experiment, constant steps) are still
//! runnable; the report only documents the violation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `γ(n) = 1 / (n + offset)`.
    Harmonic { offset: f64 },
    /// `γ(n) = 1 / ((n mod period) + base)`.
    CyclicHarmonic { period: u64, base: f64 },
    /// `γ(n) = value`.
    Constant { value: f64 },
}

/// Analytic verdict for one summability condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A2Verdict {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    pub sum_diverges: A2Verdict,
    pub sum_squares_finite: A2Verdict,
    pub gamma_to_zero: A2Verdict,
    pub horizon: u64,
    pub partial_sum: f64,
    pub partial_sum_squares: f64,
}

impl A2Report {
    pub fn satisfied(&self) -> bool {
        self.sum_diverges == A2Verdict::Yes && self.sum_squares_finite == A2Verdict::Yes
    }
}

impl StepSchedule {
    /// Rejects parameterizations with `γ(0) > 1` or non-positive steps.
    pub fn harmonic(offset: f64) -> Result<Self> {
        if !(offset.is_finite() && offset >= 1.0) {
            return Err(Error::invalid(format!("harmonic offset must be >= 1, got {offset}")));
        }
        Ok(Self::Harmonic { offset })
    }

    pub fn cyclic_harmonic(period: u64, base: f64) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("cyclic period must be >= 1"));
        }
        if !(base.is_finite() && base >= 1.0) {
            return Err(Error::invalid(format!("cyclic base must be >= 1, got {base}")));
        }
        Ok(Self::CyclicHarmonic { period, base })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::invalid(format!("constant step must lie in (0, 1], got {value}")));
        }
        Ok(Self::Constant { value })
    }

    /// The schedule of the SPSA experiment: `1 / ((n mod 800) + 100)`.
    pub fn spsa_experiment() -> Self {
        Self::CyclicHarmonic { period: 800, base: 100.0 }
    }

    pub fn gamma(&self, n: u64) -> f64 {
        match *self {
            Self::Harmonic { offset } => 1.0 / (n as f64 + offset),
            Self::CyclicHarmonic { period, base } => 1.0 / ((n % period) as f64 + base),
            Self::Constant { value } => value,
        }
    }

    /// Analytic verdicts plus numeric partial sums over `n < horizon`.
    pub fn check_a2(&self, horizon: u64) -> Result<A2Report> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        use A2Verdict::*;
        let (sum_diverges, sum_squares_finite, gamma_to_zero) = match self {
            Self::Harmonic { .. } => (Yes, Yes, Yes),
            // Every cycle adds the same positive mass to both sums.
            Self::CyclicHarmonic { .. } => (Yes, No, No),
            Self::Constant { .. } => (Yes, No, No),
        };
        let (partial_sum, partial_sum_squares) = (0..horizon).fold((0.0, 0.0), |(s, s2), n| {
            let g = self.gamma(n);
            (s + g, s2 + g * g)
        });
        Ok(A2Report {
            sum_diverges,
            sum_squares_finite,
            gamma_to_zero,
            horizon,
            partial_sum,
            partial_sum_squares,
        })
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Harmonic { offset } => write!(f, "harmonic:{offset}"),
            Self::CyclicHarmonic { period, base } => write!(f, "cyclic:{period}:{base}"),
            Self::Constant { value } => write!(f, "constant:{value}"),
        }
    }
}

/// Parses `harmonic:<offset>`, `cyclic:<period>:<base>` or `constant:<value>`.
impl FromStr for StepSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.parse().map_err(|_| Error::invalid(format!("bad number {p:?} in schedule {s:?}")))
        };
        match parts.as_slice() {
            ["harmonic"] => Self::harmonic(1.0),
            ["harmonic", off] => Self::harmonic(num(off)?),
            ["cyclic", period, base] => {
                let period = period
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad cyclic period in {s:?}")))?;
                Self::cyclic_harmonic(period, num(base)?)
            }
            ["constant", v] => Self::constant(num(v)?),
            _ => Err(Error::invalid(format!("unknown schedule {s:?}"))),
        }
    }
}

impl fmt::Display for A2Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            A2Verdict::Yes => "yes",
            A2Verdict::No => "no",
            A2Verdict::Unknown => "unknown",
        })
    }
}
