//! Gradient oracles realizing `g(x) ∈ ∇f(x) + B̄_ε(0)`.
//!
//! Every oracle is an immutable descriptor; randomness comes from the stream
//! handed to [`GradientOracle::sample`], so a run that owns its own seeded
//! stream is reproducible.
//!
//! SPSA with a constant sensitivity parameter `c` uses two objective
//! evaluations per sample. On a quadratic the estimate is
//! `ĝᵢ = Σⱼ (2Qx)ⱼ ΔⱼΔᵢ`: unbiased, independent of `c` in exact arithmetic,
//! but its deviation from `2Qx` does not shrink with `c`. It behaves as a
//! martingale-difference perturbation rather than a bounded deterministic
//! error, see [`spsa_error_decomposition`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objective::QuadraticObjective;
use crate::Vector;

/// Hessians with a larger eigenvalue ratio are treated as singular.
pub const MAX_HESSIAN_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum GradientOracle {
    /// `2Qx`.
    Exact,
    /// `2Qx + error`, the same vector at every call.
    ConstantError { error: Vector },
    /// `2Qx + u` with `u` uniform on `B̄_ε(0)`.
    BoundedNoise { epsilon: f64 },
    /// Two-evaluation SPSA with fixed sensitivity `c`.
    SpsaC { c: f64 },
    /// `H⁻¹∇f(x) + u` with `u` uniform on `B̄_ε(0)`; equals `x + u` on quadratics.
    NewtonDirection { epsilon: f64 },
    /// `scale·Qx + error`. Reproduces the constant-error experiment, whose
    /// field is `Qx` rather than `2Qx`.
    LinearField { scale: f64, error: Vector },
}

impl GradientOracle {
    /// Constant error `(ε/√d, …, ε/√d)`.
    pub fn constant_error(epsilon: f64, dim: usize) -> Result<Self> {
        Ok(Self::ConstantError { error: constant_error_vector(epsilon, dim)? })
    }

    pub fn bounded_noise(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self::BoundedNoise { epsilon })
    }

    pub fn spsa(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("SPSA sensitivity c must be > 0, got {c}")));
        }
        Ok(Self::SpsaC { c })
    }

    pub fn newton(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self::NewtonDirection { epsilon })
    }

    /// `Qx + (ε/√d, …, ε/√d)`.
    pub fn linear_field(scale: f64, epsilon: f64, dim: usize) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::invalid("linear field scale must be finite"));
        }
        Ok(Self::LinearField { scale, error: constant_error_vector(epsilon, dim)? })
    }

    /// Radius of the error ball this oracle promises, when it has one.
    ///
    /// SPSA has no deterministic bound on quadratics and returns `None`.
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Self::Exact => Some(0.0),
            Self::ConstantError { error } | Self::LinearField { error, .. } => Some(error.norm()),
            Self::BoundedNoise { epsilon } | Self::NewtonDirection { epsilon } => Some(*epsilon),
            Self::SpsaC { .. } => None,
        }
    }

    /// Checks the oracle's vectors against the objective dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::ConstantError { error } | Self::LinearField { error, .. } if error.len() != dim => {
                Err(Error::invalid(format!(
                    "oracle error vector has length {} for dimension {dim}",
                    error.len()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, obj: &QuadraticObjective, x: &Vector, rng: &mut R) -> Result<Vector> {
        match self {
            Self::Exact => Ok(obj.gradient(x)),
            Self::ConstantError { error } => Ok(obj.gradient(x) + error),
            Self::BoundedNoise { epsilon } => Ok(obj.gradient(x) + uniform_in_ball(x.len(), *epsilon, rng)),
            Self::SpsaC { c } => {
                let delta = draw_perturbation(x.len(), rng)?;
                Ok(spsa_estimate(obj, x, *c, &delta))
            }
            Self::NewtonDirection { epsilon } => {
                Ok(newton_direction(obj, x)? + uniform_in_ball(x.len(), *epsilon, rng))
            }
            Self::LinearField { scale, error } => Ok((obj.q() * x) * *scale + error),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("error radius must be finite and >= 0, got {epsilon}")))
    }
}

/// A Rademacher vector: every coordinate is exactly `±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation(Vector);

impl Perturbation {
    pub fn new(delta: Vector) -> Result<Self> {
        if delta.is_empty() || delta.iter().any(|v| *v != 1.0 && *v != -1.0) {
            return Err(Error::invalid("perturbation entries must be exactly +1 or -1"));
        }
        Ok(Self(delta))
    }

    pub fn from_signs(signs: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(signs))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn draw_perturbation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Perturbation> {
    if dim == 0 {
        return Err(Error::invalid("perturbation dimension must be >= 1"));
    }
    Ok(Perturbation(Vector::from_fn(dim, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })))
}

/// `(f(x + cΔ) − f(x − cΔ)) / (2cΔᵢ)` for every coordinate `i`, from exactly
/// two objective evaluations.
///
/// Panics if the dimensions of `x`, `delta` and the objective disagree.
pub fn spsa_estimate(obj: &QuadraticObjective, x: &Vector, c: f64, delta: &Perturbation) -> Vector {
    let step = &delta.0 * c;
    let plus = obj.eval(&(x + &step));
    let minus = obj.eval(&(x - &step));
    let diff = plus - minus;
    delta.0.map(|d| diff / (2.0 * c * d))
}

/// Splits an SPSA sample into `(bias, deviation)`.
///
/// `deviation = spsa_estimate − ∇f(x)`. The bias `E_Δ[deviation]` is zero on
/// quadratics because `E[ΔⱼΔᵢ] = 0` for `j ≠ i`, so it is returned
/// analytically.
pub fn spsa_error_decomposition(
    obj: &QuadraticObjective,
    x: &Vector,
    c: f64,
    delta: &Perturbation,
) -> (Vector, Vector) {
    let deviation = spsa_estimate(obj, x, c, delta) - obj.gradient(x);
    (Vector::zeros(x.len()), deviation)
}

/// `(ε/√d, …, ε/√d)`, whose Euclidean norm is `ε`.
pub fn constant_error_vector(epsilon: f64, dim: usize) -> Result<Vector> {
    check_epsilon(epsilon)?;
    if dim == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    Ok(Vector::from_element(dim, epsilon / (dim as f64).sqrt()))
}

/// Uniform sample from the closed ball of radius `radius`: a Gaussian
/// direction scaled by `radius·U^{1/d}`, clamped so the norm never exceeds
/// `radius`.
pub fn uniform_in_ball<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vector {
    if radius == 0.0 {
        return Vector::zeros(dim);
    }
    let mut dir = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut norm = dir.norm();
    while norm == 0.0 {
        dir = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        norm = dir.norm();
    }
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    let mut u = dir * (r / norm);
    let n = u.norm();
    if n > radius {
        u *= radius / n;
    }
    u
}

/// `H⁻¹∇f(x)` through a Cholesky solve.
pub fn newton_direction(obj: &QuadraticObjective, x: &Vector) -> Result<Vector> {
    let hessian = obj.hessian();
    let eig = SymmetricEigen::new(hessian.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_HESSIAN_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let chol = Cholesky::new(hessian).ok_or(Error::IllConditioned { condition })?;
    Ok(chol.solve(&obj.gradient(x)))
}

/// Text descriptor of an oracle, independent of the problem dimension.
///
/// Formats: `exact`, `constant:<ε>`, `noise:<ε>`, `spsa:<c>`, `newton:<ε>`,
/// `linear:<scale>:<ε>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleSpec {
    Exact,
    Constant { epsilon: f64 },
    Noise { epsilon: f64 },
    Spsa { c: f64 },
    Newton { epsilon: f64 },
    Linear { scale: f64, epsilon: f64 },
}

impl OracleSpec {
    pub fn build(&self, dim: usize) -> Result<GradientOracle> {
        match *self {
            Self::Exact => Ok(GradientOracle::Exact),
            Self::Constant { epsilon } => GradientOracle::constant_error(epsilon, dim),
            Self::Noise { epsilon } => GradientOracle::bounded_noise(epsilon),
            Self::Spsa { c } => GradientOracle::spsa(c),
            Self::Newton { epsilon } => GradientOracle::newton(epsilon),
            Self::Linear { scale, epsilon } => GradientOracle::linear_field(scale, epsilon, dim),
        }
    }

    /// Replaces the swept parameter: `c` for SPSA, `ε` otherwise.
    pub fn with_parameter(self, value: f64) -> Self {
        match self {
            Self::Exact => Self::Exact,
            Self::Constant { .. } => Self::Constant { epsilon: value },
            Self::Noise { .. } => Self::Noise { epsilon: value },
            Self::Spsa { .. } => Self::Spsa { c: value },
            Self::Newton { .. } => Self::Newton { epsilon: value },
            Self::Linear { scale, .. } => Self::Linear { scale, epsilon: value },
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Constant { epsilon } => write!(f, "constant:{epsilon}"),
            Self::Noise { epsilon } => write!(f, "noise:{epsilon}"),
            Self::Spsa { c } => write!(f, "spsa:{c}"),
            Self::Newton { epsilon } => write!(f, "newton:{epsilon}"),
            Self::Linear { scale, epsilon } => write!(f, "linear:{scale}:{epsilon}"),
        }
    }
}

impl FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.parse().map_err(|_| Error::invalid(format!("bad number {p:?} in oracle {s:?}")))
        };
        let spec = match parts.as_slice() {
            ["exact"] => Self::Exact,
            ["constant", e] => Self::Constant { epsilon: num(e)? },
            ["noise", e] => Self::Noise { epsilon: num(e)? },
            ["spsa", c] => Self::Spsa { c: num(c)? },
            ["newton", e] => Self::Newton { epsilon: num(e)? },
            ["linear", scale, e] => Self::Linear { scale: num(scale)?, epsilon: num(e)? },
            _ => return Err(Error::invalid(format!("unknown oracle {s:?}"))),
        };
        // Surface parameter errors at parse time.
        spec.build(1)?;
        Ok(spec)
    }
}
