//! The singular weight `f = c_f d^{-β}`, its bounded regularization `f_ε`
//! and the truncated nonlinearity `g_m` with its primitive `Υ_m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Domain;

/// Tolerance used to decide `β + δ = 1`.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Exponents, weight amplitude and domain of the Dirichlet problem
/// `-Δ_p u - Δ_q u = c_f d^{-β} u^{-δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub beta: f64,
    pub c_f: f64,
    pub domain: Domain,
}

/// Boundary growth regime, set by the sign of `β + δ - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `β + δ < 1`: linear growth `u ~ d`.
    Sublinear,
    /// `β + δ = 1`: `u ~ d log^{1/(p-β)}(L/d)`.
    Critical,
    /// `β + δ > 1`: `u ~ d^τ` with `τ = (p-β)/(p-1+δ)`.
    Superlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solvability {
    Solvable,
    NonExistence,
}

impl ProblemSpec {
    pub fn new(p: f64, q: f64, delta: f64, beta: f64, c_f: f64, domain: Domain) -> Result<Self> {
        let spec = ProblemSpec {
            p,
            q,
            delta,
            beta,
            c_f,
            domain,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks `1 < q ≤ p`, `δ > 0`, `β ≥ 0`, `c_f ≥ 0`.
    ///
    /// `q = p` is accepted as a test mode. `c_f = 0` is accepted so the
    /// zero-weight edge case can be solved.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.p, self.q, self.delta, self.beta, self.c_f]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProblem("parameters must be finite".into()));
        }
        if !(self.q > 1.0 && self.q <= self.p) {
            return Err(Error::InvalidProblem(format!(
                "need 1 < q ≤ p, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidProblem(format!("δ must be positive, got {}", self.delta)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidProblem(format!("β must be nonnegative, got {}", self.beta)));
        }
        if !(self.c_f >= 0.0) {
            return Err(Error::InvalidProblem(format!("c_f must be nonnegative, got {}", self.c_f)));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ProblemSpec { beta, ..*self }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        ProblemSpec { delta, ..*self }
    }

    pub fn with_c_f(&self, c_f: f64) -> Self {
        ProblemSpec { c_f, ..*self }
    }

    pub fn regime(&self) -> Regime {
        let s = self.beta + self.delta - 1.0;
        if s.abs() <= CRITICAL_TOL {
            Regime::Critical
        } else if s < 0.0 {
            Regime::Sublinear
        } else {
            Regime::Superlinear
        }
    }

    pub fn solvability(&self) -> Solvability {
        if self.beta < self.p {
            Solvability::Solvable
        } else {
            Solvability::NonExistence
        }
    }

    /// `q = p`, outside the standing hypothesis `q < p`.
    pub fn is_degenerate_test_mode(&self) -> bool {
        self.q == self.p
    }

    /// Boundary exponent `τ = (p - β)/(p - 1 + δ)`.
    pub fn tau(&self) -> f64 {
        (self.p - self.beta) / (self.p - 1.0 + self.delta)
    }

    /// Exponent `(p - 1 + δ)/(p - β)` applied to `ε` inside `f_ε`.
    pub fn eps_exponent(&self) -> Result<f64> {
        if self.beta == self.p {
            return Err(Error::NonExistenceThreshold { p: self.p });
        }
        Ok((self.p - 1.0 + self.delta) / (self.p - self.beta))
    }

    /// Sharp power `ρ₀ = (p-1)(β+δ-1)/(p-β)`: `u^ρ` has finite p-energy with
    /// zero trace exactly when `ρ > ρ₀`.
    pub fn sobolev_threshold(&self) -> f64 {
        (self.p - 1.0) * (self.beta + self.delta - 1.0) / (self.p - self.beta)
    }

    /// Whether `u` itself has finite p-energy: `δ < 2 + (1 - βp)/(p - 1)`.
    pub fn energy_membership(&self) -> bool {
        self.delta < 2.0 + (1.0 - self.beta * self.p) / (self.p - 1.0)
    }

    /// Weight at boundary distance `d`; infinite at `d = 0` when `β > 0`.
    pub fn f_at_distance(&self, d: f64) -> f64 {
        if self.beta == 0.0 {
            self.c_f
        } else if d == 0.0 {
            if self.c_f == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.c_f * d.powf(-self.beta)
        }
    }

    /// Regularized weight at boundary distance `d`.
    ///
    /// `f_ε = (f^{-1/β} + ε^{(p-1+δ)/(p-β)})^{-β}`, written with
    /// `f^{-1/β} = c_f^{-1/β} d` to stay accurate near the boundary. For
    /// `β = 0` the weight is already bounded and `f_ε = f`. `ε = 0` returns
    /// `f` when `β < p`.
    pub fn f_eps_at_distance(&self, d: f64, eps: f64) -> Result<f64> {
        let kappa = self.eps_exponent()?;
        if self.beta == 0.0 || self.c_f == 0.0 {
            return Ok(self.f_at_distance(d));
        }
        let shift = if eps == 0.0 {
            if kappa > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            eps.powf(kappa)
        };
        let base = self.c_f.powf(-1.0 / self.beta) * d + shift;
        Ok(if base == 0.0 {
            f64::INFINITY
        } else {
            base.powf(-self.beta)
        })
    }
}

/// `f(x) = c_f d(x)^{-β}`; `f64::INFINITY` marks the boundary when `β > 0`.
pub fn eval_f(spec: &ProblemSpec, x: f64) -> Result<f64> {
    let d = spec.domain.distance(x)?;
    Ok(spec.f_at_distance(d))
}

/// Regularized weight `f_ε(x)`, finite everywhere for `ε > 0`.
pub fn eval_f_eps(spec: &ProblemSpec, x: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidProblem(format!("ε must be positive, got {eps}")));
    }
    let d = spec.domain.distance(x)?;
    spec.f_eps_at_distance(d, eps)
}

/// Truncation level `m` of `g_m(s) = min(s^{-δ}, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    m: f64,
}

impl TruncationParams {
    pub fn new(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidProblem(format!("truncation level must be positive, got {m}")));
        }
        Ok(TruncationParams { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Breakpoint `s* = m^{-1/δ}` where `s^{-δ} = m`.
    pub fn breakpoint(&self, delta: f64) -> f64 {
        self.m.powf(-1.0 / delta)
    }
}

/// `min(s^{-δ}, m)` for `s > 0`, and `m` for `s ≤ 0`.
pub fn g_m(s: f64, spec: &ProblemSpec, trunc: TruncationParams) -> f64 {
    if s <= 0.0 {
        trunc.m
    } else {
        s.powf(-spec.delta).min(trunc.m)
    }
}

/// Primitive of `g_m` normalized by `Υ_m(1) = 0`.
pub fn upsilon_m(s: f64, spec: &ProblemSpec, trunc: TruncationParams) -> f64 {
    let antiderivative = |s: f64| -> f64 {
        let star = trunc.breakpoint(spec.delta);
        if s <= star {
            trunc.m * (s - star) + power_primitive(star, spec.delta)
        } else {
            power_primitive(s, spec.delta)
        }
    };
    antiderivative(s) - antiderivative(1.0)
}

/// An antiderivative of `s^{-δ}` on `s > 0`.
fn power_primitive(s: f64, delta: f64) -> f64 {
    if delta == 1.0 {
        s.ln()
    } else {
        s.powf(1.0 - delta) / (1.0 - delta)
    }
}
