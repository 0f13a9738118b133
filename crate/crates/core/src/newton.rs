//! Damped Newton with μ-continuation for the tridiagonal convex energies of
//! [`crate::energy`].

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::solver::SolverSettings;

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Maximum number of backtracking steps per line search.
const MAX_BACKTRACK: usize = 80;
/// Residual target for the intermediate μ stages.
const STAGE_TOL: f64 = 1e-7;
/// Relative rounding floor of a summed energy difference.
const ENERGY_NOISE: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    /// Residual of the smoothed energy at the last μ.
    pub residual: f64,
    /// Residual of the unsmoothed (μ = 0) energy at return.
    pub true_residual: f64,
    /// Largest energy change over accepted steps; negative when every step
    /// strictly decreased the energy.
    pub max_accepted_change: f64,
    /// Number of accepted steps that did not strictly decrease the energy.
    pub descent_violations: usize,
    /// Accepted steps whose predicted energy change was below the rounding
    /// resolution of the energy; these are accepted on residual decrease.
    pub unresolved_steps: usize,
    /// Residual produced by one-ulp perturbations of the final iterate. For
    /// exponents below 2 the flux is not Lipschitz at vanishing gradients,
    /// and this floor can exceed a fixed tolerance.
    pub residual_floor: f64,
}

impl NewtonStats {
    /// Whether the unsmoothed residual meets `tol` or the rounding floor.
    pub fn converged(&self, tol: f64) -> bool {
        self.true_residual <= tol.max(self.residual_floor)
    }
}

impl NewtonStats {
    fn merge(&mut self, other: &NewtonStats) {
        self.iterations += other.iterations;
        self.residual = other.residual;
        self.true_residual = other.true_residual;
        self.residual_floor = other.residual_floor;
        self.max_accepted_change = self.max_accepted_change.max(other.max_accepted_change);
        self.descent_violations += other.descent_violations;
        self.unresolved_steps += other.unresolved_steps;
    }
}

/// Solves the symmetric tridiagonal system `(diag, off) x = rhs` in place.
pub(crate) fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Divergence("Hessian is not positive definite".into()));
    }
    rhs[0] /= denom;
    for i in 1..n {
        c[i - 1] = off[i - 1] / denom;
        denom = diag[i] - off[i - 1] * c[i - 1];
        if !(denom.is_finite() && denom > 0.0) {
            return Err(Error::Divergence("Hessian is not positive definite".into()));
        }
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Minimizes `model` from `u` over the free nodes of its mesh.
///
/// Runs Newton at each μ of the schedule, then a final stage on the exact
/// (μ = 0) energy when every element gradient is nonzero. Convergence is
/// measured by the scaled residual of [`crate::energy`].
pub(crate) fn minimize(
    model: &EnergyModel<'_>,
    u: &mut [f64],
    settings: &SolverSettings,
) -> Result<NewtonStats> {
    if !model.feasible(u) {
        return Err(Error::Divergence("initial iterate is outside the energy domain".into()));
    }
    let mut stats = NewtonStats {
        max_accepted_change: f64::NEG_INFINITY,
        ..NewtonStats::default()
    };
    let schedule = &settings.mu_schedule;
    for (k, &mu) in schedule.iter().enumerate() {
        let last = k + 1 == schedule.len();
        let tol = if last {
            settings.newton_tol
        } else {
            settings.newton_tol.max(STAGE_TOL)
        };
        let stage = newton_stage(model, u, mu, tol, settings, last)?;
        stats.merge(&stage);
    }

    (stats.true_residual, stats.residual_floor) = residual_with_floor(model, u, 0.0);
    if !stats.converged(settings.newton_tol) && exact_stage_possible(model, u) {
        if let Ok(stage) = newton_stage(model, u, 0.0, settings.newton_tol, settings, false) {
            stats.merge(&stage);
        }
        (stats.true_residual, stats.residual_floor) = residual_with_floor(model, u, 0.0);
    }
    Ok(stats)
}

/// Scaled residual and its rounding floor at `u`.
fn residual_with_floor(model: &EnergyModel<'_>, u: &[f64], mu: f64) -> (f64, f64) {
    let free = model.mesh.free_range();
    let grad = model.gradient(u, mu);
    let floor = rounding_floor(model, &grad, u, mu);
    (grad.residual(free), floor)
}

/// Largest scaled residual attributable to a few ulps of error in `u`.
fn rounding_floor(model: &EnergyModel<'_>, grad: &crate::energy::Gradient, u: &[f64], mu: f64) -> f64 {
    let sens = model.rounding_sensitivity(u, mu);
    model
        .mesh
        .free_range()
        .map(|i| (sens[i] + ENERGY_NOISE * grad.scale[i]) / (1.0 + grad.scale[i]))
        .fold(0.0, f64::max)
}

/// Re-solves from an iterate that is already close to the minimizer: a
/// single exact stage when possible, the full schedule otherwise.
pub(crate) fn minimize_warm(
    model: &EnergyModel<'_>,
    u: &mut [f64],
    settings: &SolverSettings,
) -> Result<NewtonStats> {
    if model.feasible(u) && exact_stage_possible(model, u) {
        let mut trial = u.to_vec();
        if let Ok(mut stats) = newton_stage(model, &mut trial, 0.0, settings.newton_tol, settings, true) {
            u.copy_from_slice(&trial);
            (stats.true_residual, stats.residual_floor) = residual_with_floor(model, u, 0.0);
            return Ok(stats);
        }
    }
    minimize(model, u, settings)
}

/// The μ = 0 Hessian is finite only when no element gradient vanishes (for
/// exponents below 2).
fn exact_stage_possible(model: &EnergyModel<'_>, u: &[f64]) -> bool {
    if model.q >= 2.0 {
        return true;
    }
    let lens = model.mesh.element_lengths();
    (0..lens.len()).all(|e| u[e + 1] != u[e])
}

fn newton_stage(
    model: &EnergyModel<'_>,
    u: &mut [f64],
    mu: f64,
    tol: f64,
    settings: &SolverSettings,
    strict: bool,
) -> Result<NewtonStats> {
    let free = model.mesh.free_range();
    let mut stats = NewtonStats {
        max_accepted_change: f64::NEG_INFINITY,
        ..NewtonStats::default()
    };
    let mut dir = vec![0.0; u.len()];
    for iteration in 0..=settings.newton_max_iter {
        let grad = model.gradient(u, mu);
        let residual = grad.residual(free.clone());
        stats.residual = residual;
        if !residual.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient at Newton iteration {iteration}"
            )));
        }
        if residual <= tol {
            return Ok(stats);
        }
        let floor = rounding_floor(model, &grad, u, mu);
        if residual <= floor {
            stats.residual_floor = floor;
            return Ok(stats);
        }
        if iteration == settings.newton_max_iter {
            break;
        }

        let (diag, off) = model.hessian(u, mu);
        let mut rhs: Vec<f64> = free.clone().map(|i| -grad.values[i]).collect();
        solve_tridiagonal(&diag[free.clone()], &off[free.start..free.end - 1], &mut rhs)?;
        dir.iter_mut().for_each(|d| *d = 0.0);
        dir[free.clone()].copy_from_slice(&rhs);

        let slope: f64 = free.clone().map(|i| grad.values[i] * dir[i]).sum();
        if !(slope < 0.0) {
            return Err(Error::LineSearchFailed {
                iteration,
                residual,
                mu,
            });
        }

        let mut alpha = max_feasible_step(model, u, &dir).min(1.0);
        let mut accepted = None;
        let mut unresolved = false;
        let mut trial = u.to_vec();
        for _ in 0..MAX_BACKTRACK {
            let (change, spread) = model.change(u, &dir, alpha, mu);
            let noise = ENERGY_NOISE * spread;
            if change.is_finite() && change <= ARMIJO * alpha * slope {
                accepted = Some(change);
                break;
            }
            if change.is_finite() && -alpha * slope <= noise {
                // below energy resolution: fall back to residual decrease
                for i in free.clone() {
                    trial[i] = u[i] + alpha * dir[i];
                }
                if model.gradient(&trial, mu).residual(free.clone()) < residual {
                    accepted = Some(change);
                    unresolved = true;
                    break;
                }
            }
            alpha *= settings.line_search_shrink;
        }
        let Some(change) = accepted else {
            if !strict && residual <= 1e3 * tol {
                return Ok(stats);
            }
            return Err(Error::LineSearchFailed {
                iteration,
                residual,
                mu,
            });
        };

        for i in free.clone() {
            u[i] += alpha * dir[i];
        }
        stats.iterations += 1;
        if unresolved {
            stats.unresolved_steps += 1;
        } else {
            stats.max_accepted_change = stats.max_accepted_change.max(change);
            if !(change < 0.0) {
                stats.descent_violations += 1;
            }
        }
    }
    Err(Error::NewtonNotConverged {
        iterations: stats.iterations,
        residual: stats.residual,
        mu,
        last_iterate: u.to_vec(),
    })
}

/// Largest step keeping every weighted midpoint above `-ε`, scaled back by a
/// fraction-to-boundary factor.
fn max_feasible_step(model: &EnergyModel<'_>, u: &[f64], dir: &[f64]) -> f64 {
    use crate::energy::Load;
    let Load::Singular { weight, eps, .. } = &model.load else {
        return f64::INFINITY;
    };
    let mut alpha = f64::INFINITY;
    for e in 0..weight.len() {
        if weight[e] == 0.0 {
            continue;
        }
        let ds = 0.5 * (dir[e] + dir[e + 1]);
        if ds < 0.0 {
            let room = 0.5 * (u[e] + u[e + 1]) + eps;
            alpha = alpha.min(room / -ds);
        }
    }
    if alpha.is_finite() {
        0.95 * alpha
    } else {
        alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let diag = [4.0, 5.0, 6.0, 3.0];
        let off = [1.0, -2.0, 0.5];
        let x = [1.0, -1.0, 2.0, 0.25];
        let mut rhs = vec![0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x[i];
            if i > 0 {
                rhs[i] += off[i - 1] * x[i - 1];
            }
            if i < 3 {
                rhs[i] += off[i] * x[i + 1];
            }
        }
        solve_tridiagonal(&diag, &off, &mut rhs).unwrap();
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_system_rejected() {
        let mut rhs = vec![1.0, 1.0];
        assert!(solve_tridiagonal(&[1.0, 1.0], &[2.0], &mut rhs).is_err());
    }
}
