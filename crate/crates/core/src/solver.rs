//! Auxiliary solves, the fixed-point loop for the regularized problem, the
//! ε-continuation and the direct minimization of the sublinear regime.
//!
//! The fixed point `u = S(u)` of the auxiliary map is the stationary point
//! of the strictly convex energy
//! `(1/p)∫|u'|^p + (1/q)∫|u'|^q - ∫ f_ε Φ_ε(u)`, so the default strategy
//! minimizes that energy by Newton and then applies `S` until the sup-norm
//! change falls below `picard_tol`. Plain fixed-point iteration is available
//! as [`FixedPointStrategy::Relaxed`]; `S` is order-reversing, so undamped
//! iterates alternate around the fixed point instead of increasing to it.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::barriers::lower_barrier_field;
use crate::energy::{dirichlet_energy, potential_energy, EnergyModel, Load};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::Mesh;
use crate::newton::{minimize, minimize_warm, NewtonStats};
use crate::weights::{ProblemSpec, Regime};

/// How [`picard_solve`] reaches the fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FixedPointStrategy {
    /// Newton on the convex energy, then `S` until stationary.
    #[default]
    Newton,
    /// `w ← (1-θ)w + θ S(w)` from the initial field.
    Relaxed { theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub mu_schedule: Vec<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub line_search_shrink: f64,
    pub fixed_point: FixedPointStrategy,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            mu_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            newton_tol: 1e-10,
            newton_max_iter: 200,
            picard_tol: 1e-9,
            picard_max_iter: 100,
            line_search_shrink: 0.5,
            fixed_point: FixedPointStrategy::Newton,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSettings(msg));
        if self.mu_schedule.is_empty() {
            return bad("μ-schedule is empty".into());
        }
        if self.mu_schedule.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("μ-schedule entries must be positive".into());
        }
        if self.mu_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("μ-schedule must be strictly decreasing".into());
        }
        if *self.mu_schedule.last().unwrap() > 1e-8 {
            return bad("the last μ must be at most 1e-8".into());
        }
        if !(self.newton_tol > 0.0 && self.picard_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.newton_max_iter == 0 || self.picard_max_iter == 0 {
            return bad("iteration limits must be positive".into());
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return bad("line-search shrink must lie in (0, 1)".into());
        }
        if let FixedPointStrategy::Relaxed { theta } = self.fixed_point {
            if !(theta > 0.0 && theta <= 1.0) {
                return bad(format!("relaxation θ must lie in (0, 1], got {theta}"));
            }
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidProblem(format!("ε must be positive, got {eps}")));
    }
    Ok(())
}

/// `f_ε` at each element midpoint.
pub fn element_weights(mesh: &Mesh, spec: &ProblemSpec, eps: f64) -> Result<Vec<f64>> {
    mesh.midpoint_distances()
        .iter()
        .map(|&d| spec.f_eps_at_distance(d, eps))
        .collect()
}

fn dirichlet_start(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    for (i, x) in u.iter_mut().enumerate() {
        if mesh.is_boundary_node(i) {
            *x = 0.0;
        }
    }
    u
}

fn finish(mut u: Vec<f64>, mesh: &Mesh) -> Vec<f64> {
    for (i, x) in u.iter_mut().enumerate() {
        if mesh.is_boundary_node(i) || *x < 0.0 {
            *x = 0.0;
        }
    }
    u
}

fn require_converged(stats: &NewtonStats, u: &[f64], settings: &SolverSettings) -> Result<()> {
    if !stats.converged(settings.newton_tol) {
        return Err(Error::NewtonNotConverged {
            iterations: stats.iterations,
            residual: stats.true_residual,
            mu: 0.0,
            last_iterate: u.to_vec(),
        });
    }
    Ok(())
}

/// Minimizes `(1/p)∫|w'|^p + (1/q)∫|w'|^q - ∫ s w` for a source `s` that is
/// constant on each element.
pub fn solve_with_source(
    mesh: &Arc<Mesh>,
    p: f64,
    q: f64,
    source: &[f64],
    settings: &SolverSettings,
) -> Result<(DiscreteField, NewtonStats)> {
    settings.validate()?;
    if source.len() != mesh.element_count() {
        return Err(Error::InvalidProblem(format!(
            "source has {} entries for {} elements",
            source.len(),
            mesh.element_count()
        )));
    }
    if source.iter().any(|s| !s.is_finite()) {
        return Err(Error::Divergence("non-finite auxiliary source".into()));
    }
    let mut u = vec![0.0; mesh.node_count()];
    if source.iter().all(|&s| s == 0.0) {
        return Ok((DiscreteField::new(mesh.clone(), u)?, NewtonStats::default()));
    }
    let model = EnergyModel {
        mesh,
        p,
        q,
        load: Load::Linear(source.to_vec()),
    };
    let stats = minimize(&model, &mut u, settings)?;
    require_converged(&stats, &u, settings)?;
    Ok((DiscreteField::new(mesh.clone(), u)?, stats))
}

/// Element source `f_ε (|v| + ε)^{-δ}` at the midpoints of `v`.
fn auxiliary_source(v: &DiscreteField, weights: &[f64], eps: f64, delta: f64) -> Vec<f64> {
    v.midpoint_values()
        .iter()
        .zip(weights)
        .map(|(s, &f)| if f == 0.0 { 0.0 } else { f * (s.abs() + eps).powf(-delta) })
        .collect()
}

/// One application of the auxiliary map `S`: the minimizer of
/// `(1/p)∫|w'|^p + (1/q)∫|w'|^q - ∫ f_ε (|v|+ε)^{-δ} w`.
pub fn solve_auxiliary(
    v: &DiscreteField,
    eps: f64,
    spec: &ProblemSpec,
    settings: &SolverSettings,
) -> Result<DiscreteField> {
    check_eps(eps)?;
    let mesh = v.mesh();
    let weights = element_weights(mesh, spec, eps)?;
    let source = auxiliary_source(v, &weights, eps, spec.delta);
    let (w, _) = solve_with_source(mesh, spec.p, spec.q, &source, settings)?;
    let values = finish(w.into_values(), mesh);
    DiscreteField::new(mesh.clone(), values)
}

/// `S(v)` warm-started from `start`.
fn apply_map(
    v: &[f64],
    start: &[f64],
    mesh: &Arc<Mesh>,
    weights: &[f64],
    eps: f64,
    spec: &ProblemSpec,
    settings: &SolverSettings,
) -> Result<(Vec<f64>, NewtonStats)> {
    let field = DiscreteField::new(mesh.clone(), v.to_vec())?;
    let source = auxiliary_source(&field, weights, eps, spec.delta);
    let model = EnergyModel {
        mesh,
        p: spec.p,
        q: spec.q,
        load: Load::Linear(source),
    };
    let mut w = start.to_vec();
    let stats = minimize_warm(&model, &mut w, settings)?;
    require_converged(&stats, &w, settings)?;
    Ok((finish(w, mesh), stats))
}

fn sup_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub field: DiscreteField,
    /// Applications of the auxiliary map.
    pub picard_iterations: usize,
    pub newton_iterations: usize,
    /// `‖S(u) - u‖_∞` at return.
    pub fixed_point_residual: f64,
    /// Value of the regularized energy at the returned field.
    pub energy: f64,
    /// Accepted Newton steps that failed to decrease the energy.
    pub descent_violations: usize,
}

/// Solves the regularized problem `-Δ_p u - Δ_q u = f_ε (u + ε)^{-δ}`.
pub fn picard_solve(
    eps: f64,
    spec: &ProblemSpec,
    settings: &SolverSettings,
    init: &DiscreteField,
) -> Result<PicardOutcome> {
    check_eps(eps)?;
    settings.validate()?;
    spec.eps_exponent()?;
    let mesh = init.mesh().clone();
    let weights = element_weights(&mesh, spec, eps)?;
    let mut u = dirichlet_start(&mesh, init.values());
    let mut newton_iterations = 0;
    let mut descent_violations = 0;

    if weights.iter().all(|&f| f == 0.0) {
        let field = DiscreteField::zeros(mesh);
        let energy = regularized_energy(&field, eps, spec)?;
        return Ok(PicardOutcome {
            field,
            picard_iterations: 0,
            newton_iterations: 0,
            fixed_point_residual: 0.0,
            energy,
            descent_violations: 0,
        });
    }

    let theta = match settings.fixed_point {
        FixedPointStrategy::Newton => {
            let model = EnergyModel {
                mesh: &mesh,
                p: spec.p,
                q: spec.q,
                load: Load::Singular {
                    weight: weights.clone(),
                    eps,
                    delta: spec.delta,
                },
            };
            let stats = minimize(&model, &mut u, settings)?;
            require_converged(&stats, &u, settings)?;
            newton_iterations += stats.iterations;
            descent_violations += stats.descent_violations;
            u = finish(u, &mesh);
            1.0
        }
        FixedPointStrategy::Relaxed { theta } => theta,
    };

    let mut previous = u.clone();
    let mut last_change = f64::INFINITY;
    for k in 1..=settings.picard_max_iter {
        let (s, stats) = apply_map(&u, &u, &mesh, &weights, eps, spec, settings)?;
        newton_iterations += stats.iterations;
        descent_violations += stats.descent_violations;
        let change = sup_change(&s, &u);
        last_change = change;
        if change <= settings.picard_tol {
            let field = DiscreteField::new(mesh.clone(), s)?;
            let energy = regularized_energy(&field, eps, spec)?;
            return Ok(PicardOutcome {
                field,
                picard_iterations: k,
                newton_iterations,
                fixed_point_residual: change,
                energy,
                descent_violations,
            });
        }
        previous = u.clone();
        u = u
            .iter()
            .zip(&s)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
    }
    Err(Error::PicardNotConverged {
        iterations: settings.picard_max_iter,
        last_change,
        previous,
        last: u,
    })
}

/// `(1/p)∫|u'|^p + (1/q)∫|u'|^q - ∫ f_ε Φ_ε(u)`.
pub fn regularized_energy(u: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<f64> {
    Ok(dirichlet_energy(u, spec.p, 0.0) + dirichlet_energy(u, spec.q, 0.0)
        - potential_energy(u, eps, spec)?)
}

/// `I(u) = (1/p)∫|u'|^p + (1/q)∫|u'|^q - (1/(1-δ))∫ f u^{1-δ}`.
pub fn direct_energy(u: &DiscreteField, spec: &ProblemSpec) -> Result<f64> {
    regularized_energy(u, 0.0, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRecord {
    pub eps: f64,
    #[serde(skip)]
    pub field: Option<DiscreteField>,
    pub picard_iterations: usize,
    pub newton_iterations: usize,
    pub energy: f64,
    pub fixed_point_residual: f64,
    /// Smallest `u_{ε_k} - u_{ε_{k-1}}` over the nodes; absent for `k = 0`.
    pub min_increment: Option<f64>,
    /// `‖u_{ε_k} - u_{ε_{k-1}}‖_∞`; absent for `k = 0`.
    pub sup_increment: Option<f64>,
    pub restarted: bool,
    pub wall_time_s: f64,
}

impl ContinuationRecord {
    pub fn field(&self) -> &DiscreteField {
        self.field.as_ref().expect("continuation records carry their field")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub records: Vec<ContinuationRecord>,
    /// Whether `u_ε` was required to increase as `ε` decreases.
    pub monotone_mode: bool,
}

impl ContinuationTrace {
    pub fn last(&self) -> &ContinuationRecord {
        self.records.last().expect("a trace has at least one record")
    }

    pub fn eps_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }
}

/// Solves the regularized problem for `ε_k = ε₀ ratio^k`, `k = 0..=steps`,
/// warm-starting each solve from the previous field.
///
/// For `β < p` the fields must increase as `ε` decreases; a violation beyond
/// `picard_tol` triggers one restart from the lower barrier and then fails.
/// For `β > p` the same march runs without that check.
pub fn continuation(
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    settings: &SolverSettings,
    eps0: f64,
    ratio: f64,
    steps: usize,
) -> Result<ContinuationTrace> {
    check_eps(eps0)?;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidProblem(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    spec.eps_exponent()?;
    let monotone_mode = spec.beta < spec.p;
    let mut records: Vec<ContinuationRecord> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let eps = eps0 * ratio.powi(k as i32);
        let started = Instant::now();
        let barrier = || initial_field(spec, mesh, eps);
        let init = match records.last() {
            Some(prev) => prev.field().clone(),
            None => barrier(),
        };
        let mut outcome = picard_solve(eps, spec, settings, &init)?;
        let mut restarted = false;
        let mut increments = None;
        if let Some(prev) = records.last() {
            let prev = prev.field();
            let mut min_inc = -prev.max_excess_over(&outcome.field);
            if monotone_mode && min_inc < -settings.picard_tol {
                outcome = picard_solve(eps, spec, settings, &barrier())?;
                restarted = true;
                min_inc = -prev.max_excess_over(&outcome.field);
                if min_inc < -settings.picard_tol {
                    return Err(Error::MonotonicityViolation {
                        eps,
                        violation: -min_inc,
                    });
                }
            }
            increments = Some((min_inc, outcome.field.sup_distance(prev)));
        }
        records.push(ContinuationRecord {
            eps,
            picard_iterations: outcome.picard_iterations,
            newton_iterations: outcome.newton_iterations,
            energy: outcome.energy,
            fixed_point_residual: outcome.fixed_point_residual,
            min_increment: increments.map(|i| i.0),
            sup_increment: increments.map(|i| i.1),
            restarted,
            wall_time_s: started.elapsed().as_secs_f64(),
            field: Some(outcome.field),
        });
    }
    Ok(ContinuationTrace {
        records,
        monotone_mode,
    })
}

/// Regime-appropriate lower-barrier start with a small amplitude.
pub fn initial_field(spec: &ProblemSpec, mesh: &Arc<Mesh>, eps: f64) -> DiscreteField {
    lower_barrier_field(spec, mesh, eps, 0.1)
}

#[derive(Debug, Clone)]
pub struct DirectOutcome {
    pub field: DiscreteField,
    pub newton_iterations: usize,
    pub energy: f64,
    /// Smallest energy among the barrier-profile trial fields.
    pub certificate_energy: f64,
}

/// Minimizes `I(u)` directly in the sublinear regime `β + δ < 1`.
///
/// With `δ < 1` the load `-(1/(1-δ))∫ f u^{1-δ}` is convex on positive
/// fields, so Newton runs on `I` itself, keeping every weighted midpoint
/// positive.
pub fn solve_direct(spec: &ProblemSpec, mesh: &Arc<Mesh>, settings: &SolverSettings) -> Result<DirectOutcome> {
    settings.validate()?;
    if spec.regime() != Regime::Sublinear {
        return Err(Error::RegimeMismatch(format!(
            "direct minimization needs β + δ < 1, got {}",
            spec.beta + spec.delta
        )));
    }
    let weights = element_weights(mesh, spec, 0.0)?;
    if weights.iter().all(|&f| f == 0.0) {
        let field = DiscreteField::zeros(mesh.clone());
        return Ok(DirectOutcome {
            field,
            newton_iterations: 0,
            energy: 0.0,
            certificate_energy: 0.0,
        });
    }
    let model = EnergyModel {
        mesh,
        p: spec.p,
        q: spec.q,
        load: Load::Singular {
            weight: weights,
            eps: 0.0,
            delta: spec.delta,
        },
    };
    let mut u = initial_field(spec, mesh, 0.0).into_values();
    let stats = minimize(&model, &mut u, settings)?;
    require_converged(&stats, &u, settings)?;
    let field = DiscreteField::new(mesh.clone(), finish(u, mesh))?;
    let energy = direct_energy(&field, spec)?;

    let mut certificate_energy = f64::INFINITY;
    for &eta in &[0.05, 0.1, 0.2, 0.4, 0.8] {
        let trial = lower_barrier_field(spec, mesh, 0.0, eta);
        certificate_energy = certificate_energy.min(direct_energy(&trial, spec)?);
    }
    if energy > certificate_energy {
        return Err(Error::Divergence(format!(
            "direct minimizer energy {energy} exceeds a barrier trial energy {certificate_energy}"
        )));
    }
    Ok(DirectOutcome {
        field,
        newton_iterations: stats.iterations,
        energy,
        certificate_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    fn mesh(len: f64, n: usize, grading: f64) -> Arc<Mesh> {
        Arc::new(build_mesh(Domain::interval(len).unwrap(), n, grading).unwrap())
    }

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let mut s = SolverSettings::default();
        s.mu_schedule = vec![1e-2, 1e-2, 1e-9];
        assert!(s.validate().is_err());
        let mut s = SolverSettings::default();
        s.mu_schedule = vec![1e-2, 1e-6];
        assert!(s.validate().is_err());
        let mut s = SolverSettings::default();
        s.line_search_shrink = 1.0;
        assert!(s.validate().is_err());
        let mut s = SolverSettings::default();
        s.fixed_point = FixedPointStrategy::Relaxed { theta: 0.0 };
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_source_gives_zero() {
        let m = mesh(1.0, 16, 1.0);
        let (w, _) = solve_with_source(&m, 3.0, 2.0, &vec![0.0; 16], &SolverSettings::default()).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_case_matches_parabola() {
        // minimizer of ∫|w'|² - ∫w on (-1,1): w = (1 - x²)/4
        let mut prev = f64::INFINITY;
        for &n in &[8, 32, 128] {
            let m = mesh(2.0, n, 1.0);
            let (w, _) = solve_with_source(&m, 2.0, 2.0, &vec![1.0; n], &SolverSettings::default()).unwrap();
            let err = m
                .nodes()
                .iter()
                .zip(w.values())
                .map(|(x, v)| (v - (1.0 - (x - 1.0).powi(2)) / 4.0).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9 || err < prev);
            prev = err;
        }
    }

    #[test]
    fn auxiliary_zero_weight_gives_zero() {
        let m = mesh(1.0, 16, 1.0);
        let spec = ProblemSpec::new(2.0, 1.5, 1.0, 0.0, 0.0, *m.domain()).unwrap();
        let v = DiscreteField::from_fn(m, |_, d| d);
        let w = solve_auxiliary(&v, 0.1, &spec, &SolverSettings::default()).unwrap();
        assert!(w.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn picard_large_eps_settles_quickly() {
        let m = mesh(1.0, 64, 1.0);
        let spec = ProblemSpec::new(2.0, 1.5, 1.0, 0.0, 1.0, *m.domain()).unwrap();
        let init = initial_field(&spec, &m, 1e3);
        let settings = SolverSettings {
            fixed_point: FixedPointStrategy::Relaxed { theta: 1.0 },
            ..SolverSettings::default()
        };
        let out = picard_solve(1e3, &spec, &settings, &init).unwrap();
        assert!(out.picard_iterations <= 3, "{} iterations", out.picard_iterations);
    }

    #[test]
    fn picard_fixed_point_and_symmetry() {
        let m = mesh(1.0, 128, 2.0);
        let spec = ProblemSpec::new(2.0, 1.5, 0.5, 0.0, 1.0, *m.domain()).unwrap();
        let settings = SolverSettings::default();
        let out = picard_solve(1e-4, &spec, &settings, &initial_field(&spec, &m, 1e-4)).unwrap();
        let u = out.field.values();
        let n = u.len() - 1;
        for i in 0..=n {
            assert!((u[i] - u[n - i]).abs() <= 1e-8);
        }
        let again = solve_auxiliary(&out.field, 1e-4, &spec, &settings).unwrap();
        assert!(again.sup_distance(&out.field) <= settings.picard_tol);
        assert!(out.field.satisfies_dirichlet());
        assert!(out.field.is_nonnegative());
        assert_eq!(out.descent_violations, 0);
    }

    #[test]
    fn relaxed_strategy_agrees_with_newton() {
        let m = mesh(1.0, 64, 1.0);
        let spec = ProblemSpec::new(2.0, 1.5, 0.5, 0.3, 1.0, *m.domain()).unwrap();
        let init = initial_field(&spec, &m, 1e-2);
        let a = picard_solve(1e-2, &spec, &SolverSettings::default(), &init).unwrap();
        let relaxed = SolverSettings {
            fixed_point: FixedPointStrategy::Relaxed { theta: 0.5 },
            ..SolverSettings::default()
        };
        let b = picard_solve(1e-2, &spec, &relaxed, &init).unwrap();
        assert!(a.field.sup_distance(&b.field) < 1e-8);
    }

    #[test]
    fn continuation_single_entry() {
        let m = mesh(1.0, 32, 1.0);
        let spec = ProblemSpec::new(3.0, 2.0, 1.0, 1.0, 1.0, *m.domain()).unwrap();
        let trace = continuation(&spec, &m, &SolverSettings::default(), 1e-2, 0.1, 0).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].eps, 1e-2);
    }

    #[test]
    fn continuation_fields_increase() {
        let m = mesh(1.0, 128, 2.0);
        let spec = ProblemSpec::new(3.0, 2.0, 1.0, 1.0, 1.0, *m.domain()).unwrap();
        let settings = SolverSettings::default();
        let trace = continuation(&spec, &m, &settings, 1e-2, 0.1, 4).unwrap();
        assert_eq!(trace.records.len(), 5);
        for w in trace.records.windows(2) {
            assert!(w[1].eps < w[0].eps);
            let (a, b) = (w[0].field(), w[1].field());
            assert!(a.max_excess_over(b) <= settings.picard_tol);
        }
    }

    #[test]
    fn direct_rejects_other_regimes() {
        let m = mesh(1.0, 16, 1.0);
        let spec = ProblemSpec::new(2.0, 1.5, 0.9, 0.2, 1.0, *m.domain()).unwrap();
        assert!(matches!(
            solve_direct(&spec, &m, &SolverSettings::default()),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn direct_zero_weight() {
        let m = mesh(1.0, 16, 1.0);
        let spec = ProblemSpec::new(2.0, 1.5, 0.5, 0.2, 0.0, *m.domain()).unwrap();
        let out = solve_direct(&spec, &m, &SolverSettings::default()).unwrap();
        assert!(out.field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn direct_symmetric_and_certified() {
        let m = mesh(1.0, 128, 2.0);
        let spec = ProblemSpec::new(2.0, 1.5, 0.5, 0.2, 1.0, *m.domain()).unwrap();
        let out = solve_direct(&spec, &m, &SolverSettings::default()).unwrap();
        let u = out.field.values();
        let n = u.len() - 1;
        for i in 0..=n {
            assert!((u[i] - u[n - i]).abs() <= 1e-9);
        }
        assert!(out.energy <= out.certificate_energy);
    }
}
