//! The twelve acceptance criteria as library functions with pinned
//! parameters, shared by `verify-all` and the `acceptance` test target.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::barriers::{theta_scaling_check, theta_scaling_exponents, theta_shoot, torsion_oracle, BarrierParams};
use crate::diagnostics::{
    barrier_sandwich, comparison_check, fit_boundary_exponent, fit_log_regime, nonexistence_probe,
    solve_regularized, sobolev_batch, FitWindow, RefinementPlan, SobolevVerdict,
};
use crate::error::Result;
use crate::field::DiscreteField;
use crate::mesh::{build_mesh, Domain, Mesh};
use crate::solver::{continuation, initial_field, picard_solve, solve_with_source, SolverSettings};
use crate::weights::ProblemSpec;

/// Criterion identifiers in run order.
pub const CRITERIA: [u8; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

/// Mesh shared by the boundary-fit criteria.
pub const FIT_NODES: usize = 2048;
pub const FIT_GRADING: f64 = 3.0;
pub const FIT_EPS: f64 = 1e-6;
/// Levels and regularization for the `β = 0` membership flip. A strong
/// grading keeps the smallest element far below the boundary layer of
/// `δ ≈ 3`, and `ε` sits well below the smallest element.
pub const MEMBERSHIP_LEVELS: [usize; 4] = [128, 256, 512, 1024];
pub const MEMBERSHIP_GRADING: f64 = 8.0;
pub const MEMBERSHIP_EPS: f64 = 1e-12;
/// Seed of the random source pairs.
pub const COMPARISON_SEED: u64 = 0x5eed_c0de;
pub const COMPARISON_PAIRS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub summary: String,
    pub data: Value,
    pub wall_time_s: f64,
    pub time_limit_s: Option<f64>,
}

impl CriterionOutcome {
    /// One line: `PASS 01 title: summary (wall time)`.
    pub fn line(&self) -> String {
        format!(
            "{} {:02} {}: {} ({:.2} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.summary,
            self.wall_time_s
        )
    }
}

struct Verdict {
    pass: bool,
    summary: String,
    data: Value,
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "torsion oracle exactness",
        2 => "boundary regime β+δ>1",
        3 => "boundary regime β+δ<1",
        4 => "boundary regime β+δ=1",
        5 => "Sobolev threshold",
        6 => "membership criterion cross-check",
        7 => "monotonicity in ε",
        8 => "comparison principle",
        9 => "barrier sandwich stability",
        10 => "Θ scaling law",
        11 => "non-existence signature",
        12 => "invariant suites",
        _ => "unknown criterion",
    }
}

fn time_limit(id: u8) -> Option<f64> {
    match id {
        1 => Some(30.0),
        2..=4 => Some(120.0),
        5 | 6 => Some(600.0),
        11 => Some(900.0),
        12 => Some(300.0),
        _ => None,
    }
}

/// Runs one criterion. Solver errors count as failures.
pub fn run_criterion(id: u8, settings: &SolverSettings) -> CriterionOutcome {
    let started = Instant::now();
    let result = match id {
        1 => torsion_exactness(settings),
        2 => power_regime(settings),
        3 => linear_regime(settings),
        4 => log_regime(settings),
        5 => sobolev_threshold(settings),
        6 => membership_flip(settings),
        7 => eps_monotonicity(settings),
        8 => comparison(settings),
        9 => sandwich_stability(settings),
        10 => theta_scaling(),
        11 => nonexistence(settings),
        12 => invariants(settings),
        _ => Err(crate::Error::Config(format!("unknown criterion {id}"))),
    };
    let wall_time_s = started.elapsed().as_secs_f64();
    let time_limit_s = time_limit(id);
    let mut verdict = result.unwrap_or_else(|e| Verdict {
        pass: false,
        summary: format!("error: {e}"),
        data: json!({ "error": e.to_string() }),
    });
    if let Some(limit) = time_limit_s {
        if wall_time_s > limit {
            verdict.pass = false;
            verdict.summary.push_str(&format!("; over the {limit} s budget"));
        }
    }
    CriterionOutcome {
        id,
        title: title(id),
        pass: verdict.pass,
        summary: verdict.summary,
        data: verdict.data,
        wall_time_s,
        time_limit_s,
    }
}

/// Runs every criterion in order.
pub fn run_all(settings: &SolverSettings) -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|&id| run_criterion(id, settings)).collect()
}

fn unit_spec(p: f64, q: f64, delta: f64, beta: f64) -> Result<ProblemSpec> {
    ProblemSpec::new(p, q, delta, beta, 1.0, Domain::interval(1.0)?)
}

fn fit_mesh() -> Result<Arc<Mesh>> {
    Ok(Arc::new(build_mesh(Domain::interval(1.0)?, FIT_NODES, FIT_GRADING)?))
}

fn torsion_exactness(settings: &SolverSettings) -> Result<Verdict> {
    // (-1, 1) shifted to (0, 2); 1024 elements give 1025 nodes
    let domain = Domain::interval(2.0)?;
    let mesh = Arc::new(build_mesh(domain, 1024, 1.0)?);
    let source = vec![1.0; mesh.element_count()];
    let (u, _) = solve_with_source(&mesh, 2.0, 2.0, &source, settings)?;
    let exact = DiscreteField::from_fn(mesh.clone(), |x, _| (1.0 - (x - 1.0).powi(2)) / 4.0);
    let linear_err = u.sup_distance(&exact);
    let linear_tol = 1e-3 * 0.25;

    let spec = ProblemSpec::new(3.0, 2.0, 1.0, 1.0, 1.0, domain)?;
    let (u, _) = solve_with_source(&mesh, 3.0, 2.0, &source, settings)?;
    let oracle = torsion_oracle(1.0, &spec, &mesh)?;
    let err = u.sup_distance(&oracle);
    let tol = 1e-3 * u.sup_norm();
    Ok(Verdict {
        pass: linear_err <= linear_tol && err <= tol,
        summary: format!("p=q=2 error {linear_err:.2e} ≤ {linear_tol:.2e}; p=3,q=2 error {err:.2e} ≤ {tol:.2e}"),
        data: json!({
            "nodes": mesh.node_count(),
            "linear": { "error": linear_err, "tolerance": linear_tol },
            "oracle": { "error": err, "tolerance": tol, "sup": u.sup_norm() },
        }),
    })
}

fn power_regime(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(3.0, 2.0, 1.0, 1.0)?;
    let u = solve_regularized(&spec, &fit_mesh()?, settings, FIT_EPS)?;
    let fit = fit_boundary_exponent(&u, FitWindow::default())?;
    let target = 2.0 / 3.0;
    Ok(Verdict {
        pass: (fit.slope - target).abs() <= 0.05,
        summary: format!("slope {:.4} vs {target:.4} ± 0.05", fit.slope),
        data: json!({ "fit": fit, "target": target, "tau": spec.tau() }),
    })
}

fn linear_regime(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 0.5, 0.2)?;
    let u = solve_regularized(&spec, &fit_mesh()?, settings, FIT_EPS)?;
    let fit = fit_boundary_exponent(&u, FitWindow::default())?;
    Ok(Verdict {
        pass: (fit.slope - 1.0).abs() <= 0.05,
        summary: format!("slope {:.4} vs 1 ± 0.05", fit.slope),
        data: json!({ "fit": fit, "target": 1.0 }),
    })
}

fn log_regime(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 0.6, 0.4)?;
    let u = solve_regularized(&spec, &fit_mesh()?, settings, FIT_EPS)?;
    let log_scale = BarrierParams::for_spec(&spec).log_scale;
    let fit = fit_log_regime(&u, &spec, log_scale, FitWindow::default())?;
    let ratio = fit.band_ratio();
    Ok(Verdict {
        pass: ratio <= 2.0 && fit.drift >= 0.02,
        summary: format!("band ratio {ratio:.4} ≤ 2, power-slope drift {:.4} ≥ 0.02", fit.drift),
        data: json!({ "fit": fit, "band_ratio": ratio, "log_scale": log_scale }),
    })
}

fn sobolev_threshold(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 2.0, 0.5)?;
    let rho0 = spec.sobolev_threshold();
    let plan = RefinementPlan {
        levels: vec![512, 1024, 2048, 4096],
        grading: FIT_GRADING,
        eps: FIT_EPS,
    };
    let probes = sobolev_batch(&spec, settings, &[0.8, 1.2], &plan)?;
    let (below, above) = (&probes[0], &probes[1]);
    Ok(Verdict {
        pass: (rho0 - 1.0).abs() < 1e-12
            && below.verdict == SobolevVerdict::Divergent
            && above.verdict == SobolevVerdict::Bounded,
        summary: format!(
            "ρ₀ = {rho0}; ρ=0.8 {:?} (min ratio {:.3}), ρ=1.2 {:?} (max ratio {:.3})",
            below.verdict,
            min(&below.ratios),
            above.verdict,
            max(&above.ratios)
        ),
        data: json!({ "rho0": rho0, "plan": plan, "probes": probes }),
    })
}

fn membership_flip(settings: &SolverSettings) -> Result<Verdict> {
    let plan = RefinementPlan {
        levels: MEMBERSHIP_LEVELS.to_vec(),
        grading: MEMBERSHIP_GRADING,
        eps: MEMBERSHIP_EPS,
    };
    let mut rows = Vec::new();
    let mut pass = true;
    let mut summary = Vec::new();
    for (delta, expected) in [(2.8, SobolevVerdict::Bounded), (3.2, SobolevVerdict::Divergent)] {
        let spec = unit_spec(2.0, 1.5, delta, 0.0)?;
        let probe = sobolev_batch(&spec, settings, &[1.0], &plan)?.remove(0);
        let predicted = spec.energy_membership();
        pass &= probe.verdict == expected && predicted == (expected == SobolevVerdict::Bounded);
        summary.push(format!(
            "δ={delta} {:?} (ratios {:.3}..{:.3})",
            probe.verdict,
            min(&probe.ratios),
            max(&probe.ratios)
        ));
        rows.push(json!({ "delta": delta, "membership_predicted": predicted, "probe": probe }));
    }
    Ok(Verdict {
        pass,
        summary: summary.join(", "),
        data: json!({ "plan": plan, "rows": rows }),
    })
}

fn eps_monotonicity(settings: &SolverSettings) -> Result<Verdict> {
    let mesh = fit_mesh()?;
    let mut worst = f64::INFINITY;
    let mut rows = Vec::new();
    for (p, q, delta, beta) in [(3.0, 2.0, 1.0, 1.0), (2.0, 1.5, 0.5, 0.2), (2.0, 1.5, 0.6, 0.4)] {
        let spec = unit_spec(p, q, delta, beta)?;
        let trace = continuation(&spec, &mesh, settings, 1e-2, 0.1, 4)?;
        let increments: Vec<f64> = trace.records.iter().filter_map(|r| r.min_increment).collect();
        worst = worst.min(min(&increments));
        rows.push(json!({ "spec": spec, "min_increments": increments }));
    }
    Ok(Verdict {
        pass: worst >= -1e-8,
        summary: format!("smallest nodewise increment {worst:.3e} ≥ -1e-8"),
        data: json!({ "rows": rows, "worst": worst }),
    })
}

fn comparison(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 1.0, 0.5)?;
    let report = comparison_check(&spec, &fit_mesh()?, settings, 1.0, 2.0, FIT_EPS)?;
    Ok(Verdict {
        pass: report.notice.is_none() && report.violation <= 1e-8,
        summary: format!("max(u₁ - u₂) = {:.3e} ≤ 1e-8", report.violation),
        data: serde_json::to_value(&report)?,
    })
}

fn sandwich_stability(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(3.0, 2.0, 1.0, 1.0)?;
    let trace = continuation(&spec, &fit_mesh()?, settings, 1e-2, 0.1, 4)?;
    let mut etas = Vec::new();
    let mut gammas = Vec::new();
    for r in &trace.records {
        let s = barrier_sandwich(r.field(), r.eps, &spec)?;
        etas.push(s.eta);
        gammas.push(s.gamma);
    }
    let spread = |v: &[f64]| max(v) / min(v) - 1.0;
    let (eta_spread, gamma_spread) = (spread(&etas), spread(&gammas));
    Ok(Verdict {
        pass: min(&etas) > 0.0 && max(&gammas).is_finite() && eta_spread < 0.2 && gamma_spread < 0.2,
        summary: format!("η* varies {:.1}%, Γ* varies {:.1}% (< 20%)", 100.0 * eta_spread, 100.0 * gamma_spread),
        data: json!({ "eps": trace.eps_values(), "eta": etas, "gamma": gammas }),
    })
}

fn theta_scaling() -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 0.3, 0.3)?;
    let (alpha, h, r) = (2.0, 1e-5, 0.5);
    let (a, b) = theta_scaling_exponents(&spec);
    let table = theta_shoot(alpha, &spec, r, h)?;
    let unit = theta_shoot(1.0, &spec, 1.1 * alpha.powf(-b) * r, h)?;
    let err = theta_scaling_check(&table, &unit, &spec, &[r])?;
    Ok(Verdict {
        pass: err <= 1e-6,
        summary: format!("relative error {err:.2e} ≤ 1e-6 at r = {r}"),
        data: json!({ "alpha": alpha, "h": h, "r": r, "a": a, "b": b, "error": err }),
    })
}

fn nonexistence(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 1.0, 2.5)?;
    let plan = RefinementPlan {
        levels: vec![256, 512, 1024],
        grading: 1.0,
        eps: FIT_EPS,
    };
    let report = nonexistence_probe(&spec, settings, &fit_mesh()?, FitWindow::default(), &plan, &[1.0, 2.0])?;
    let expected = [0.25, 0.1, 0.05, 0.025];
    let taus_match = report.entries.len() == expected.len()
        && report.entries.iter().zip(expected).all(|(e, t)| {
            (e.tau_expected - t).abs() < 1e-12 && (e.tau_fit - t).abs() <= 0.03
        });
    let growth: Vec<f64> = report
        .entries
        .last()
        .map(|e| e.hardy.iter().flat_map(|s| s.ratios.iter().copied()).collect())
        .unwrap_or_default();
    let hardy_ok = report.hardy_divergent && growth.len() == 4 && min(&growth) >= 1.2;
    let fits: Vec<String> = report.entries.iter().map(|e| format!("{:.3}", e.tau_fit)).collect();
    Ok(Verdict {
        pass: taus_match && hardy_ok && report.failures.is_empty(),
        summary: format!(
            "τ̃ fits [{}] vs [0.25, 0.1, 0.05, 0.025] ± 0.03; smallest Hardy growth {:.3} ≥ 1.2",
            fits.join(", "),
            min(&growth)
        ),
        data: serde_json::to_value(&report)?,
    })
}

fn invariants(settings: &SolverSettings) -> Result<Verdict> {
    let checks = [
        ("weights", weight_invariants()?),
        ("descent", descent_invariant(settings)?),
        ("comparison", source_comparison(settings)?),
        ("exponent_fit", fit_exactness()?),
        ("determinism", determinism(settings)?),
    ];
    let pass = checks.iter().all(|(_, c)| c.pass);
    let summary = checks
        .iter()
        .map(|(name, c)| format!("{name} {}", if c.pass { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join(", ");
    let data = checks
        .into_iter()
        .map(|(name, c)| (name.to_string(), json!({ "pass": c.pass, "detail": c.summary, "data": c.data })))
        .collect::<serde_json::Map<_, _>>();
    Ok(Verdict {
        pass,
        summary,
        data: Value::Object(data),
    })
}

/// `f_ε` grows as `ε` decreases and stays below `f` for `β < p`.
fn weight_invariants() -> Result<Verdict> {
    let eps_levels: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
    let distances: Vec<f64> = (0..=48).map(|k| 0.5 * 10f64.powf(-k as f64 / 4.0)).collect();
    let mut checked = 0usize;
    let mut failures = Vec::new();
    for &(p, q) in &[(2.0, 1.5), (3.0, 2.0), (4.0, 1.2)] {
        for &delta in &[0.3, 1.0, 2.5] {
            for &beta in &[0.0, 0.4, 1.0, 0.5 * p, p - 0.05] {
                for &c_f in &[0.0, 1.0, 2.5] {
                    let spec = ProblemSpec::new(p, q, delta, beta, c_f, Domain::interval(1.0)?)?;
                    for &d in &distances {
                        let f = spec.f_at_distance(d);
                        let mut prev = 0.0;
                        for &eps in &eps_levels {
                            let fe = spec.f_eps_at_distance(d, eps)?;
                            checked += 1;
                            if fe < prev || fe > f * (1.0 + 4.0 * f64::EPSILON) {
                                failures.push(format!("p={p} δ={delta} β={beta} c_f={c_f} d={d} ε={eps}"));
                            }
                            prev = fe;
                        }
                    }
                }
            }
        }
    }
    Ok(Verdict {
        pass: failures.is_empty(),
        summary: format!("{checked} weight evaluations, {} violations", failures.len()),
        data: json!({ "checked": checked, "failures": failures.iter().take(10).collect::<Vec<_>>() }),
    })
}

/// Every accepted Newton step of the regime solves lowers the energy.
fn descent_invariant(settings: &SolverSettings) -> Result<Verdict> {
    let mesh = Arc::new(build_mesh(Domain::interval(1.0)?, 512, FIT_GRADING)?);
    let mut rows = Vec::new();
    let mut violations = 0;
    for (p, q, delta, beta) in [(3.0, 2.0, 1.0, 1.0), (2.0, 1.5, 0.5, 0.2), (2.0, 1.5, 0.6, 0.4), (2.0, 1.5, 2.0, 0.5)] {
        let spec = unit_spec(p, q, delta, beta)?;
        let out = picard_solve(FIT_EPS, &spec, settings, &initial_field(&spec, &mesh, FIT_EPS))?;
        violations += out.descent_violations;
        rows.push(json!({
            "spec": spec,
            "newton_iterations": out.newton_iterations,
            "descent_violations": out.descent_violations,
        }));
    }
    Ok(Verdict {
        pass: violations == 0,
        summary: format!("{violations} non-descending accepted steps"),
        data: json!({ "rows": rows }),
    })
}

/// Ordered random sources give ordered auxiliary solutions.
fn source_comparison(settings: &SolverSettings) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(COMPARISON_SEED);
    let mesh = Arc::new(build_mesh(Domain::interval(1.0)?, 256, 2.0)?);
    let n = mesh.element_count();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut descent_violations = 0;
    for _ in 0..COMPARISON_PAIRS {
        let p = rng.random_range(1.5..4.0);
        let q = rng.random_range(1.1..p);
        let low: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let high: Vec<f64> = low
            .iter()
            .map(|s| if rng.random_bool(0.5) { s + rng.random_range(0.0..1.0) } else { *s })
            .collect();
        let (w1, s1) = solve_with_source(&mesh, p, q, &low, settings)?;
        let (w2, s2) = solve_with_source(&mesh, p, q, &high, settings)?;
        descent_violations += s1.descent_violations + s2.descent_violations;
        let excess = w1.max_excess_over(&w2);
        worst = worst.max(excess);
        if excess > settings.newton_tol {
            violations += 1;
        }
    }
    Ok(Verdict {
        pass: violations == 0 && descent_violations == 0,
        summary: format!("{COMPARISON_PAIRS} pairs, max(w₁ - w₂) = {worst:.2e}, {violations} violations"),
        data: json!({ "pairs": COMPARISON_PAIRS, "worst": worst, "violations": violations, "descent_violations": descent_violations }),
    })
}

/// Exact powers `c d^s` are recovered to rounding.
fn fit_exactness() -> Result<Verdict> {
    let mesh = fit_mesh()?;
    let mut worst = 0.0f64;
    for k in 1..=20 {
        let s = 0.1 * k as f64;
        for c in [0.5, 1.0, 3.0] {
            let u = DiscreteField::from_fn(mesh.clone(), |_, d| c * d.powf(s));
            let fit = fit_boundary_exponent(&u, FitWindow::default())?;
            worst = worst.max((fit.slope - s).abs()).max((fit.intercept - c.ln()).abs());
        }
    }
    Ok(Verdict {
        pass: worst <= 1e-10,
        summary: format!("largest slope or intercept error {worst:.2e}"),
        data: json!({ "worst": worst }),
    })
}

/// SHA-256 of the little-endian bytes of a field.
pub fn field_hash(u: &DiscreteField) -> String {
    let mut hasher = Sha256::new();
    for v in u.values() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Repeated solves, including a parallel batch, give identical bits.
fn determinism(settings: &SolverSettings) -> Result<Verdict> {
    let spec = unit_spec(2.0, 1.5, 2.0, 0.5)?;
    let mesh = Arc::new(build_mesh(Domain::interval(1.0)?, 512, FIT_GRADING)?);
    let first = field_hash(&solve_regularized(&spec, &mesh, settings, FIT_EPS)?);
    let second = field_hash(&solve_regularized(&spec, &mesh, settings, FIT_EPS)?);
    let plan = RefinementPlan {
        levels: vec![128, 256, 512],
        grading: FIT_GRADING,
        eps: FIT_EPS,
    };
    let a = serde_json::to_string(&sobolev_batch(&spec, settings, &[0.8, 1.2], &plan)?)?;
    let b = serde_json::to_string(&sobolev_batch(&spec, settings, &[0.8, 1.2], &plan)?)?;
    Ok(Verdict {
        pass: first == second && a == b,
        summary: format!("field hash {}", &first[..16]),
        data: json!({ "hashes": [first, second], "batch_identical": a == b }),
    })
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
