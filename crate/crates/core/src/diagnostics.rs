//! Quantitative verdicts on solved fields: boundary-exponent fits, the
//! logarithmic band, Sobolev-energy probes, barrier sandwiches, comparison
//! checks and the non-existence probe.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{unit_profile, BarrierParams};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::{build_mesh, DomainKind, Mesh};
use crate::solver::{continuation, initial_field, picard_solve, SolverSettings};
use crate::weights::{ProblemSpec, Regime};

/// Fewest window nodes accepted per fitted side.
pub const MIN_FIT_NODES: usize = 8;
/// Growth ratio at or below which a Sobolev energy counts as bounded.
pub const BOUNDED_RATIO: f64 = 1.1;
/// Growth ratio at or above which a Sobolev energy counts as divergent.
pub const DIVERGENT_RATIO: f64 = 1.2;
/// Largest accepted `max/min` of the logarithmic ratio band.
pub const LOG_BAND_LIMIT: f64 = 2.0;
/// Per-refinement Hardy growth that signals divergence.
pub const HARDY_GROWTH: f64 = 1.2;

/// Distance window `[d_min, d_max]` for boundary fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            d_min: 1e-4,
            d_max: 1e-2,
        }
    }
}

impl FitWindow {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_min < d_max) {
            return Err(Error::FitRejected(format!(
                "window [{d_min}, {d_max}] must satisfy 0 < d_min < d_max"
            )));
        }
        Ok(FitWindow { d_min, d_max })
    }

    fn contains(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }

    /// The two log-halves `[d_min, √(d_min d_max)]` and `[√(d_min d_max), d_max]`.
    pub fn halves(&self) -> (FitWindow, FitWindow) {
        let mid = (self.d_min * self.d_max).sqrt();
        (
            FitWindow {
                d_min: self.d_min,
                d_max: mid,
            },
            FitWindow {
                d_min: mid,
                d_max: self.d_max,
            },
        )
    }
}

/// Least-squares line through `(log d, log u)` on one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|log u - line|` over the fitted nodes.
    pub residual: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub window: FitWindow,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub node_count: usize,
    /// Difference of the two side slopes on an interval.
    pub asymmetry: Option<f64>,
    pub sides: Vec<LineFit>,
}

fn line_fit(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    LineFit {
        slope,
        intercept,
        residual,
        nodes: points.len(),
    }
}

/// Node indices of each boundary side whose distance lies in the window.
fn window_sides(mesh: &Mesh, window: &FitWindow) -> Vec<Vec<usize>> {
    let inside = |i: &usize| window.contains(mesh.distances()[*i]);
    match mesh.domain().kind() {
        DomainKind::Interval => {
            let half = mesh.element_count() / 2;
            vec![
                (0..=half).filter(inside).collect(),
                (half..mesh.node_count()).filter(inside).collect(),
            ]
        }
        DomainKind::RadialBall => vec![(0..mesh.node_count()).filter(inside).collect()],
    }
}

fn check_window(mesh: &Mesh, window: &FitWindow) -> Result<()> {
    let quarter = 0.25 * mesh.domain().extent();
    if window.d_max > quarter {
        return Err(Error::FitRejected(format!(
            "window top {} exceeds a quarter of the domain extent ({quarter})",
            window.d_max
        )));
    }
    Ok(())
}

/// Fits `log u ≈ slope·log d + intercept` near the boundary.
///
/// On an interval each side is fitted separately and the slopes and
/// intercepts are averaged.
pub fn fit_boundary_exponent(u: &DiscreteField, window: FitWindow) -> Result<ExponentFit> {
    let mesh = u.mesh();
    check_window(mesh, &window)?;
    let mut sides = Vec::new();
    for side in window_sides(mesh, &window) {
        if side.len() < MIN_FIT_NODES {
            return Err(Error::FitRejected(format!(
                "only {} nodes in [{:e}, {:e}] on one side (need {MIN_FIT_NODES}); refine or grade the mesh",
                side.len(),
                window.d_min,
                window.d_max
            )));
        }
        let mut points = Vec::with_capacity(side.len());
        for i in side {
            let v = u.values()[i];
            if !(v > 0.0) {
                return Err(Error::FitRejected(format!("u = {v} is not positive at node {i}")));
            }
            points.push((mesh.distances()[i].ln(), v.ln()));
        }
        sides.push(line_fit(&points));
    }
    let k = sides.len() as f64;
    let slope = sides.iter().map(|s| s.slope).sum::<f64>() / k;
    let intercept = sides.iter().map(|s| s.intercept).sum::<f64>() / k;
    Ok(ExponentFit {
        window,
        slope,
        intercept,
        residual: sides.iter().map(|s| s.residual).fold(0.0, f64::max),
        node_count: sides.iter().map(|s| s.nodes).sum(),
        asymmetry: (sides.len() == 2).then(|| sides[0].slope - sides[1].slope),
        sides,
    })
}

/// Ratio band of `u / (d log^{1/(p-β)}(L/d))` and the drift of a pure
/// power fit across the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegimeFit {
    pub window: FitWindow,
    pub log_scale: f64,
    pub band_min: f64,
    pub band_max: f64,
    /// Power-fit slopes on the lower and upper log-halves of the window.
    pub half_slopes: (f64, f64),
    /// `|upper slope - lower slope|`.
    pub drift: f64,
    pub band_bounded: bool,
}

impl LogRegimeFit {
    pub fn band_ratio(&self) -> f64 {
        self.band_max / self.band_min
    }
}

pub fn fit_log_regime(u: &DiscreteField, spec: &ProblemSpec, log_scale: f64, window: FitWindow) -> Result<LogRegimeFit> {
    if spec.regime() != Regime::Critical {
        return Err(Error::FitRejected(format!(
            "logarithmic band needs β + δ = 1, got {}",
            spec.beta + spec.delta
        )));
    }
    let mesh = u.mesh();
    check_window(mesh, &window)?;
    let k = 1.0 / (spec.p - spec.beta);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut count = 0;
    for i in window_sides(mesh, &window).into_iter().flatten() {
        let d = mesh.distances()[i];
        let r = u.values()[i] / (d * (log_scale / d).ln().powf(k));
        lo = lo.min(r);
        hi = hi.max(r);
        count += 1;
    }
    if count < MIN_FIT_NODES {
        return Err(Error::FitRejected(format!("only {count} nodes in the window")));
    }
    let (a, b) = window.halves();
    let lower = fit_boundary_exponent(u, a)?.slope;
    let upper = fit_boundary_exponent(u, b)?.slope;
    Ok(LogRegimeFit {
        window,
        log_scale,
        band_min: lo,
        band_max: hi,
        half_slopes: (lower, upper),
        drift: (upper - lower).abs(),
        band_bounded: lo > 0.0 && hi / lo <= LOG_BAND_LIMIT,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SobolevVerdict {
    Bounded,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevProbe {
    pub rho: f64,
    pub levels: Vec<usize>,
    pub energies: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: SobolevVerdict,
}

/// `Σ_e W_e |D(u^ρ)|^p` with `u^ρ` interpolated at the nodes.
pub fn power_energy(u: &DiscreteField, rho: f64, p: f64) -> f64 {
    let mesh = u.mesh();
    let v: Vec<f64> = u.values().iter().map(|x| x.max(0.0).powf(rho)).collect();
    v.windows(2)
        .zip(mesh.element_lengths())
        .zip(mesh.weights())
        .map(|((w, h), wt)| wt * ((w[1] - w[0]) / h).abs().powf(p))
        .sum()
}

/// Classifies an energy sequence by its successive growth ratios.
pub fn classify_energies(rho: f64, levels: &[usize], energies: Vec<f64>) -> SobolevProbe {
    let ratios: Vec<f64> = energies.windows(2).map(|w| w[1] / w[0]).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if max <= BOUNDED_RATIO {
        SobolevVerdict::Bounded
    } else if min >= DIVERGENT_RATIO {
        SobolevVerdict::Divergent
    } else {
        SobolevVerdict::Inconclusive
    };
    SobolevProbe {
        rho,
        levels: levels.to_vec(),
        energies,
        ratios,
        verdict,
    }
}

/// Mesh levels and regularization shared by the probes that refine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPlan {
    pub levels: Vec<usize>,
    pub grading: f64,
    pub eps: f64,
}

impl RefinementPlan {
    fn validate(&self) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(Error::InvalidProblem("a refinement study needs at least 3 mesh levels".into()));
        }
        if self.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(Error::InvalidProblem("mesh levels must double (n, 2n, 4n, …)".into()));
        }
        Ok(())
    }
}

/// Solves the regularized problem at `eps`, first from the lower barrier and
/// then, if that fails, by continuation in decades from `10⁻²`.
pub fn solve_regularized(
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    settings: &SolverSettings,
    eps: f64,
) -> Result<DiscreteField> {
    match picard_solve(eps, spec, settings, &initial_field(spec, mesh, eps)) {
        Ok(out) => Ok(out.field),
        Err(first) => {
            let start = 1e-2f64.max(eps);
            let steps = (start / eps).log10().round() as usize;
            if steps == 0 {
                return Err(first);
            }
            let trace = continuation(spec, mesh, settings, start, 0.1, steps)?;
            let mut field = trace.last().field().clone();
            let last = trace.last().eps;
            if (last / eps - 1.0).abs() > 1e-12 {
                field = picard_solve(eps, spec, settings, &field)?.field;
            }
            Ok(field)
        }
    }
}

/// Solves once per level and evaluates every `ρ` on the same fields.
pub fn sobolev_batch(
    spec: &ProblemSpec,
    settings: &SolverSettings,
    rhos: &[f64],
    plan: &RefinementPlan,
) -> Result<Vec<SobolevProbe>> {
    plan.validate()?;
    if !(spec.beta < spec.p) {
        return Err(Error::RegimeMismatch("Sobolev probes need β < p".into()));
    }
    let fields: Vec<Result<DiscreteField>> = plan
        .levels
        .par_iter()
        .map(|&n| {
            let mesh = Arc::new(build_mesh(spec.domain, n, plan.grading)?);
            solve_regularized(spec, &mesh, settings, plan.eps)
        })
        .collect();
    let mut solved = Vec::with_capacity(fields.len());
    for (n, f) in plan.levels.iter().zip(fields) {
        solved.push(f.map_err(|e| Error::ProbeAborted(format!("level n = {n}: {e}")))?);
    }
    Ok(rhos
        .iter()
        .map(|&rho| {
            let energies = solved.iter().map(|u| power_energy(u, rho, spec.p)).collect();
            classify_energies(rho, &plan.levels, energies)
        })
        .collect())
}

pub fn sobolev_probe(
    spec: &ProblemSpec,
    settings: &SolverSettings,
    rho: f64,
    plan: &RefinementPlan,
) -> Result<SobolevProbe> {
    Ok(sobolev_batch(spec, settings, &[rho], plan)?.remove(0))
}

/// Whether a bounded verdict at some `ρ` is followed by bounded verdicts at
/// every larger `ρ`.
pub fn verdicts_antitone(probes: &[SobolevProbe]) -> bool {
    let mut sorted: Vec<&SobolevProbe> = probes.iter().collect();
    sorted.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let first_bounded = sorted.iter().position(|p| p.verdict == SobolevVerdict::Bounded);
    match first_bounded {
        Some(k) => sorted[k..].iter().all(|p| p.verdict == SobolevVerdict::Bounded),
        None => true,
    }
}

/// Extremes of `u / unit profile` over interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub eta: f64,
    pub gamma: f64,
    /// Interior nodes where the unit profile vanishes.
    pub excluded: Vec<usize>,
}

pub fn barrier_sandwich(u: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<Sandwich> {
    let params = BarrierParams::for_spec(spec);
    if spec.regime() == Regime::Superlinear && !(spec.beta < spec.p) {
        return Err(Error::RegimeMismatch("barrier sandwich needs β < p".into()));
    }
    let mesh = u.mesh();
    let (mut eta, mut gamma) = (f64::INFINITY, 0.0f64);
    let mut excluded = Vec::new();
    for i in 0..mesh.node_count() {
        if mesh.is_boundary_node(i) {
            continue;
        }
        let b = unit_profile(mesh.distances()[i], eps, spec, &params)?;
        if !(b > 0.0) {
            excluded.push(i);
            continue;
        }
        let r = u.values()[i] / b;
        eta = eta.min(r);
        gamma = gamma.max(r);
    }
    if !(eta > 0.0 && gamma.is_finite() && eta <= gamma) {
        return Err(Error::FitRejected(format!(
            "sandwich constants out of range: η* = {eta}, Γ* = {gamma}"
        )));
    }
    Ok(Sandwich { eta, gamma, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub c_f1: f64,
    pub c_f2: f64,
    pub eps: f64,
    /// `max_i (u₁ - u₂)`.
    pub violation: f64,
    pub tolerance: f64,
    /// Present when `β ≥ 2 - 1/p`, outside the hypothesis of the ordering.
    pub notice: Option<String>,
    pub pass: bool,
}

/// Solves with weights `c_f1 ≤ c_f2` and reports how far `u₁` exceeds `u₂`.
pub fn comparison_check(
    spec: &ProblemSpec,
    mesh: &Arc<Mesh>,
    settings: &SolverSettings,
    c_f1: f64,
    c_f2: f64,
    eps: f64,
) -> Result<ComparisonReport> {
    let notice = (spec.beta >= 2.0 - 1.0 / spec.p).then(|| {
        format!(
            "β = {} ≥ 2 - 1/p = {}: ordering not covered, run is exploratory",
            spec.beta,
            2.0 - 1.0 / spec.p
        )
    });
    let (u1, u2) = rayon::join(
        || solve_regularized(&spec.with_c_f(c_f1), mesh, settings, eps),
        || solve_regularized(&spec.with_c_f(c_f2), mesh, settings, eps),
    );
    let (u1, u2) = (u1?, u2?);
    let violation = u1.max_excess_over(&u2);
    let tolerance = 1e-8 + settings.picard_tol;
    Ok(ComparisonReport {
        c_f1,
        c_f2,
        eps,
        violation,
        tolerance,
        pass: notice.is_none() && violation <= tolerance,
        notice,
    })
}

/// Discrete Hardy sum `Σ_e W_e (u_mid^γ / d_mid)^p`.
pub fn hardy_integral(u: &DiscreteField, gamma: f64, p: f64) -> f64 {
    let mesh = u.mesh();
    u.midpoint_values()
        .iter()
        .zip(mesh.midpoint_distances())
        .zip(mesh.weights())
        .map(|((s, d), w)| w * (s.max(0.0).powf(gamma) / d).powf(p))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardySeries {
    pub gamma: f64,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaTildeEntry {
    pub beta_tilde: f64,
    pub tau_expected: f64,
    pub tau_fit: f64,
    pub hardy: Vec<HardySeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub p: f64,
    pub beta: f64,
    pub entries: Vec<BetaTildeEntry>,
    /// Fitted exponents decrease toward 0 along the family.
    pub tau_decreasing: bool,
    /// Every Hardy series at the smallest gap grows by `HARDY_GROWTH` per level.
    pub hardy_divergent: bool,
    pub confirmed: bool,
    /// Failures of individual `β̃` solves, if any.
    pub failures: Vec<String>,
}

/// Gaps `p - β̃` of the approximating family.
pub const BETA_TILDE_GAPS: [f64; 4] = [0.5, 0.2, 0.1, 0.05];

/// Approximates a `β ≥ p` problem by the family `β̃ = p - gap`, whose weights
/// lie below `f` near the boundary, and tracks exponents and Hardy sums.
pub fn nonexistence_probe(
    spec: &ProblemSpec,
    settings: &SolverSettings,
    fit_mesh: &Arc<Mesh>,
    window: FitWindow,
    plan: &RefinementPlan,
    gammas: &[f64],
) -> Result<NonexistenceReport> {
    if spec.beta < spec.p {
        return Err(Error::RegimeMismatch(format!(
            "non-existence probe needs β ≥ p (β = {}, p = {})",
            spec.beta, spec.p
        )));
    }
    plan.validate()?;
    let results: Vec<Result<BetaTildeEntry>> = BETA_TILDE_GAPS
        .par_iter()
        .map(|&gap| {
            let tilde = spec.with_beta(spec.p - gap);
            let u = solve_regularized(&tilde, fit_mesh, settings, plan.eps)?;
            let tau_fit = fit_boundary_exponent(&u, window)?.slope;
            let mut hardy = Vec::new();
            if gap == *BETA_TILDE_GAPS.last().unwrap() {
                let fields = plan
                    .levels
                    .iter()
                    .map(|&n| {
                        let mesh = Arc::new(build_mesh(spec.domain, n, plan.grading)?);
                        solve_regularized(&tilde, &mesh, settings, plan.eps)
                    })
                    .collect::<Result<Vec<_>>>()?;
                for &g in gammas {
                    let values: Vec<f64> = fields.iter().map(|u| hardy_integral(u, g, spec.p)).collect();
                    hardy.push(HardySeries {
                        gamma: g,
                        levels: plan.levels.clone(),
                        ratios: values.windows(2).map(|w| w[1] / w[0]).collect(),
                        values,
                    });
                }
            }
            Ok(BetaTildeEntry {
                beta_tilde: tilde.beta,
                tau_expected: tilde.tau(),
                tau_fit,
                hardy,
            })
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (gap, r) in BETA_TILDE_GAPS.iter().zip(results) {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => failures.push(format!("β̃ = {}: {e}", spec.p - gap)),
        }
    }
    let tau_decreasing = failures.is_empty() && entries.windows(2).all(|w| w[1].tau_fit < w[0].tau_fit);
    let hardy_divergent = failures.is_empty()
        && entries.last().is_some_and(|e| {
            !e.hardy.is_empty() && e.hardy.iter().all(|s| s.ratios.iter().all(|&r| r >= HARDY_GROWTH))
        });
    Ok(NonexistenceReport {
        p: spec.p,
        beta: spec.beta,
        entries,
        tau_decreasing,
        hardy_divergent,
        confirmed: tau_decreasing && hardy_divergent,
        failures,
    })
}

/// JSON verdict document `{probe, spec, parameters, data, verdict, tolerances}`.
pub fn verdict_document(
    probe: &str,
    spec: &ProblemSpec,
    parameters: Value,
    data: Value,
    verdict: &str,
    tolerances: Value,
) -> Value {
    json!({
        "probe": probe,
        "spec": spec,
        "outside_hypotheses": spec.is_degenerate_test_mode(),
        "parameters": parameters,
        "data": data,
        "verdict": verdict,
        "tolerances": tolerances,
    })
}
