//! Explicit sub- and supersolution profiles, the Θ shooting barrier and the
//! semi-analytic torsion solution.
//!
//! Profiles by regime, with `d` the boundary distance:
//!
//! | regime      | profile                                          |
//! |-------------|--------------------------------------------------|
//! | `β + δ > 1` | `(d + ε^{1/τ})^τ - ε`, `τ = (p-β)/(p-1+δ)`        |
//! | `β + δ = 1` | `(a d + ε′) log^{1/(p-β)}(L/(a d + ε′)) - ε′ log^{1/(p-β)}(L/ε′)` |
//! | `β + δ < 1` | `Θ_α(d)` from `-(|Θ′|^{p-2}Θ′)′ = Θ^{-δ-β}`        |

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::{DomainKind, Mesh};
use crate::weights::{ProblemSpec, Regime};

/// Amplitudes and shape parameters of the barrier families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub eta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub log_scale: f64,
    pub alpha: f64,
}

impl BarrierParams {
    /// Unit amplitudes, `τ` from the spec and twice the smallest admissible
    /// log scale.
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        BarrierParams {
            eta: 1.0,
            gamma: 1.0,
            tau: spec.tau(),
            log_scale: 2.0 * min_log_scale(spec),
            alpha: 1.0,
        }
    }

    pub fn with_amplitudes(self, eta: f64, gamma: f64) -> Self {
        BarrierParams { eta, gamma, ..self }
    }
}

/// Smallest `L` with `log(L/(diam + 1)) ≥ 2/(p - β)`.
pub fn min_log_scale(spec: &ProblemSpec) -> f64 {
    (spec.domain.diameter() + 1.0) * (2.0 / (spec.p - spec.beta)).exp()
}

/// `(d + ε^{1/τ})^τ - ε`, evaluated as `ε·expm1(τ·ln1p(d/ε^{1/τ}))` so that
/// it stays accurate when `d ≪ ε^{1/τ}`.
pub fn power_profile(d: f64, eps: f64, tau: f64) -> f64 {
    if eps == 0.0 {
        return d.powf(tau);
    }
    let shift = eps.powf(1.0 / tau);
    if shift == 0.0 {
        return d.powf(tau) - eps;
    }
    eps * (tau * (d / shift).ln_1p()).exp_m1()
}

fn check_power_regime(spec: &ProblemSpec, eps: f64) -> Result<()> {
    if spec.regime() != Regime::Superlinear || !(spec.beta < spec.p) {
        return Err(Error::RegimeMismatch(format!(
            "power barriers need β + δ > 1 and β < p (β = {}, δ = {}, p = {})",
            spec.beta, spec.delta, spec.p
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidProblem(format!("ε must be nonnegative, got {eps}")));
    }
    Ok(())
}

/// `η((d + ε^{1/τ})^τ - ε)`.
pub fn lower_barrier_power(x: f64, eps: f64, spec: &ProblemSpec, params: &BarrierParams) -> Result<f64> {
    check_power_regime(spec, eps)?;
    let d = spec.domain.distance(x)?;
    Ok(params.eta * power_profile(d, eps, params.tau))
}

/// `Γ((d + ε^{1/τ})^τ - ε)`.
pub fn upper_barrier_power(x: f64, eps: f64, spec: &ProblemSpec, params: &BarrierParams) -> Result<f64> {
    check_power_regime(spec, eps)?;
    let d = spec.domain.distance(x)?;
    Ok(params.gamma * power_profile(d, eps, params.tau))
}

/// Logarithmic profile with amplitude `a` at boundary distance `d`.
pub fn log_profile(d: f64, eps_prime: f64, amplitude: f64, log_scale: f64, exponent: f64) -> f64 {
    let term = |s: f64| -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s * (log_scale / s).ln().powf(exponent)
        }
    };
    if d == 0.0 {
        return 0.0;
    }
    term(amplitude * d + eps_prime) - term(eps_prime)
}

/// Logarithmic barrier for `β + δ = 1`, with amplitude `η` or `Γ`.
pub fn barrier_log(
    x: f64,
    eps_prime: f64,
    amplitude: f64,
    spec: &ProblemSpec,
    params: &BarrierParams,
) -> Result<f64> {
    if spec.regime() != Regime::Critical {
        return Err(Error::RegimeMismatch(format!(
            "logarithmic barriers need β + δ = 1, got {}",
            spec.beta + spec.delta
        )));
    }
    let min_l = min_log_scale(spec);
    if params.log_scale < min_l {
        return Err(Error::InvalidProblem(format!(
            "log scale L = {} is below the admissible minimum {min_l}",
            params.log_scale
        )));
    }
    if !(eps_prime >= 0.0) {
        return Err(Error::InvalidProblem(format!("ε′ must be nonnegative, got {eps_prime}")));
    }
    let d = spec.domain.distance(x)?;
    Ok(log_profile(
        d,
        eps_prime,
        amplitude,
        params.log_scale,
        1.0 / (spec.p - spec.beta),
    ))
}

/// Solves `ε = ε′ log^{1/(p-β)}(L/ε′)` for `ε′` on the increasing branch.
pub fn log_eps_prime(eps: f64, spec: &ProblemSpec, log_scale: f64) -> Result<f64> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    let k = 1.0 / (spec.p - spec.beta);
    let map = |e: f64| e * (log_scale / e).ln().powf(k);
    // increasing on (0, L e^{-k})
    let top = log_scale * (-k).exp();
    if !(eps > 0.0 && eps < map(top)) {
        return Err(Error::InvalidProblem(format!(
            "ε = {eps} is outside the range of the logarithmic shift"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if map(mid) < eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Amplitude-one profile of the regime, used for sandwich ratios.
pub fn unit_profile(d: f64, eps: f64, spec: &ProblemSpec, params: &BarrierParams) -> Result<f64> {
    match spec.regime() {
        Regime::Superlinear => Ok(power_profile(d, eps, params.tau)),
        Regime::Critical => {
            let eps_prime = log_eps_prime(eps, spec, params.log_scale)?;
            Ok(log_profile(
                d,
                eps_prime,
                1.0,
                params.log_scale,
                1.0 / (spec.p - spec.beta),
            ))
        }
        Regime::Sublinear => Ok(d),
    }
}

/// Regime-appropriate lower profile scaled by `eta`, used to start solves.
pub fn lower_barrier_field(spec: &ProblemSpec, mesh: &Arc<Mesh>, eps: f64, eta: f64) -> DiscreteField {
    let params = BarrierParams::for_spec(spec);
    let solvable = spec.beta < spec.p;
    DiscreteField::from_fn(mesh.clone(), |_, d| {
        let v = match spec.regime() {
            Regime::Superlinear if solvable && eps <= 1.0 => power_profile(d, eps, params.tau),
            Regime::Critical => log_profile(d, 0.0, 1.0, params.log_scale, 1.0 / (spec.p - spec.beta)),
            _ => d,
        };
        (eta * v).max(0.0)
    })
}

/// Tabulated solution of the Θ shooting problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaTable {
    pub alpha: f64,
    /// Step in the marching variable `s = r^{1-δ-β}`.
    pub step: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// First radius where `Θ′` vanishes, if reached before `r_max`.
    pub r_alpha: Option<f64>,
}

impl ThetaTable {
    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }

    /// Cubic Hermite interpolation of `Θ` at `r`.
    pub fn interpolate(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0 && r <= self.r_max()) {
            return Err(Error::InvalidProblem(format!(
                "probe r = {r} lies outside the table [0, {}]",
                self.r_max()
            )));
        }
        let j = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= self.r.len() => self.r.len() - 2,
            k => k - 1,
        };
        let (r0, r1) = (self.r[j], self.r[j + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (y0, y1) = (self.theta[j], self.theta[j + 1]);
        let (m0, m1) = (self.dtheta[j] * h, self.dtheta[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1)
    }

    /// CSV with columns `r,theta,dtheta`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("r,theta,dtheta\n");
        for i in 0..self.r.len() {
            let _ = writeln!(out, "{:?},{:?},{:?}", self.r[i], self.theta[i], self.dtheta[i]);
        }
        out
    }
}

/// Integrates `-(|Θ′|^{p-2}Θ′)′ = Θ^{-δ-β}`, `Θ(0) = 0`, `Θ′(0) = α`.
///
/// The unknowns are `Θ` and the flux `Φ = |Θ′|^{p-2}Θ′`. The march runs in
/// `s = r^{1-γ}` (`γ = δ + β`), where the flux equation becomes
/// `dΦ/ds = -(Θ/r)^{-γ}/(1-γ)` with a bounded right side. The start at
/// `s = h` uses `Θ = α r₀` and `Φ = α^{p-1} - ∫_0^{r₀} (αt)^{-γ} dt`.
/// Explicit midpoint steps run until `r_max` or until `Θ′ ≤ 0`; the `Θ`
/// update integrates the weight `dr/ds` exactly, which keeps it accurate
/// relative to `Θ` near the origin where `Θ ~ s^{1/(1-γ)}`.
pub fn theta_shoot(alpha: f64, spec: &ProblemSpec, r_max: f64, h: f64) -> Result<ThetaTable> {
    let gamma = spec.delta + spec.beta;
    if !(gamma < 1.0) {
        return Err(Error::RegimeMismatch(format!(
            "Θ shooting needs β + δ < 1, got {gamma}"
        )));
    }
    if !(alpha > 0.0 && h > 0.0 && r_max > 0.0) {
        return Err(Error::InvalidProblem("α, h and r_max must be positive".into()));
    }
    let p = spec.p;
    let m = 1.0 / (1.0 - gamma);
    let s_max = r_max.powf(1.0 - gamma);
    let slope = |phi: f64| phi.abs().powf(1.0 / (p - 1.0)) * phi.signum();
    // dΦ/ds at (s, Θ)
    let flux_rate = |s: f64, theta: f64| -m * (theta / s.powf(m)).powf(-gamma);

    let mut r = vec![0.0];
    let mut theta = vec![0.0];
    let mut dtheta = vec![alpha];
    let mut s = h.min(s_max);
    let r0 = s.powf(m);
    let mut th = alpha * r0;
    let mut phi = alpha.powf(p - 1.0) - m * alpha.powf(-gamma) * s;
    let mut r_alpha = None;
    let mut steps = 0usize;
    if phi <= 0.0 {
        return Err(Error::InvalidProblem(format!(
            "step h = {h} too large: Θ′ vanishes at the start"
        )));
    }
    r.push(r0);
    theta.push(th);
    dtheta.push(slope(phi));

    while s < s_max {
        let hs = h.min(s_max - s);
        // Θ picks up Θ′ times the exact increment of r = s^m
        let r_now = s.powf(m);
        let mid_s = s + 0.5 * hs;
        let mt = th + slope(phi) * (mid_s.powf(m) - r_now);
        let mp = phi + 0.5 * hs * flux_rate(s, th);
        if !(mt > 0.0) {
            return Err(Error::ThetaFault(format!("Θ ≤ 0 at s = {s}")));
        }
        let next_th = th + slope(mp) * ((s + hs).powf(m) - r_now);
        let next_phi = phi + hs * flux_rate(mid_s, mt);
        let next_s = s + hs;
        steps += 1;
        if !(next_th > 0.0) || !next_th.is_finite() {
            return Err(Error::ThetaFault(format!("Θ ≤ 0 at s = {next_s}")));
        }
        if next_phi <= 0.0 {
            if steps <= 5 {
                return Err(Error::InvalidProblem(format!(
                    "step h = {h} too large: Θ′ changes sign within the first steps"
                )));
            }
            let s_root = s + hs * phi / (phi - next_phi);
            r_alpha = Some(s_root.powf(m));
            break;
        }
        s = next_s;
        th = next_th;
        phi = next_phi;
        r.push(if s >= s_max { r_max } else { s.powf(m) });
        theta.push(th);
        dtheta.push(slope(phi));
    }

    Ok(ThetaTable {
        alpha,
        step: h,
        r,
        theta,
        dtheta,
        r_alpha,
    })
}

/// Exponents `(a, b)` of the self-similar rescaling
/// `Θ_α(r) = α^a Θ_1(α^{-b} r)` with `a = p/(1-γ)`, `b = (p-1+γ)/(1-γ)`.
///
/// Both are forced by the equation: `Θ_α′(0) = α` gives `a - b = 1`, and
/// invariance of `-(|Θ′|^{p-2}Θ′)′ = Θ^{-γ}` gives `a(p-1+γ) = bp`.
pub fn theta_scaling_exponents(spec: &ProblemSpec) -> (f64, f64) {
    let gamma = spec.delta + spec.beta;
    (spec.p / (1.0 - gamma), (spec.p - 1.0 + gamma) / (1.0 - gamma))
}

/// `max |Θ_α(r) - α^a Θ_1(α^{-b} r)| / Θ_α(r)` over the probe radii.
pub fn theta_scaling_check(
    alpha_table: &ThetaTable,
    unit_table: &ThetaTable,
    spec: &ProblemSpec,
    probes: &[f64],
) -> Result<f64> {
    if unit_table.alpha != 1.0 {
        return Err(Error::InvalidProblem("the reference table must have α = 1".into()));
    }
    let (a, b) = theta_scaling_exponents(spec);
    let alpha = alpha_table.alpha;
    let mut worst = 0.0f64;
    for &r in probes {
        let direct = alpha_table.interpolate(r)?;
        let scaled = alpha.powf(a) * unit_table.interpolate(alpha.powf(-b) * r)?;
        worst = worst.max((direct - scaled).abs() / direct);
    }
    Ok(worst)
}

/// Inverse of the strictly increasing `s ↦ s^{p-1} + s^{q-1}` on `[0, ∞)`,
/// by bisection on `[0, 1 + y^{1/(p-1)}]`.
pub fn invert_flux(y: f64, p: f64, q: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let h = |s: f64| s.powf(p - 1.0) + s.powf(q - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0 + y.powf(1.0 / (p - 1.0)));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                break;
            }
        }
        nodes[i] = x;
    }
    (nodes, weights)
}

/// Semi-analytic solution of `-Δ_p u - Δ_q u = ρ` with zero boundary values.
///
/// The flux is `ρ(x - ℓ/2)` on an interval and `ρr/N` on a ball; the slope
/// is recovered by inverting `s^{p-1} + s^{q-1}` and integrated from the
/// boundary inward with composite Gauss–Legendre quadrature.
pub fn torsion_oracle(rho: f64, spec: &ProblemSpec, mesh: &Arc<Mesh>) -> Result<DiscreteField> {
    if !(rho > 0.0) {
        return Err(Error::InvalidProblem(format!("torsion source must be positive, got {rho}")));
    }
    let (center, scale) = match mesh.domain().kind() {
        DomainKind::Interval => (0.5 * mesh.domain().extent(), 1.0),
        DomainKind::RadialBall => (mesh.domain().extent(), 1.0 / mesh.domain().dimension() as f64),
    };
    let slope_at = |t: f64| invert_flux(rho * scale * (center - t).max(0.0), spec.p, spec.q);
    let (gx, gw) = gauss_legendre(10);
    let integrate = |a: f64, b: f64| -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        gx.iter()
            .zip(&gw)
            .map(|(x, w)| w * slope_at(mid + half * x))
            .sum::<f64>()
            * half
    };

    // distinct boundary distances in increasing order
    let mut levels: Vec<f64> = mesh.distances().to_vec();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    let mut cumulative = Vec::with_capacity(levels.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &d in &levels {
        if d > prev {
            // split the panel touching the centre, where the slope is least smooth
            let pieces = if d >= center * (1.0 - 1e-12) { 16 } else { 1 };
            let width = (d - prev) / pieces as f64;
            for k in 0..pieces {
                acc += integrate(prev + k as f64 * width, prev + (k + 1) as f64 * width);
            }
        }
        cumulative.push(acc);
        prev = d;
    }
    let values = mesh
        .distances()
        .iter()
        .map(|d| {
            let k = levels.partition_point(|&l| l < *d);
            cumulative[k]
        })
        .collect();
    DiscreteField::new(mesh.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    fn spec(p: f64, q: f64, delta: f64, beta: f64) -> ProblemSpec {
        ProblemSpec::new(p, q, delta, beta, 1.0, Domain::interval(1.0).unwrap()).unwrap()
    }

    #[test]
    fn power_barrier_examples() {
        let s = spec(3.0, 2.0, 1.0, 1.0);
        let params = BarrierParams::for_spec(&s);
        assert!((params.tau - 2.0 / 3.0).abs() < 1e-15);
        let v = lower_barrier_power(0.001, 0.0, &s, &params).unwrap();
        assert!((v - 1e-2).abs() < 1e-15);
        for &eps in &[0.0, 1e-6, 1e-2, 0.5] {
            assert_eq!(lower_barrier_power(0.0, eps, &s, &params).unwrap(), 0.0);
        }
        let s2 = spec(2.0, 1.5, 2.0, 0.5);
        let p2 = BarrierParams::for_spec(&s2);
        assert!((p2.tau - 0.5).abs() < 1e-15);
        let v = lower_barrier_power(0.04, 0.0, &s2, &p2.with_amplitudes(3.0, 1.0)).unwrap();
        assert!((v - 0.6).abs() < 1e-14);
    }

    #[test]
    fn upper_barrier_examples() {
        let s = spec(3.0, 2.0, 1.0, 1.0);
        let params = BarrierParams::for_spec(&s).with_amplitudes(0.7, 0.7);
        for &x in &[0.0, 0.1, 0.37, 0.5] {
            assert_eq!(
                lower_barrier_power(x, 1e-3, &s, &params).unwrap(),
                upper_barrier_power(x, 1e-3, &s, &params).unwrap()
            );
        }
        let params = params.with_amplitudes(1.0, 2.0);
        let v = upper_barrier_power(0.001, 0.0, &s, &params).unwrap();
        assert!((v - 0.02).abs() < 1e-15);
        let a = upper_barrier_power(0.001, 1e-4, &s, &params).unwrap();
        let b = upper_barrier_power(0.01, 1e-4, &s, &params).unwrap();
        assert!(a < b);
    }

    #[test]
    fn power_barrier_regime_mismatch() {
        let s = spec(2.0, 1.5, 0.5, 0.2);
        let params = BarrierParams::for_spec(&s);
        assert!(matches!(
            lower_barrier_power(0.1, 0.0, &s, &params),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn power_profile_small_distance_accuracy() {
        // (d + s)^τ - s^τ for d ≪ s equals τ s^{τ-1} d to first order
        let (eps, tau) = (1e-3, 0.5);
        let d = 1e-16;
        let v = power_profile(d, eps, tau);
        let shift = eps.powf(1.0 / tau);
        let expected = tau * shift.powf(tau - 1.0) * d;
        assert!((v / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_barrier_examples() {
        let s = ProblemSpec::new(2.0, 1.5, 0.5, 0.5, 1.0, Domain::interval(1.0).unwrap()).unwrap();
        let params = BarrierParams {
            log_scale: 10f64.exp(),
            ..BarrierParams::for_spec(&s)
        };
        assert_eq!(barrier_log(0.0, 1e-3, 1.0, &s, &params).unwrap(), 0.0);
        assert_eq!(barrier_log(1.0, 0.0, 1.0, &s, &params).unwrap(), 0.0);
        // hand evaluation: 1e-3 · (10 + ln 1000)^{2/3}
        let v = barrier_log(1e-3, 0.0, 1.0, &s, &params).unwrap();
        let expected = 1e-3 * (10.0 + 1000f64.ln()).powf(2.0 / 3.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 6.5876e-3).abs() < 1e-6);

        let small = BarrierParams {
            log_scale: 1.0,
            ..params
        };
        assert!(barrier_log(0.1, 0.0, 1.0, &s, &small).is_err());
    }

    #[test]
    fn log_barrier_increasing_below_l_over_e() {
        let s = ProblemSpec::new(2.0, 1.5, 0.6, 0.4, 1.0, Domain::interval(1.0).unwrap()).unwrap();
        let params = BarrierParams::for_spec(&s);
        let mut prev = 0.0;
        for k in 1..=200 {
            let x = 0.5 * k as f64 / 200.0;
            let v = barrier_log(x, 1e-4, 1.0, &s, &params).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn log_eps_prime_inverts_shift() {
        let s = ProblemSpec::new(2.0, 1.5, 0.6, 0.4, 1.0, Domain::interval(1.0).unwrap()).unwrap();
        let l = BarrierParams::for_spec(&s).log_scale;
        for &eps in &[1e-8, 1e-4, 1e-2] {
            let e = log_eps_prime(eps, &s, l).unwrap();
            let back = e * (l / e).ln().powf(1.0 / 1.6);
            assert!((back / eps - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_inversion() {
        assert!((invert_flux(2.0, 3.0, 2.0) - 1.0).abs() < 1e-14);
        assert!((invert_flux(0.5, 2.0, 2.0) - 0.25).abs() < 1e-14);
        assert_eq!(invert_flux(0.0, 3.0, 1.5), 0.0);
        for &y in &[1e-9, 0.3, 7.0, 1e6] {
            let s = invert_flux(y, 2.5, 1.3);
            let back = s.powf(1.5) + s.powf(0.3);
            assert!((back / y - 1.0).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((moment - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn torsion_linear_case_is_parabola() {
        let s = ProblemSpec::new(2.0, 2.0, 1.0, 0.0, 1.0, Domain::interval(2.0).unwrap()).unwrap();
        let mesh = Arc::new(build_mesh(s.domain, 64, 1.0).unwrap());
        let u = torsion_oracle(1.0, &s, &mesh).unwrap();
        for (x, v) in mesh.nodes().iter().zip(u.values()) {
            let y = x - 1.0;
            assert!((v - (1.0 - y * y) / 4.0).abs() < 1e-13);
        }
        assert!((u.values()[32] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn torsion_centre_value_closed_form() {
        // u(0) = ∫_0^1 h^{-1}(2t) dt with h^{-1}(y) = (√(1+4y) - 1)/2, = 7/12
        let s = ProblemSpec::new(3.0, 2.0, 1.0, 0.0, 1.0, Domain::interval(2.0).unwrap()).unwrap();
        let mesh = Arc::new(build_mesh(s.domain, 32, 2.0).unwrap());
        let u = torsion_oracle(2.0, &s, &mesh).unwrap();
        assert!((u.values()[16] - 7.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn torsion_radial_linear_case() {
        // -2Δu = 1 in B_1 ⊂ ℝ³: u = (1 - r²)/12
        let s = ProblemSpec::new(2.0, 2.0, 1.0, 0.0, 1.0, Domain::ball(1.0, 3).unwrap()).unwrap();
        let mesh = Arc::new(build_mesh(s.domain, 40, 1.5).unwrap());
        let u = torsion_oracle(1.0, &s, &mesh).unwrap();
        for (r, v) in mesh.nodes().iter().zip(u.values()) {
            assert!((v - (1.0 - r * r) / 12.0).abs() < 1e-13);
        }
    }

    #[test]
    fn torsion_increasing_in_rho() {
        let s = ProblemSpec::new(3.0, 1.5, 1.0, 0.0, 1.0, Domain::interval(1.0).unwrap()).unwrap();
        let mesh = Arc::new(build_mesh(s.domain, 40, 2.0).unwrap());
        let u = [0.5, 1.0, 2.0].map(|rho| torsion_oracle(rho, &s, &mesh).unwrap());
        for w in u.windows(2) {
            for (i, (a, b)) in w[0].values().iter().zip(w[1].values()).enumerate() {
                if mesh.is_boundary_node(i) {
                    assert_eq!(*a, 0.0);
                } else {
                    assert!(a < b);
                }
            }
        }
    }

    fn theta_spec() -> ProblemSpec {
        spec(2.0, 1.5, 0.3, 0.3)
    }

    #[test]
    fn theta_monotone_and_below_tangent() {
        let s = theta_spec();
        let t = theta_shoot(2.0, &s, 0.5, 1e-3).unwrap();
        assert!(t.r_alpha.is_none());
        for i in 1..t.r.len() {
            assert!(t.theta[i] > t.theta[i - 1]);
            assert!(t.dtheta[i] < t.dtheta[i - 1]);
            assert!(t.theta[i] <= 2.0 * t.r[i]);
        }
    }

    #[test]
    fn theta_detects_turning_point() {
        let s = theta_spec();
        let t = theta_shoot(1.0, &s, 5.0, 1e-3).unwrap();
        let r1 = t.r_alpha.expect("Θ′ should vanish before r = 5");
        assert!(r1 > 0.0 && r1 < 1.0);
        assert!(t.r_max() <= r1);
    }

    #[test]
    fn theta_q_companion_flux_decreasing() {
        let s = theta_spec();
        let t = theta_shoot(2.0, &s, 0.5, 1e-3).unwrap();
        for i in 1..t.r.len() - 1 {
            let a = t.dtheta[i - 1].powf(s.q - 1.0);
            let b = t.dtheta[i + 1].powf(s.q - 1.0);
            // -(Θ′^{q-1})′ by central differences
            assert!(-(b - a) / (t.r[i + 1] - t.r[i - 1]) >= 0.0);
        }
    }

    #[test]
    fn theta_rejects_bad_inputs() {
        let sup = spec(2.0, 1.5, 1.0, 0.3);
        assert!(matches!(
            theta_shoot(1.0, &sup, 0.5, 1e-3),
            Err(Error::RegimeMismatch(_))
        ));
        let s = theta_spec();
        assert!(theta_shoot(1.0, &s, 0.5, 0.5).is_err());
    }

    #[test]
    fn theta_second_order_in_step() {
        let s = theta_spec();
        let probe = 0.25;
        let values: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&h| theta_shoot(2.0, &s, 0.5, h).unwrap().interpolate(probe).unwrap())
            .collect();
        let order = ((values[0] - values[1]) / (values[1] - values[2])).abs().log2();
        assert!((order - 2.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn theta_scaling_identity_for_unit_alpha() {
        let s = theta_spec();
        let t = theta_shoot(1.0, &s, 0.05, 1e-3).unwrap();
        assert_eq!(theta_scaling_check(&t, &t, &s, &[0.01, 0.03]).unwrap(), 0.0);
    }

    #[test]
    fn theta_scaling_exponents_fix_slope_and_equation() {
        let s = theta_spec();
        let (a, b) = theta_scaling_exponents(&s);
        let gamma = s.delta + s.beta;
        assert!((a - b - 1.0).abs() < 1e-14);
        assert!((a * (s.p - 1.0 + gamma) - b * s.p).abs() < 1e-13);
    }
}
