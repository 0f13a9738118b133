//! Discrete energies on piecewise-linear fields.
//!
//! Gradients are elementwise constant, so with midpoint quadrature the p- and
//! q-Dirichlet energies are exact on the discrete space. The singular term is
//! handled in primitive form: `Φ_ε(s) = ∫_0^s (σ + ε)^{-δ} dσ`, which makes
//! the regularized problem the Euler–Lagrange equation of a strictly convex
//! functional.

use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::Mesh;
use crate::weights::ProblemSpec;

/// `(1/t) Σ_e W_e (μ² + |Du|²)^{t/2}`.
pub fn dirichlet_energy(u: &DiscreteField, t: f64, mu: f64) -> f64 {
    u.element_gradients()
        .iter()
        .zip(u.mesh().weights())
        .map(|(&g, &w)| w * (mu * mu + g * g).powf(0.5 * t) / t)
        .sum()
}

/// `∫ f_ε Φ_ε(u)` by midpoint quadrature, with `Φ_ε(0) = 0`.
///
/// `ε = 0` is the unregularized primitive `s^{1-δ}/(1-δ)`, admitted only in
/// the sublinear regime `β + δ < 1`.
pub fn potential_energy(u: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<f64> {
    if eps < 0.0 {
        return Err(Error::InvalidProblem(format!("ε must be nonnegative, got {eps}")));
    }
    if eps == 0.0 && !(spec.beta + spec.delta < 1.0) {
        return Err(Error::RegimeMismatch(
            "the unregularized potential needs β + δ < 1".into(),
        ));
    }
    let mesh = u.mesh();
    let mut total = 0.0;
    for ((&s, &w), &d) in u
        .midpoint_values()
        .iter()
        .zip(mesh.weights())
        .zip(mesh.midpoint_distances())
    {
        let f = spec.f_eps_at_distance(d, eps)?;
        if f == 0.0 {
            continue;
        }
        total += w * f * regularized_primitive(s, eps, spec.delta);
    }
    if !total.is_finite() {
        return Err(Error::Divergence(
            "potential energy is not finite (u < -ε at a quadrature point)".into(),
        ));
    }
    Ok(total)
}

/// `Φ_ε(s) = ((s+ε)^{1-δ} - ε^{1-δ})/(1-δ)`, or `log((s+ε)/ε)` for `δ = 1`.
pub fn regularized_primitive(s: f64, eps: f64, delta: f64) -> f64 {
    if s + eps <= 0.0 {
        return f64::NAN;
    }
    if eps == 0.0 {
        return if delta == 1.0 {
            f64::NAN
        } else {
            s.powf(1.0 - delta) / (1.0 - delta)
        };
    }
    let ratio = s / eps;
    if delta == 1.0 {
        ratio.ln_1p()
    } else {
        eps.powf(1.0 - delta) * ((1.0 - delta) * ratio.ln_1p()).exp_m1() / (1.0 - delta)
    }
}

/// Load term of the minimized functional.
#[derive(Debug, Clone)]
pub(crate) enum Load {
    /// `∫ s w` with a fixed source per element.
    Linear(Vec<f64>),
    /// `∫ f_e Φ_ε(w)` with a weight per element.
    Singular {
        weight: Vec<f64>,
        eps: f64,
        delta: f64,
    },
}

/// The convex functional `(1/p)∫|w'|^p + (1/q)∫|w'|^q - load(w)` with
/// gradient smoothing `μ`.
#[derive(Debug, Clone)]
pub(crate) struct EnergyModel<'a> {
    pub mesh: &'a Mesh,
    pub p: f64,
    pub q: f64,
    pub load: Load,
}

/// `g (μ² + g²)^{(t-2)/2}`, the derivative of `(1/t)(μ² + g²)^{t/2}`.
#[inline]
pub(crate) fn flux(g: f64, t: f64, mu: f64) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    let a = mu * mu + g * g;
    if t == 2.0 {
        g
    } else {
        g * a.powf(0.5 * t - 1.0)
    }
}

/// Second derivative of `(1/t)(μ² + g²)^{t/2}`.
#[inline]
fn flux_derivative(g: f64, t: f64, mu: f64) -> f64 {
    if t == 2.0 {
        return 1.0;
    }
    let a = mu * mu + g * g;
    a.powf(0.5 * t - 2.0) * (mu * mu + (t - 1.0) * g * g)
}

/// `(1/t)[(μ² + (g+dg)²)^{t/2} - (μ² + g²)^{t/2}]` without cancellation.
fn gradient_energy_change(g: f64, dg: f64, t: f64, mu: f64) -> f64 {
    let a0 = mu * mu + g * g;
    let da = dg * (2.0 * g + dg);
    if a0 == 0.0 {
        return (mu * mu + dg * dg).powf(0.5 * t) / t;
    }
    a0.powf(0.5 * t) * (0.5 * t * (da / a0).ln_1p()).exp_m1() / t
}

/// `Ψ(s + ds) - Ψ(s)` for `Ψ' = (s + ε)^{-δ}`, without cancellation.
fn primitive_change(s: f64, ds: f64, eps: f64, delta: f64) -> f64 {
    let a = s + eps;
    if !(a > 0.0 && a + ds > 0.0) {
        return f64::NAN;
    }
    let r = (ds / a).ln_1p();
    if delta == 1.0 {
        r
    } else {
        a.powf(1.0 - delta) * ((1.0 - delta) * r).exp_m1() / (1.0 - delta)
    }
}

/// Gradient of the functional with a per-node magnitude scale.
pub(crate) struct Gradient {
    pub values: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Gradient {
    /// `max_i |g_i| / (1 + scale_i)` over the free nodes.
    pub fn residual(&self, free: std::ops::Range<usize>) -> f64 {
        free.map(|i| self.values[i].abs() / (1.0 + self.scale[i]))
            .fold(0.0, f64::max)
    }
}

impl<'a> EnergyModel<'a> {
    fn element_gradients<'b>(&'b self, u: &'b [f64]) -> impl Iterator<Item = f64> + 'b {
        let lens = self.mesh.element_lengths();
        (0..lens.len()).map(move |e| (u[e + 1] - u[e]) / lens[e])
    }

    /// Load density `∂(load)/∂(midpoint value)` and its derivative.
    #[inline]
    fn load_density(&self, e: usize, s: f64) -> (f64, f64) {
        match &self.load {
            Load::Linear(src) => (src[e], 0.0),
            Load::Singular { weight, eps, delta } => {
                let f = weight[e];
                if f == 0.0 {
                    return (0.0, 0.0);
                }
                let base = s + eps;
                let v = f * base.powf(-delta);
                (v, -delta * v / base)
            }
        }
    }

    /// Whether every midpoint stays inside the domain of the load term.
    pub fn feasible(&self, u: &[f64]) -> bool {
        match &self.load {
            Load::Linear(_) => true,
            Load::Singular { weight, eps, .. } => u
                .windows(2)
                .zip(weight)
                .all(|(w, &f)| f == 0.0 || 0.5 * (w[0] + w[1]) + eps > 0.0),
        }
    }

    pub fn gradient(&self, u: &[f64], mu: f64) -> Gradient {
        let n = u.len();
        let mut values = vec![0.0; n];
        let mut scale = vec![0.0; n];
        let weights = self.mesh.weights();
        let lens = self.mesh.element_lengths();
        for (e, g) in self.element_gradients(u).enumerate() {
            let c = weights[e] / lens[e];
            let fl = c * (flux(g, self.p, mu) + flux(g, self.q, mu));
            values[e] -= fl;
            values[e + 1] += fl;
            scale[e] += fl.abs();
            scale[e + 1] += fl.abs();
            let s = 0.5 * (u[e] + u[e + 1]);
            let (dens, _) = self.load_density(e, s);
            let ld = 0.5 * weights[e] * dens;
            values[e] -= ld;
            values[e + 1] -= ld;
            scale[e] += ld.abs();
            scale[e + 1] += ld.abs();
        }
        Gradient { values, scale }
    }

    /// Per-node bound on the gradient change caused by perturbing every
    /// nodal value by `ulp(x) = 4ε|x|`.
    ///
    /// The flux changes are evaluated exactly rather than through the
    /// Hessian: for exponents below 2 the flux `|g|^{t-2}g` is not Lipschitz
    /// at `g = 0`, where one ulp of `u` can move it by far more than the
    /// linearization predicts.
    pub fn rounding_sensitivity(&self, u: &[f64], mu: f64) -> Vec<f64> {
        let ulp = |x: f64| 4.0 * f64::EPSILON * x.abs();
        let mut out = vec![0.0; u.len()];
        let weights = self.mesh.weights();
        let lens = self.mesh.element_lengths();
        for (e, g) in self.element_gradients(u).enumerate() {
            let c = weights[e] / lens[e];
            let dg = (ulp(u[e]) + ulp(u[e + 1])) / lens[e];
            let phi = |g: f64| flux(g, self.p, mu) + flux(g, self.q, mu);
            let base = phi(g);
            let df = c * (phi(g + dg) - base).abs().max((phi(g - dg) - base).abs());
            let s = 0.5 * (u[e] + u[e + 1]);
            let ds = 0.5 * (ulp(u[e]) + ulp(u[e + 1]));
            let (dens, _) = self.load_density(e, s);
            let (lo, _) = self.load_density(e, s - ds);
            let (hi, _) = self.load_density(e, s + ds);
            let dl = 0.5 * weights[e] * (lo - dens).abs().max((hi - dens).abs());
            let dl = if dl.is_finite() { dl } else { 0.0 };
            out[e] += df + dl;
            out[e + 1] += df + dl;
        }
        out
    }

    /// Tridiagonal Hessian as `(diagonal, superdiagonal)`.
    pub fn hessian(&self, u: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
        let n = u.len();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let weights = self.mesh.weights();
        let lens = self.mesh.element_lengths();
        for (e, g) in self.element_gradients(u).enumerate() {
            let k = weights[e] / (lens[e] * lens[e])
                * (flux_derivative(g, self.p, mu) + flux_derivative(g, self.q, mu));
            let s = 0.5 * (u[e] + u[e + 1]);
            let (_, ddens) = self.load_density(e, s);
            // the load enters with a minus sign
            let m = -0.25 * weights[e] * ddens;
            diag[e] += k + m;
            diag[e + 1] += k + m;
            off[e] += -k + m;
        }
        (diag, off)
    }

    #[cfg(test)]
    /// Energy value. The singular primitive is the `Φ_ε(0) = 0` form.
    pub fn value(&self, u: &[f64], mu: f64) -> f64 {
        let weights = self.mesh.weights();
        let mut total = 0.0;
        for (e, g) in self.element_gradients(u).enumerate() {
            let a = mu * mu + g * g;
            total += weights[e] * (a.powf(0.5 * self.p) / self.p + a.powf(0.5 * self.q) / self.q);
            let s = 0.5 * (u[e] + u[e + 1]);
            total -= weights[e]
                * match &self.load {
                    Load::Linear(src) => src[e] * s,
                    Load::Singular { weight, eps, delta } => {
                        if weight[e] == 0.0 {
                            0.0
                        } else {
                            weight[e] * regularized_primitive(s, *eps, *delta)
                        }
                    }
                };
        }
        total
    }

    /// `E(u + α·dir) - E(u)`, accumulated elementwise from cancellation-free
    /// differences, with the sum of the absolute element changes. NaN when
    /// the trial point leaves the domain.
    pub fn change(&self, u: &[f64], dir: &[f64], alpha: f64, mu: f64) -> (f64, f64) {
        let weights = self.mesh.weights();
        let lens = self.mesh.element_lengths();
        let mut total = 0.0;
        let mut spread = 0.0;
        for e in 0..lens.len() {
            let g0 = (u[e + 1] - u[e]) / lens[e];
            let dg = alpha * (dir[e + 1] - dir[e]) / lens[e];
            if dg != 0.0 {
                let c = weights[e]
                    * (gradient_energy_change(g0, dg, self.p, mu)
                        + gradient_energy_change(g0, dg, self.q, mu));
                total += c;
                spread += c.abs();
            }
            let s0 = 0.5 * (u[e] + u[e + 1]);
            let ds = 0.5 * alpha * (dir[e] + dir[e + 1]);
            if ds == 0.0 {
                continue;
            }
            let load = match &self.load {
                Load::Linear(src) => src[e] * ds,
                Load::Singular { weight, eps, delta } => {
                    if weight[e] == 0.0 {
                        0.0
                    } else {
                        weight[e] * primitive_change(s0, ds, *eps, *delta)
                    }
                }
            };
            total -= weights[e] * load;
            spread += (weights[e] * load).abs();
        }
        (total, spread)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};
    use std::sync::Arc;

    fn hat() -> DiscreteField {
        let mesh = Arc::new(build_mesh(Domain::interval(1.0).unwrap(), 2, 1.0).unwrap());
        DiscreteField::new(mesh, vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn dirichlet_energy_examples() {
        let zero = DiscreteField::zeros(hat().mesh().clone());
        assert_eq!(dirichlet_energy(&zero, 2.0, 0.0), 0.0);
        assert!((dirichlet_energy(&hat(), 2.0, 0.0) - 2.0).abs() < 1e-15);
        // hand quadrature: (1/3)(2³·½ + 2³·½)
        assert!((dirichlet_energy(&hat(), 3.0, 0.0) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn potential_energy_examples() {
        let mesh = Arc::new(build_mesh(Domain::interval(1.0).unwrap(), 8, 1.0).unwrap());
        let spec = |delta: f64| {
            ProblemSpec::new(2.0, 1.5, delta, 0.0, 1.0, Domain::interval(1.0).unwrap()).unwrap()
        };
        let zero = DiscreteField::zeros(mesh.clone());
        assert_eq!(potential_energy(&zero, 0.1, &spec(1.0)).unwrap(), 0.0);

        let e = std::f64::consts::E;
        let c = DiscreteField::from_fn(mesh.clone(), |_, _| e - 1.0);
        assert!((potential_energy(&c, 1.0, &spec(1.0)).unwrap() - 1.0).abs() < 1e-14);

        // ((0.5+0.5)^{-1} - 0.5^{-1})/(-1) = 1
        let c = DiscreteField::from_fn(mesh.clone(), |_, _| 0.5);
        assert!((potential_energy(&c, 0.5, &spec(2.0)).unwrap() - 1.0).abs() < 1e-14);

        let neg = DiscreteField::from_fn(mesh, |_, _| -1.0);
        assert!(matches!(
            potential_energy(&neg, 0.5, &spec(2.0)),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn unregularized_potential_needs_sublinear_regime() {
        let mesh = Arc::new(build_mesh(Domain::interval(1.0).unwrap(), 4, 1.0).unwrap());
        let u = DiscreteField::from_fn(mesh, |_, d| d);
        let d = Domain::interval(1.0).unwrap();
        let sub = ProblemSpec::new(2.0, 1.5, 0.5, 0.2, 1.0, d).unwrap();
        let sup = ProblemSpec::new(2.0, 1.5, 1.5, 0.2, 1.0, d).unwrap();
        assert!(potential_energy(&u, 0.0, &sub).is_ok());
        assert!(matches!(
            potential_energy(&u, 0.0, &sup),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn primitive_limits() {
        // δ = 1 limit of the power form
        let a = regularized_primitive(0.7, 0.2, 1.0);
        let b = regularized_primitive(0.7, 0.2, 1.0 + 1e-7);
        assert!((a - b).abs() < 1e-6);
        assert_eq!(regularized_primitive(0.0, 0.3, 2.5), 0.0);
    }

    fn random_model(mesh: &Mesh) -> EnergyModel<'_> {
        let n = mesh.element_count();
        let weight = (0..n).map(|e| 1.0 + (e as f64 * 0.37).sin().abs()).collect();
        EnergyModel {
            mesh,
            p: 3.0,
            q: 1.5,
            load: Load::Singular {
                weight,
                eps: 1e-2,
                delta: 1.7,
            },
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = build_mesh(Domain::interval(1.0).unwrap(), 12, 2.0).unwrap();
        let model = random_model(&mesh);
        let mu = 1e-2;
        let u: Vec<f64> = mesh.distances().iter().map(|d| d.sqrt() * 0.8).collect();
        let grad = model.gradient(&u, mu);
        for i in 1..u.len() - 1 {
            let mut dir = vec![0.0; u.len()];
            dir[i] = 1.0;
            let h = 1e-6;
            let fd = (model.change(&u, &dir, h, mu).0 - model.change(&u, &dir, -h, mu).0) / (2.0 * h);
            assert!(
                (fd - grad.values[i]).abs() < 1e-6 * (1.0 + grad.scale[i]),
                "node {i}: fd {fd} vs {}",
                grad.values[i]
            );
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let mesh = build_mesh(Domain::ball(1.0, 3).unwrap(), 10, 1.5).unwrap();
        let model = random_model(&mesh);
        let mu = 1e-1;
        let u: Vec<f64> = mesh.distances().iter().map(|d| 0.3 * d + d * d).collect();
        let (diag, off) = model.hessian(&u, mu);
        let h = 1e-6;
        for i in 0..u.len() - 1 {
            let mut up = u.clone();
            up[i] += h;
            let mut dn = u.clone();
            dn[i] -= h;
            let gp = model.gradient(&up, mu).values;
            let gm = model.gradient(&dn, mu).values;
            let d_ii = (gp[i] - gm[i]) / (2.0 * h);
            let d_ji = (gp[i + 1] - gm[i + 1]) / (2.0 * h);
            assert!((d_ii - diag[i]).abs() < 1e-5 * diag[i].abs().max(1.0), "diag {i}");
            assert!((d_ji - off[i]).abs() < 1e-5 * off[i].abs().max(1.0), "off {i}");
        }
    }

    #[test]
    fn change_agrees_with_value_difference() {
        let mesh = build_mesh(Domain::interval(2.0).unwrap(), 16, 1.0).unwrap();
        let model = random_model(&mesh);
        let u: Vec<f64> = mesh.distances().iter().map(|d| d * (2.0 - d)).collect();
        let dir: Vec<f64> = mesh.distances().iter().map(|d| d * 0.3).collect();
        for &mu in &[0.0, 1e-3, 1e-1] {
            let direct = model.value(
                &u.iter().zip(&dir).map(|(a, b)| a + 0.7 * b).collect::<Vec<_>>(),
                mu,
            ) - model.value(&u, mu);
            let accurate = model.change(&u, &dir, 0.7, mu).0;
            assert!((direct - accurate).abs() < 1e-12, "μ={mu}: {direct} vs {accurate}");
        }
    }
}
