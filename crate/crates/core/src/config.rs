//! Run configuration: a TOML file with one table per module, overridable by
//! `--section.key=value` flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{FitWindow, RefinementPlan};
use crate::error::{Error, Result};
use crate::mesh::{Domain, DomainKind};
use crate::solver::SolverSettings;
use crate::weights::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub beta: f64,
    pub c_f: f64,
    pub domain: DomainKind,
    /// Interval length or ball radius.
    pub extent: f64,
    pub dimension: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            p: 2.0,
            q: 1.5,
            delta: 0.5,
            beta: 0.2,
            c_f: 1.0,
            domain: DomainKind::Interval,
            extent: 1.0,
            dimension: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub n: usize,
    pub grading: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { n: 2048, grading: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub eps0: f64,
    pub ratio: f64,
    pub steps: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            eps0: 1e-2,
            ratio: 0.1,
            steps: 4,
        }
    }
}

/// Parameters read by individual commands; each command ignores the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Regularization for single solves and probes.
    pub eps: f64,
    /// Constant source of `oracle-torsion`.
    pub rho: f64,
    /// Relative sup-norm tolerance of `oracle-torsion`.
    pub torsion_tol: f64,
    /// Fit window `[d_min, d_max]`.
    pub window: [f64; 2],
    /// Allowed distance of fitted slopes from the predicted exponent.
    pub slope_tol: f64,
    /// `L` of the logarithmic profile; the regime default when absent.
    pub log_scale: Option<f64>,
    /// Powers tested by `probe-sobolev`.
    pub rhos: Vec<f64>,
    /// Mesh levels of `probe-sobolev`, graded by `mesh.grading`.
    pub levels: Vec<usize>,
    pub c_f1: f64,
    pub c_f2: f64,
    pub alpha: f64,
    pub theta_step: f64,
    pub theta_probes: Vec<f64>,
    pub theta_tol: f64,
    /// Exponents `γ` of the Hardy sums.
    pub gammas: Vec<f64>,
    pub hardy_levels: Vec<usize>,
    pub hardy_grading: f64,
    /// Tolerance on nodewise decreases along a continuation.
    pub monotone_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            eps: 1e-6,
            rho: 1.0,
            torsion_tol: 1e-3,
            window: [1e-4, 1e-2],
            slope_tol: 0.05,
            log_scale: None,
            rhos: vec![0.8, 1.2],
            levels: vec![512, 1024, 2048, 4096],
            c_f1: 1.0,
            c_f2: 2.0,
            alpha: 2.0,
            theta_step: 1e-5,
            theta_probes: vec![0.5],
            theta_tol: 1e-6,
            gammas: vec![1.0, 2.0],
            hardy_levels: vec![256, 512, 1024],
            hardy_grading: 1.0,
            monotone_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Run directory; `runs/<command>` when absent. A non-empty directory
    /// is never reused: the run goes to `<dir>-v2`, `<dir>-v3`, … instead.
    pub dir: Option<PathBuf>,
    /// Runs are seed-free and deterministic; `false` is rejected.
    pub deterministic: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub mesh: MeshConfig,
    pub solver: SolverSettings,
    pub continuation: ContinuationConfig,
    pub params: Params,
    pub output: OutputConfig,
}

/// Splits `--section.key=value` into a key path and a TOML value. Values
/// that do not parse as TOML are taken as strings.
pub fn parse_override(arg: &str) -> Result<(Vec<String>, toml::Value)> {
    let body = arg
        .strip_prefix("--")
        .ok_or_else(|| Error::Config(format!("override `{arg}` must start with --")))?;
    let (key, raw) = body
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{arg}` needs the form --section.key=value")))?;
    let path: Vec<String> = key.split('.').map(str::to_owned).collect();
    if path.len() < 2 || path.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override `{arg}` needs a section and a key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    Ok((path, value))
}

fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, sections) = path.split_last().expect("override path is never empty");
    let mut table = root;
    for key in sections {
        let entry = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{key}` is not a section")))?;
    }
    // integers given for float fields are widened by serde; floats for
    // integer fields are rejected there
    table.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text and applies overrides in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for arg in overrides {
            let (path, value) = parse_override(arg)?;
            apply_override(&mut table, &path, value)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(config)
    }

    /// Reads the file at `path`, or starts from defaults when `None`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.problem.domain, self.problem.extent, self.problem.dimension)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let c = &self.problem;
        ProblemSpec::new(c.p, c.q, c.delta, c.beta, c.c_f, self.domain()?)
    }

    pub fn window(&self) -> Result<FitWindow> {
        FitWindow::new(self.params.window[0], self.params.window[1])
    }

    pub fn sobolev_plan(&self) -> RefinementPlan {
        RefinementPlan {
            levels: self.params.levels.clone(),
            grading: self.mesh.grading,
            eps: self.params.eps,
        }
    }

    pub fn hardy_plan(&self) -> RefinementPlan {
        RefinementPlan {
            levels: self.params.hardy_levels.clone(),
            grading: self.params.hardy_grading,
            eps: self.params.eps,
        }
    }

    /// Checks every block. `β = p` is rejected here, before any compute,
    /// because the regularized weight is undefined there.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        spec.eps_exponent()?;
        self.solver.validate()?;
        if self.mesh.n < 2 {
            return Err(Error::Config(format!("mesh.n must be at least 2, got {}", self.mesh.n)));
        }
        if !(self.mesh.grading >= 1.0 && self.mesh.grading.is_finite()) {
            return Err(Error::Config(format!("mesh.grading must be ≥ 1, got {}", self.mesh.grading)));
        }
        let c = &self.continuation;
        if !(c.eps0 > 0.0 && c.ratio > 0.0 && c.ratio < 1.0) {
            return Err(Error::Config("continuation needs eps0 > 0 and ratio in (0, 1)".into()));
        }
        let p = &self.params;
        if !(p.eps > 0.0 && p.rho > 0.0 && p.torsion_tol > 0.0 && p.slope_tol > 0.0) {
            return Err(Error::Config("params.eps, rho, torsion_tol and slope_tol must be positive".into()));
        }
        if !(p.alpha > 0.0 && p.theta_step > 0.0 && p.theta_tol > 0.0) {
            return Err(Error::Config("params.alpha, theta_step and theta_tol must be positive".into()));
        }
        if p.theta_probes.is_empty() || p.theta_probes.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config("params.theta_probes must be positive radii".into()));
        }
        if !(p.c_f1 >= 0.0 && p.c_f1 <= p.c_f2) {
            return Err(Error::Config("params needs 0 ≤ c_f1 ≤ c_f2".into()));
        }
        if p.gammas.iter().any(|&g| !(g >= 1.0)) {
            return Err(Error::Config("params.gammas must be at least 1".into()));
        }
        if !(p.monotone_tol >= 0.0) {
            return Err(Error::Config("params.monotone_tol must be nonnegative".into()));
        }
        self.window()?;
        if !self.output.deterministic {
            return Err(Error::Config("output.deterministic cannot be disabled".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text, &[]).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn overrides_are_typed() {
        let c = RunConfig::from_toml(
            "[problem]\np = 3.0\n",
            &["--problem.beta=1".into(), "--mesh.n=64".into(), "--params.levels=[8, 16, 32]".into()],
        )
        .unwrap();
        assert_eq!(c.problem.p, 3.0);
        assert_eq!(c.problem.beta, 1.0);
        assert_eq!(c.mesh.n, 64);
        assert_eq!(c.params.levels, vec![8, 16, 32]);
    }

    #[test]
    fn nested_and_string_overrides() {
        let c = RunConfig::from_toml(
            "",
            &[
                "--problem.domain=radial-ball".into(),
                "--problem.dimension=3".into(),
                "--solver.fixed_point.kind=relaxed".into(),
                "--solver.fixed_point.theta=0.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.problem.domain, DomainKind::RadialBall);
        assert_eq!(c.solver.fixed_point, crate::solver::FixedPointStrategy::Relaxed { theta: 0.5 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[problem]\ngamma = 1\n", &[]).is_err());
        assert!(RunConfig::from_toml("", &["--nosuch.key=1".into()]).is_err());
        assert!(parse_override("--beta=1").is_err());
        assert!(parse_override("--problem.beta").is_err());
    }

    #[test]
    fn threshold_rejected_before_compute() {
        let c = RunConfig::from_toml("", &["--problem.beta=2".into()]).unwrap();
        assert!(matches!(c.validate(), Err(Error::NonExistenceThreshold { .. })));
    }

    #[test]
    fn determinism_flag_is_fixed() {
        let c = RunConfig::from_toml("", &["--output.deterministic=false".into()]).unwrap();
        assert!(c.validate().is_err());
    }
}
