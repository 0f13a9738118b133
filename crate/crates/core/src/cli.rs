//! The `singular-pq` command line: one subcommand per pipeline, configured
//! by a TOML file plus `--section.key=value` overrides.
//!
//! Exit codes: 0 when every asserted check passes, 2 when a check fails,
//! 1 on usage, configuration, solver or I/O errors. Errors are also written
//! as a JSON record to stderr and, when the run directory exists, to
//! `error.json`.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{emit_plot_data, RunDir};
use crate::barriers::{theta_scaling_check, theta_scaling_exponents, theta_shoot, torsion_oracle, BarrierParams};
use crate::config::RunConfig;
use crate::diagnostics::{
    comparison_check, fit_boundary_exponent, fit_log_regime, nonexistence_probe, solve_regularized,
    sobolev_batch, verdict_document, verdicts_antitone, SobolevVerdict,
};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::mesh::{build_mesh, DomainKind, Mesh};
use crate::solver::{continuation, initial_field, picard_solve, solve_direct, solve_with_source};
use crate::suite;
use crate::weights::Regime;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Regularized solve at `params.eps`.
    Solve,
    /// ε-continuation from `continuation.eps0`.
    Continue,
    /// Direct minimization in the regime β + δ < 1.
    Direct,
    /// Solver against the semi-analytic torsion solution.
    OracleTorsion,
    /// Θ shooting and its scaling law.
    OracleTheta,
    /// Boundary-exponent fit for the configured regime.
    ProbeRegime,
    /// Sobolev-threshold probe over mesh levels.
    ProbeSobolev,
    /// Comparison of the solutions for `c_f1 ≤ c_f2`.
    ProbeCompare,
    /// β̃-family probe for β ≥ p.
    ProbeNonexistence,
    /// The full acceptance suite.
    VerifyAll,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "singular-pq",
    version,
    about = "Solver and verification harness for singular (p,q)-Laplacian problems",
    after_help = "Any --section.key=value flag overrides the configuration file, e.g. --problem.beta=1.5"
)]
struct Cli {
    command: Command,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Upper bound on concurrent solves in probes.
    #[arg(long)]
    jobs: Option<usize>,
}

/// One asserted check of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
        }
    }

    fn holds(name: &str, pass: bool) -> Self {
        Check {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            tolerance: 1.0,
        }
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Config(_)
        | Error::InvalidDomain(_)
        | Error::InvalidMesh(_)
        | Error::InvalidProblem(_)
        | Error::InvalidSettings(_)
        | Error::NonExistenceThreshold { .. }
        | Error::RegimeMismatch(_) => "config",
        Error::Io(_) => "io",
        _ => "solver",
    }
}

fn error_record(kind: &str, command: Option<&str>, message: &str) -> Value {
    json!({ "kind": kind, "command": command, "message": message, "exit_code": EXIT_ERROR })
}

/// Splits `--section.key=value` overrides from the flags clap parses.
fn split_overrides(args: &[String]) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for (i, a) in args.iter().enumerate() {
        let is_override = i > 0
            && a.starts_with("--")
            && a.split_once('=').is_some_and(|(k, _)| k.contains('.'));
        if is_override {
            overrides.push(a.clone());
        } else {
            rest.push(a.clone());
        }
    }
    (rest, overrides)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run(args: &[String]) -> i32 {
    let (rest, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(&rest) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_PASS;
            }
            let record = error_record("usage", None, &e.to_string());
            eprintln!("{record}");
            return EXIT_ERROR;
        }
    };
    let command = cli.command.name();
    let config = match RunConfig::load(cli.config.as_deref(), &overrides).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            let record = error_record(error_kind(&e), Some(&command), &e.to_string());
            eprintln!("{record}");
            // the configured directory may still be readable for the record
            if let Ok(c) = RunConfig::load(cli.config.as_deref(), &overrides) {
                if let Ok(mut dir) = RunDir::create(&output_base(&c, cli.command)) {
                    let _ = dir.write_json("error.json", &record);
                    let _ = dir.finish(&command, "error", Value::Null);
                }
            }
            return EXIT_ERROR;
        }
    };
    match cli.jobs {
        Some(0) => {
            eprintln!("{}", error_record("usage", Some(&command), "--jobs must be at least 1"));
            EXIT_ERROR
        }
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| execute(cli.command, &config)),
            Err(e) => {
                eprintln!("{}", error_record("usage", Some(&command), &e.to_string()));
                EXIT_ERROR
            }
        },
        None => execute(cli.command, &config),
    }
}

fn output_base(config: &RunConfig, command: Command) -> PathBuf {
    config
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(command.name()))
}

/// Runs `command` with a validated configuration.
pub fn execute(command: Command, config: &RunConfig) -> i32 {
    let name = command.name();
    let config_json = serde_json::to_value(config).unwrap_or(Value::Null);
    let mut run = match RunDir::create(&output_base(config, command)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", error_record("io", Some(&name), &e.to_string()));
            return EXIT_ERROR;
        }
    };
    let started = Instant::now();
    let outcome = config
        .to_toml()
        .and_then(|text| run.write("config.toml", text.as_bytes()))
        .and_then(|_| dispatch(command, config, &mut run));
    let (code, status) = match outcome {
        Ok(checks) => {
            for c in &checks {
                println!(
                    "{} {}: {:?} (tolerance {:?})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
            match emit_plot_data(run.root()) {
                Ok(bundle) => {
                    if bundle.written.is_empty() {
                        eprintln!("warning: no plot data inputs in this run");
                    }
                    for rel in &bundle.written {
                        if let Err(e) = run.register(rel) {
                            eprintln!("warning: {e}");
                        }
                    }
                }
                Err(e) => eprintln!("warning: plot data not emitted: {e}"),
            }
            if checks.iter().all(|c| c.pass) {
                (EXIT_PASS, "pass")
            } else {
                (EXIT_CHECK_FAILED, "check-failed")
            }
        }
        Err(e) => {
            let record = error_record(error_kind(&e), Some(&name), &e.to_string());
            eprintln!("{record}");
            let _ = run.write_json("error.json", &record);
            (EXIT_ERROR, "error")
        }
    };
    run.record_time("total", started.elapsed().as_secs_f64());
    let root = run.root().display().to_string();
    match run.finish(&name, status, config_json) {
        Ok(_) => {
            println!("{name}: {status}, artifacts in {root}");
            code
        }
        Err(e) => {
            eprintln!("{}", error_record("io", Some(&name), &e.to_string()));
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command, config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    match command {
        Command::Solve => cmd_solve(config, run),
        Command::Continue => cmd_continue(config, run),
        Command::Direct => cmd_direct(config, run),
        Command::OracleTorsion => cmd_oracle_torsion(config, run),
        Command::OracleTheta => cmd_oracle_theta(config, run),
        Command::ProbeRegime => cmd_probe_regime(config, run),
        Command::ProbeSobolev => cmd_probe_sobolev(config, run),
        Command::ProbeCompare => cmd_probe_compare(config, run),
        Command::ProbeNonexistence => cmd_probe_nonexistence(config, run),
        Command::VerifyAll => cmd_verify_all(config, run),
    }
}

fn mesh_of(config: &RunConfig) -> Result<Arc<Mesh>> {
    Ok(Arc::new(build_mesh(config.domain()?, config.mesh.n, config.mesh.grading)?))
}

fn write_verdict(
    run: &mut RunDir,
    name: &str,
    config: &RunConfig,
    parameters: Value,
    data: Value,
    checks: &[Check],
) -> Result<()> {
    let verdict = if checks.iter().all(|c| c.pass) { "pass" } else { "fail" };
    let doc = verdict_document(name, &config.spec()?, parameters, data, verdict, json!(checks));
    run.write_json(&format!("verdicts/{name}.json"), &doc)
}

fn cmd_solve(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let mesh = mesh_of(config)?;
    let eps = config.params.eps;
    let started = Instant::now();
    let (field, trace) = match picard_solve(eps, &spec, &config.solver, &initial_field(&spec, &mesh, eps)) {
        Ok(out) => {
            let trace = json!({
                "eps": eps,
                "start": "lower-barrier",
                "picard_iterations": out.picard_iterations,
                "newton_iterations": out.newton_iterations,
                "fixed_point_residual": out.fixed_point_residual,
                "energy": out.energy,
                "descent_violations": out.descent_violations,
            });
            (out.field, trace)
        }
        // the barrier start can fail for strongly singular data
        Err(_) => {
            let field = solve_regularized(&spec, &mesh, &config.solver, eps)?;
            (field, json!({ "eps": eps, "start": "continuation" }))
        }
    };
    run.record_time("solve", started.elapsed().as_secs_f64());
    run.write("fields/mesh.csv", mesh.to_csv().as_bytes())?;
    run.write("fields/u.csv", field.to_csv().as_bytes())?;
    run.write_json("traces/solve.json", &trace)?;
    let mut checks = vec![
        Check::holds("dirichlet", field.satisfies_dirichlet()),
        Check::holds("nonnegative", field.is_nonnegative()),
    ];
    if let Some(r) = trace["fixed_point_residual"].as_f64() {
        checks.push(Check::at_most("fixed_point_residual", r, config.solver.picard_tol));
    }
    if let Some(v) = trace["descent_violations"].as_f64() {
        checks.push(Check::at_most("descent_violations", v, 0.0));
    }
    let fit = fit_boundary_exponent(&field, config.window()?).ok();
    write_verdict(
        run,
        "solve",
        config,
        json!({ "eps": eps, "n": config.mesh.n, "grading": config.mesh.grading }),
        json!({ "sup_norm": field.sup_norm(), "exponent_fit": fit }),
        &checks,
    )?;
    Ok(checks)
}

fn cmd_continue(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let mesh = mesh_of(config)?;
    let c = &config.continuation;
    let trace = continuation(&spec, &mesh, &config.solver, c.eps0, c.ratio, c.steps)?;
    run.write("fields/mesh.csv", mesh.to_csv().as_bytes())?;
    let mut records = Vec::new();
    for (k, r) in trace.records.iter().enumerate() {
        run.write(&format!("fields/u_eps{k:02}.csv"), r.field().to_csv().as_bytes())?;
        run.record_time(&format!("eps{k:02}"), r.wall_time_s);
        let mut v = serde_json::to_value(r)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_s");
            obj.insert("sup_norm".into(), json!(r.field().sup_norm()));
        }
        records.push(v);
    }
    run.write_json(
        "traces/continuation.json",
        &json!({ "monotone_mode": trace.monotone_mode, "records": records }),
    )?;
    let mut checks = Vec::new();
    if trace.monotone_mode {
        let worst = trace
            .records
            .iter()
            .filter_map(|r| r.min_increment)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most("max_nodewise_decrease", -worst.min(0.0), config.params.monotone_tol));
    }
    for r in &trace.records {
        checks.push(Check::at_most(
            &format!("fixed_point_residual(eps={:e})", r.eps),
            r.fixed_point_residual,
            config.solver.picard_tol,
        ));
    }
    write_verdict(
        run,
        "continuation",
        config,
        json!(config.continuation),
        json!({ "eps": trace.eps_values() }),
        &checks,
    )?;
    Ok(checks)
}

fn cmd_direct(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let mesh = mesh_of(config)?;
    let out = solve_direct(&spec, &mesh, &config.solver)?;
    run.write("fields/mesh.csv", mesh.to_csv().as_bytes())?;
    run.write("fields/u_direct.csv", out.field.to_csv().as_bytes())?;
    run.write_json(
        "traces/direct.json",
        &json!({
            "newton_iterations": out.newton_iterations,
            "energy": out.energy,
            "certificate_energy": out.certificate_energy,
        }),
    )?;
    let checks = vec![
        Check::at_most("energy_minus_certificate", out.energy - out.certificate_energy, 0.0),
        Check::holds("dirichlet", out.field.satisfies_dirichlet()),
        Check::holds("nonnegative", out.field.is_nonnegative()),
    ];
    let fit = fit_boundary_exponent(&out.field, config.window()?).ok();
    write_verdict(run, "direct", config, json!({}), json!({ "exponent_fit": fit }), &checks)?;
    Ok(checks)
}

/// Closed form for `p = q = 2`, where the operator is `-2Δ`.
fn linear_torsion(rho: f64, mesh: &Arc<Mesh>) -> DiscreteField {
    let domain = *mesh.domain();
    DiscreteField::from_fn(mesh.clone(), |x, _| match domain.kind() {
        DomainKind::Interval => {
            let c = 0.5 * domain.extent();
            rho * (c * c - (x - c) * (x - c)) / 4.0
        }
        DomainKind::RadialBall => {
            let r = domain.extent();
            rho * (r * r - x * x) / (4.0 * domain.dimension() as f64)
        }
    })
}

fn cmd_oracle_torsion(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let mesh = mesh_of(config)?;
    let rho = config.params.rho;
    let oracle = torsion_oracle(rho, &spec, &mesh)?;
    let source = vec![rho; mesh.element_count()];
    let (u, _) = solve_with_source(&mesh, spec.p, spec.q, &source, &config.solver)?;
    run.write("fields/torsion_oracle.csv", oracle.to_csv().as_bytes())?;
    run.write("fields/torsion_solver.csv", u.to_csv().as_bytes())?;
    let err = u.sup_distance(&oracle);
    let mut checks = vec![Check::at_most("solver_vs_oracle", err, config.params.torsion_tol * oracle.sup_norm())];
    let mut closed = Value::Null;
    if spec.p == 2.0 && spec.q == 2.0 {
        let e = oracle.sup_distance(&linear_torsion(rho, &mesh));
        checks.push(Check::at_most("oracle_vs_closed_form", e, 1e-10));
        closed = json!(e);
    }
    write_verdict(
        run,
        "oracle-torsion",
        config,
        json!({ "rho": rho }),
        json!({ "solver_error": err, "closed_form_error": closed, "sup_norm": oracle.sup_norm() }),
        &checks,
    )?;
    Ok(checks)
}

fn cmd_oracle_theta(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let p = &config.params;
    let r_max = p.theta_probes.iter().copied().fold(0.0, f64::max);
    let (a, b) = theta_scaling_exponents(&spec);
    let table = theta_shoot(p.alpha, &spec, r_max, p.theta_step)?;
    let unit = theta_shoot(1.0, &spec, 1.1 * p.alpha.powf(-b) * r_max, p.theta_step)?;
    run.write("fields/theta_alpha.csv", table.to_csv().as_bytes())?;
    run.write("fields/theta_unit.csv", unit.to_csv().as_bytes())?;
    let err = theta_scaling_check(&table, &unit, &spec, &p.theta_probes)?;
    let checks = vec![Check::at_most("scaling_relative_error", err, p.theta_tol)];
    write_verdict(
        run,
        "oracle-theta",
        config,
        json!({ "alpha": p.alpha, "h": p.theta_step, "probes": p.theta_probes }),
        json!({ "a": a, "b": b, "error": err, "r_alpha": table.r_alpha, "r_unit": unit.r_alpha }),
        &checks,
    )?;
    Ok(checks)
}

fn cmd_probe_regime(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    if !(spec.beta < spec.p) {
        return Err(Error::RegimeMismatch("regime probes need β < p".into()));
    }
    let mesh = mesh_of(config)?;
    let field = solve_regularized(&spec, &mesh, &config.solver, config.params.eps)?;
    run.write("fields/u.csv", field.to_csv().as_bytes())?;
    let window = config.window()?;
    let tol = config.params.slope_tol;
    let (checks, data) = match spec.regime() {
        Regime::Critical => {
            let l = config.params.log_scale.unwrap_or(BarrierParams::for_spec(&spec).log_scale);
            let fit = fit_log_regime(&field, &spec, l, window)?;
            let checks = vec![
                Check::at_most("band_ratio", fit.band_ratio(), 2.0),
                Check {
                    name: "power_slope_drift".into(),
                    pass: fit.drift >= 0.02,
                    value: fit.drift,
                    tolerance: 0.02,
                },
            ];
            (checks, json!({ "log_fit": fit, "log_scale": l }))
        }
        regime => {
            let target = if regime == Regime::Sublinear { 1.0 } else { spec.tau() };
            let fit = fit_boundary_exponent(&field, window)?;
            let checks = vec![Check::at_most("slope_error", (fit.slope - target).abs(), tol)];
            (checks, json!({ "fit": fit, "target": target }))
        }
    };
    write_verdict(
        run,
        "regime",
        config,
        json!({ "eps": config.params.eps, "regime": spec.regime(), "window": window }),
        data,
        &checks,
    )?;
    Ok(checks)
}

fn cmd_probe_sobolev(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let plan = config.sobolev_plan();
    let probes = sobolev_batch(&spec, &config.solver, &config.params.rhos, &plan)?;
    let rho0 = spec.sobolev_threshold();
    let mut checks = vec![Check::holds("verdicts_antitone", verdicts_antitone(&probes))];
    for probe in &probes {
        // no prediction exactly at the threshold
        if (probe.rho - rho0).abs() < 1e-12 {
            continue;
        }
        let expected = if probe.rho > rho0 {
            SobolevVerdict::Bounded
        } else {
            SobolevVerdict::Divergent
        };
        checks.push(Check::holds(&format!("verdict(rho={})", probe.rho), probe.verdict == expected));
    }
    write_verdict(
        run,
        "sobolev",
        config,
        json!({ "plan": plan, "rhos": config.params.rhos }),
        json!({ "rho0": rho0, "probes": probes }),
        &checks,
    )?;
    Ok(checks)
}

fn cmd_probe_compare(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let mesh = mesh_of(config)?;
    let p = &config.params;
    let report = comparison_check(&spec, &mesh, &config.solver, p.c_f1, p.c_f2, p.eps)?;
    // outside the hypothesis of the ordering the run is exploratory
    let checks = match &report.notice {
        Some(notice) => {
            eprintln!("notice: {notice}");
            Vec::new()
        }
        None => vec![Check::at_most("max_violation", report.violation, report.tolerance)],
    };
    write_verdict(run, "compare", config, json!({ "c_f1": p.c_f1, "c_f2": p.c_f2, "eps": p.eps }), json!(report), &checks)?;
    Ok(checks)
}

fn cmd_probe_nonexistence(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let spec = config.spec()?;
    let mesh = mesh_of(config)?;
    let plan = config.hardy_plan();
    let report = nonexistence_probe(&spec, &config.solver, &mesh, config.window()?, &plan, &config.params.gammas)?;
    let mut checks = vec![
        Check::holds("tau_decreasing", report.tau_decreasing),
        Check::holds("hardy_divergent", report.hardy_divergent),
    ];
    for e in &report.entries {
        checks.push(Check::at_most(
            &format!("tau_fit_error(beta_tilde={})", e.beta_tilde),
            (e.tau_fit - e.tau_expected).abs(),
            0.03,
        ));
    }
    write_verdict(
        run,
        "nonexistence",
        config,
        json!({ "plan": plan, "gammas": config.params.gammas, "window": config.window()? }),
        json!(report),
        &checks,
    )?;
    Ok(checks)
}

fn cmd_verify_all(config: &RunConfig, run: &mut RunDir) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut outcomes = Vec::new();
    for id in suite::CRITERIA {
        let outcome = suite::run_criterion(id, &config.solver);
        println!("{}", outcome.line());
        run.record_time(&format!("criterion{id:02}"), outcome.wall_time_s);
        checks.push(Check::holds(&format!("criterion {id:02} {}", outcome.title), outcome.pass));
        let mut v = serde_json::to_value(&outcome)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_s");
        }
        outcomes.push(v);
    }
    run.write_json("verdicts/acceptance.json", &json!({ "criteria": outcomes }))?;
    Ok(checks)
}
