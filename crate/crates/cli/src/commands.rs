//! The four subcommands. Each writes its artifacts into the configured
//! output directory and returns a one-line summary for the terminal.

use std::path::PathBuf;

use antireduce::clebsch::{momentum_map, PhasePoint};
use antireduce::diagnostics::{
    collective_invariants, lie_poisson_invariants, project_trajectory, write_series_csv, write_trajectory_csv,
    InvariantSeries,
};
use antireduce::integrators::{estimate_order, step_count, NewtonSettings, OrderEstimate, StageSolver};
use antireduce::poisson::casimir_residual;
use antireduce::{
    compare_runs, integrate, AntiReducedField, ComparisonReport, DriftThresholds, IntegratorConfig, LiePoissonField,
    Method, Trajectory,
};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::output::{ensure_dir, write_file, write_json};
use crate::system::{describe_pinning, resolve, Resolved};
use crate::CliError;

/// Antisymmetry and Jacobi residuals above this (relative to the largest
/// structure constant squared) fail `check`.
pub const ALGEBRA_TOL: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const CASIMIR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn newton(cfg: &ExperimentConfig) -> NewtonSettings {
    NewtonSettings {
        tolerance: cfg.newton_tolerance,
        max_iterations: cfg.newton_max_iterations,
        solver: StageSolver::Newton,
    }
}

fn integrator_config(cfg: &ExperimentConfig, method: Method, dt: f64) -> IntegratorConfig {
    IntegratorConfig {
        newton: newton(cfg),
        ..IntegratorConfig::new(method, dt).with_stride(cfg.sample_stride)
    }
}

fn newton_stats(traj: &Trajectory) -> Value {
    let its = &traj.newton_iterations;
    if its.is_empty() {
        return Value::Null;
    }
    let total: usize = its.iter().sum();
    json!({
        "steps": its.len(),
        "total_iterations": total,
        "mean_iterations": total as f64 / its.len() as f64,
        "max_iterations": traj.max_newton_iterations(),
    })
}

fn series_summary(series: &[InvariantSeries]) -> Value {
    Value::Array(
        series
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "initial": s.initial,
                    "drift_slope": s.drift_slope(),
                    "max_abs_relative_error": s.max_abs_error(),
                    "truncated": s.truncated,
                })
            })
            .collect(),
    )
}

fn system_json(r: &Resolved) -> Value {
    let s = &r.system;
    json!({
        "name": s.name,
        "dimension": s.algebra.dim(),
        "sign": s.sign.to_string(),
        "parameters": s.params.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "mu0": s.mu0.as_slice(),
        "pinning": describe_pinning(&s.pinning),
        "seed": r.seed,
    })
}

fn qp_labels(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("q{i}"))
        .chain((1..=n).map(|i| format!("p{i}")))
        .collect()
}

fn mu_labels(r: &Resolved) -> Vec<String> {
    r.system.algebra.labels().to_vec()
}

pub fn check(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let r = resolve(cfg)?;
    let s = &r.system;
    let report = s.algebra.audit();
    let cmax = s.algebra.tensor().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let algebra_ok = report.is_lie_algebra(ALGEBRA_TOL * (1.0 + cmax * cmax));
    if report.center_dimension > 0 {
        log::warn!(
            "the algebra has a {}-dimensional center; the momentum map cannot reach every point of the dual",
            report.center_dimension
        );
    }

    let mut failures = Vec::new();
    if !algebra_ok {
        failures.push(format!(
            "structure constants are not a Lie algebra (antisymmetry {:.3e}, Jacobi {:.3e})",
            report.antisymmetry_residual, report.jacobi_residual
        ));
    }
    let gradient = s.ham.energy.gradient_check(&s.mu0);
    let gradient_json = match &gradient {
        Ok(g) => {
            if *g > GRADIENT_TOL {
                failures.push(format!("energy gradient disagrees with finite differences ({g:.3e})"));
            }
            json!(g)
        }
        Err(e) => {
            failures.push(format!("energy gradient at mu0: {e}"));
            json!(e.to_string())
        }
    };
    let mut casimirs = Vec::new();
    for c in &s.ham.casimirs {
        let res = casimir_residual(&s.algebra, c, &s.mu0).and_then(|res| {
            let scale = 1.0 + c.gradient(&s.mu0)?.norm() * s.mu0.norm();
            Ok((res, res <= CASIMIR_TOL * scale))
        });
        match res {
            Ok((res, ok)) => {
                if !ok {
                    failures.push(format!("`{}` is not a Casimir at mu0 (residual {res:.3e})", c.name()));
                }
                casimirs.push(json!({"name": c.name(), "residual": res, "ok": ok}));
            }
            Err(e) => {
                failures.push(format!("`{}` at mu0: {e}", c.name()));
                casimirs.push(json!({"name": c.name(), "error": e.to_string()}));
            }
        }
    }
    // Informational: whether the configured pinning reaches mu0.
    let initial = if algebra_ok {
        match s.initial_point() {
            Ok(z) => json!({
                "q0": z.q.as_slice(),
                "p0": z.p.as_slice(),
                "residual": momentum_map(&s.algebra, &z, s.sign).sub(&s.mu0).max_abs(),
            }),
            Err(e) => {
                log::warn!("initial point: {e}");
                json!({"error": e.to_string()})
            }
        }
    } else {
        Value::Null
    };

    let doc = json!({
        "command": "check",
        "system": system_json(&r),
        "algebra": {
            "dimension": report.dimension,
            "antisymmetry_residual": report.antisymmetry_residual,
            "jacobi_residual": report.jacobi_residual,
            "center_dimension": report.center_dimension,
            "killing_rank": report.killing_rank,
            "semisimple": report.semisimple,
            "killing_matrix": (0..report.dimension)
                .map(|i| (0..report.dimension).map(|j| report.killing_matrix[(i, j)]).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        },
        "energy_gradient_check": gradient_json,
        "casimir_residuals": casimirs,
        "initial_point": initial,
        "failures": failures,
        "ok": failures.is_empty(),
    });
    ensure_dir(&cfg.out_dir)?;
    let path = write_json(&cfg.out_dir, "check.json", &doc)?;
    println!("{report}");
    if failures.is_empty() {
        Ok(CommandOutput {
            summary: format!(
                "check {}: ok (semisimple={}, center_dim={})",
                s.name, report.semisimple, report.center_dimension
            ),
            files: vec![path],
        })
    } else {
        Err(CliError::Failed(format!(
            "check {} failed: {}",
            s.name,
            failures.join("; ")
        )))
    }
}

fn collective_run(
    r: &Resolved,
    cfg: &ExperimentConfig,
    method: Method,
) -> Result<(PhasePoint, Trajectory, Vec<InvariantSeries>), CliError> {
    let s = &r.system;
    let z0 = s.initial_point()?;
    log::info!("initial point q0 = {:?}, p0 = {:?}", z0.q.as_slice(), z0.p.as_slice());
    let field = AntiReducedField {
        algebra: &s.algebra,
        ham: &s.ham,
        sign: s.sign,
    };
    let traj = integrate(&field, &z0.to_flat(), &integrator_config(cfg, method, r.dt), r.t_end)?;
    let series = collective_invariants(&s.algebra, &s.ham, s.sign, &traj)?;
    Ok((z0, traj, series))
}

pub fn run(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let r = resolve(cfg)?;
    let s = &r.system;
    let (z0, traj, series) = collective_run(&r, cfg, cfg.integrator)?;
    let mu = project_trajectory(&s.algebra, s.sign, &traj);

    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let mut files = vec![
        write_file(dir, "qp.csv", |w| {
            write_trajectory_csv(w, &qp_labels(s.algebra.dim()), &traj)
        })?,
        write_file(dir, "mu.csv", |w| write_trajectory_csv(w, &mu_labels(&r), &mu))?,
        write_file(dir, "invariants.csv", |w| write_series_csv(w, &traj.times, &series))?,
    ];
    let doc = json!({
        "command": "run",
        "system": system_json(&r),
        "integrator": cfg.integrator.to_string(),
        "dt": r.dt,
        "t_end": r.t_end,
        "sample_stride": cfg.sample_stride,
        "steps": step_count(r.t_end, r.dt),
        "rows": traj.len(),
        "newton_tolerance": cfg.newton_tolerance,
        "initial_point": {"q0": z0.q.as_slice(), "p0": z0.p.as_slice()},
        "newton": newton_stats(&traj),
        "invariants": series_summary(&series),
    });
    files.push(write_json(dir, "summary.json", &doc)?);
    Ok(CommandOutput {
        summary: format!(
            "run {}: {} with dt = {} to t = {}, {} rows",
            s.name,
            cfg.integrator,
            r.dt,
            r.t_end,
            traj.len()
        ),
        files,
    })
}

fn verdicts_json(report: &ComparisonReport) -> Value {
    Value::Array(
        report
            .verdicts
            .iter()
            .map(|v| {
                json!({
                    "name": v.name,
                    "collective_slope": v.collective_slope,
                    "baseline_slope": v.baseline_slope,
                    "collective_max_abs_relative_error": v.collective_max,
                    "baseline_max_abs_relative_error": v.baseline_max,
                    "drift_free": v.drift_free,
                })
            })
            .collect(),
    )
}

/// Collective run with the configured implicit method against RK4 on the
/// Lie-Poisson equation, same `mu0`, `dt` and output grid.
pub fn compare(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    if cfg.integrator == Method::Rk4 {
        return Err(CliError::Usage(
            "compare runs RK4 as the baseline; choose midpoint or gl4 for the collective run".into(),
        ));
    }
    let r = resolve(cfg)?;
    let s = &r.system;
    let (collective, baseline) = std::thread::scope(|scope| {
        let c = scope.spawn(|| collective_run(&r, cfg, cfg.integrator));
        let b = scope.spawn(|| -> Result<_, CliError> {
            let field = LiePoissonField {
                algebra: &s.algebra,
                ham: &s.ham,
                sign: s.sign,
            };
            let traj = integrate(
                &field,
                s.mu0.as_slice(),
                &integrator_config(cfg, Method::Rk4, r.dt),
                r.t_end,
            )?;
            let series = lie_poisson_invariants(&s.ham, &traj)?;
            Ok((traj, series))
        });
        (
            c.join().expect("collective run panicked"),
            b.join().expect("baseline run panicked"),
        )
    });
    let (z0, ctraj, cseries) = collective?;
    let (btraj, bseries) = baseline?;
    let thresholds = DriftThresholds {
        factor: cfg.drift_factor,
        absolute_floor: cfg.drift_floor,
    };
    let report = if step_count(r.t_end, r.dt) == 0 {
        ComparisonReport {
            thresholds,
            verdicts: Vec::new(),
        }
    } else {
        compare_runs(&cseries, &bseries, thresholds)?
    };

    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let cmu = project_trajectory(&s.algebra, s.sign, &ctraj);
    let mut files = vec![
        write_file(dir, "collective_mu.csv", |w| {
            write_trajectory_csv(w, &mu_labels(&r), &cmu)
        })?,
        write_file(dir, "baseline_mu.csv", |w| {
            write_trajectory_csv(w, &mu_labels(&r), &btraj)
        })?,
        write_file(dir, "collective_invariants.csv", |w| {
            write_series_csv(w, &ctraj.times, &cseries)
        })?,
        write_file(dir, "baseline_invariants.csv", |w| {
            write_series_csv(w, &btraj.times, &bseries)
        })?,
    ];
    let doc = json!({
        "command": "compare",
        "system": system_json(&r),
        "collective_integrator": cfg.integrator.to_string(),
        "baseline_integrator": Method::Rk4.to_string(),
        "dt": r.dt,
        "t_end": r.t_end,
        "sample_stride": cfg.sample_stride,
        "rows": ctraj.len(),
        "initial_point": {"q0": z0.q.as_slice(), "p0": z0.p.as_slice()},
        "newton": newton_stats(&ctraj),
        "thresholds": {"factor": thresholds.factor, "absolute_floor": thresholds.absolute_floor},
        "collective_invariants": series_summary(&cseries),
        "baseline_invariants": series_summary(&bseries),
        "verdicts": verdicts_json(&report),
        "all_drift_free": report.all_drift_free(),
    });
    files.push(write_json(dir, "comparison.json", &doc)?);
    let flagged: Vec<String> = report
        .verdicts
        .iter()
        .map(|v| format!("{}={}", v.name, if v.drift_free { "drift-free" } else { "drifts" }))
        .collect();
    Ok(CommandOutput {
        summary: format!(
            "compare {}: {} vs rk4, {}",
            s.name,
            cfg.integrator,
            if flagged.is_empty() {
                "no verdicts (no steps)".to_string()
            } else {
                flagged.join(", ")
            }
        ),
        files,
    })
}

fn order_json(method: Method, field: &str, est: &OrderEstimate) -> Value {
    json!({
        "method": method.to_string(),
        "field": field,
        "slope": est.slope,
        "errors": est.errors.iter().map(|(dt, e)| json!({"dt": dt, "error": e})).collect::<Vec<_>>(),
        "excluded_dts": est.excluded,
    })
}

/// Empirical orders: midpoint and GL4 on the anti-reduced system, RK4 on
/// the Lie-Poisson equation.
pub fn convergence(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let r = resolve(cfg)?;
    let s = &r.system;
    let z0 = s.initial_point()?;
    let anti = AntiReducedField {
        algebra: &s.algebra,
        ham: &s.ham,
        sign: s.sign,
    };
    let lp = LiePoissonField {
        algebra: &s.algebra,
        ham: &s.ham,
        sign: s.sign,
    };
    let t_end = cfg.convergence_t_end;
    let nt = newton(cfg);
    let mut rows = Vec::new();
    for (method, field_name) in [
        (Method::Midpoint, "anti_reduced"),
        (Method::Gl4, "anti_reduced"),
        (Method::Rk4, "lie_poisson"),
    ] {
        let est = if field_name == "anti_reduced" {
            estimate_order(
                &anti,
                &z0.to_flat(),
                &method.tableau(),
                &nt,
                t_end,
                &cfg.convergence_dts,
                None,
            )?
        } else {
            estimate_order(
                &lp,
                s.mu0.as_slice(),
                &method.tableau(),
                &nt,
                t_end,
                &cfg.convergence_dts,
                None,
            )?
        };
        log::info!("{method} on {field_name}: order {:.3}", est.slope);
        rows.push((method, field_name, est));
    }

    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let mut files = vec![write_file(dir, "convergence.csv", |w| {
        use std::io::Write;
        writeln!(w, "method,field,dt,error")?;
        for (m, f, est) in &rows {
            for (dt, e) in &est.errors {
                writeln!(w, "{m},{f},{dt:.16e},{e:.16e}")?;
            }
        }
        Ok(())
    })?];
    let doc = json!({
        "command": "convergence",
        "system": system_json(&r),
        "t_end": t_end,
        "dts": cfg.convergence_dts,
        "newton_tolerance": cfg.newton_tolerance,
        "orders": rows.iter().map(|(m, f, e)| order_json(*m, f, e)).collect::<Vec<_>>(),
    });
    files.push(write_json(dir, "convergence.json", &doc)?);
    let summary = rows
        .iter()
        .map(|(m, _, e)| format!("{m} {:.3}", e.slope))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(CommandOutput {
        summary: format!("convergence {}: {summary}", s.name),
        files,
    })
}
