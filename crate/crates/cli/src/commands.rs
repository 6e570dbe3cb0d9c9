use std::fmt::Write as _;

use convex_flow::batch::{map_par, with_jobs};
use convex_flow::body::{body_table, realize, BodyRecipe};
use convex_flow::corpus::pairs;
use convex_flow::curvature::{inverse_concavity_probe, CurvatureKind};
use convex_flow::flow::{monitor_suite, preflight, run, trace_csv, trace_summary, FlowConfig, FlowRun, RunStatus};
use convex_flow::forcing::{
    check_condition_i, check_condition_ii, check_condition_iii, check_uniqueness_condition, ForcingSpec,
};
use convex_flow::functionals::{
    dual_volume, inequality_suite, modified_quermassintegral, u_potential, v_potential, variational_check,
    FunctionalReport, SuiteParams,
};
use convex_flow::stationary::{default_seeds, solve_stationary, stationary_summary};

use crate::config::{Command, ConfigError, RunConfig};
use crate::output::Artifacts;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    CheckFailed = 1,
    InvalidInput = 2,
    NotConverged = 3,
}

fn lib(context: &str) -> impl Fn(convex_flow::Error) -> ConfigError + '_ {
    move |e| ConfigError(format!("{context}: {e}"))
}

pub fn dispatch(cfg: &RunConfig, out: &Artifacts, jobs: usize) -> Result<Exit, ConfigError> {
    match cfg.command {
        Command::Check => cmd_check(cfg, out),
        Command::Run => cmd_run(cfg, out),
        Command::Solve => with_jobs(jobs, || cmd_solve(cfg, out)).map_err(lib("jobs"))?,
        Command::Functionals => cmd_functionals(cfg, out),
        Command::Inequalities => cmd_inequalities(cfg, out),
        Command::Sweep => with_jobs(jobs, || cmd_sweep(cfg, out)).map_err(lib("jobs"))?,
    }
}

struct CheckRow {
    name: &'static str,
    verdict: &'static str,
    detail: String,
}

fn pass_fail(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn check_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>, ConfigError> {
    let flow = &cfg.flow;
    let kind = flow.grid.kind;
    let mut rows = Vec::new();
    let ci = check_condition_i(&flow.forcing, flow.beta, kind, cfg.check.directions).map_err(lib("condition (i)"))?;
    rows.push(CheckRow {
        name: "condition_i",
        verdict: ci.verdict.as_str(),
        detail: format!("s_minus={} s_plus={}", opt(ci.s_minus), opt(ci.s_plus)),
    });
    if flow.curvature == CurvatureKind::Gauss {
        rows.push(CheckRow { name: "condition_ii", verdict: "not applicable", detail: "gauss curvature".into() });
    } else {
        let grid = flow.build_grid().map_err(lib("grid"))?;
        let body = realize(&flow.initial, &grid).map_err(lib("initial body"))?;
        let r = check_condition_ii(&flow.forcing, flow.beta, &body).map_err(lib("condition (ii)"))?;
        rows.push(CheckRow {
            name: "condition_ii",
            verdict: pass_fail(r.pass),
            detail: format!("min_eigenvalue={:.6e} node={}", r.min_eigenvalue, r.node),
        });
    }
    if flow.forcing.depends_on_u_rho_only() {
        let r = check_condition_iii(&flow.forcing, flow.beta).map_err(lib("condition (iii)"))?;
        rows.push(CheckRow {
            name: "condition_iii",
            verdict: pass_fail(r.pass),
            detail: format!("max_value={:.6e}", r.max_value),
        });
    } else {
        rows.push(CheckRow { name: "condition_iii", verdict: "not applicable", detail: "G depends on x".into() });
    }
    let u = check_uniqueness_condition(&flow.forcing, flow.beta, kind, cfg.check.uniqueness_samples, cfg.seed)
        .map_err(lib("uniqueness condition"))?;
    rows.push(CheckRow {
        name: "uniqueness",
        verdict: pass_fail(u.pass),
        detail: format!("counterexamples={} worst_ratio={:.6e}", u.counterexamples, u.worst_ratio),
    });
    let spec = flow.curvature_spec().map_err(lib("curvature"))?;
    let c = inverse_concavity_probe(&spec, cfg.check.concavity_samples, cfg.seed).map_err(lib("inverse concavity"))?;
    rows.push(CheckRow {
        name: "inverse_concavity",
        verdict: pass_fail(c.pass),
        detail: format!("violations={} worst={:.6e}", c.violations, c.worst_violation),
    });
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.6e}"))
}

fn cmd_check(cfg: &RunConfig, out: &Artifacts) -> Result<Exit, ConfigError> {
    let rows = check_rows(cfg)?;
    let mut table = String::from("check,verdict,detail\n");
    for r in &rows {
        let _ = writeln!(table, "{},{},{}", r.name, r.verdict, r.detail);
    }
    print!("{table}");
    out.write("checks.csv", &table)?;
    let ok = rows.iter().all(|r| r.verdict == "pass" || r.verdict == "not applicable");
    Ok(if ok { Exit::Ok } else { Exit::CheckFailed })
}

/// Preflight gate shared by the flow commands. Returns the blocking reasons
/// when the run may not start.
fn gate(flow: &FlowConfig) -> Result<Vec<String>, ConfigError> {
    let grid = flow.build_grid().map_err(lib("grid"))?;
    let body = realize(&flow.initial, &grid).map_err(lib("initial body"))?;
    let blocking = preflight(flow, &body).map_err(lib("preflight"))?.blocking();
    Ok(if flow.waive_checks { Vec::new() } else { blocking })
}

fn write_blocked(out: &Artifacts, blocking: &[String]) -> Result<(), ConfigError> {
    let mut text = String::from("status = blocked\n");
    for b in blocking {
        let _ = writeln!(text, "blocking = {b}");
    }
    out.write("verdict.txt", &text)
}

fn write_run(out: &Artifacts, r: &FlowRun) -> Result<bool, ConfigError> {
    let monitors = monitor_suite(&r.trace);
    out.write("trace.csv", &trace_csv(&r.trace))?;
    out.write("body.csv", &body_table(&r.body))?;
    out.write("verdict.txt", &trace_summary(&r.trace, &monitors))?;
    if matches!(r.trace.status, RunStatus::NotConverged | RunStatus::Stalled) {
        let last = r.trace.final_row();
        out.write(
            "failure.txt",
            &format!("status = {}\ntime = {:.17e}\nresidual = {:.17e}\n", r.trace.status.as_str(), last.t, last.residual),
        )?;
    }
    Ok(monitors.pass())
}

fn cmd_run(cfg: &RunConfig, out: &Artifacts) -> Result<Exit, ConfigError> {
    let blocking = gate(&cfg.flow)?;
    if !blocking.is_empty() {
        write_blocked(out, &blocking)?;
        eprintln!("hypothesis checks failed ({}); pass --waive-checks to run anyway", blocking.join("; "));
        return Ok(Exit::CheckFailed);
    }
    let r = match run(&cfg.flow) {
        Ok(r) => r,
        Err(e) => {
            out.write("failure.txt", &format!("error = {e}\n"))?;
            return Err(ConfigError(format!("run: {e}")));
        }
    };
    let monitors_ok = write_run(out, &r)?;
    let last = r.trace.final_row();
    println!(
        "status={} t={:.6} residual={:.3e} steps={} monitors={}",
        r.trace.status.as_str(),
        last.t,
        last.residual,
        r.trace.steps,
        pass_fail(monitors_ok)
    );
    Ok(match r.trace.status {
        RunStatus::NotConverged | RunStatus::Stalled => Exit::NotConverged,
        _ if !monitors_ok => Exit::CheckFailed,
        _ => Exit::Ok,
    })
}

fn cmd_solve(cfg: &RunConfig, out: &Artifacts) -> Result<Exit, ConfigError> {
    let blocking = gate(&cfg.flow)?;
    if !blocking.is_empty() {
        write_blocked(out, &blocking)?;
        eprintln!("hypothesis checks failed ({}); pass --waive-checks to run anyway", blocking.join("; "));
        return Ok(Exit::CheckFailed);
    }
    let seeds: Vec<BodyRecipe> =
        if cfg.solve.seeds.is_empty() { default_seeds(&cfg.flow) } else { cfg.solve.seeds.clone() };
    let result = solve_stationary(&cfg.flow, &seeds).map_err(lib("solve"))?;
    for (i, s) in result.runs.iter().enumerate() {
        let dir = out.subdir(&format!("seed_{i:02}"))?;
        write_run(&dir, &s.run)?;
    }
    out.write("body.csv", &body_table(result.body()))?;
    out.write("verdict.txt", &stationary_summary(&result))?;
    println!(
        "converged={} residual={:.3e} asphericity={:.3e} wall_time={:.2}s",
        result.converged(),
        result.residual,
        result.asphericity,
        result.wall_time.as_secs_f64()
    );
    Ok(if result.converged() { Exit::Ok } else { Exit::NotConverged })
}

fn cmd_functionals(cfg: &RunConfig, out: &Artifacts) -> Result<Exit, ConfigError> {
    let flow = &cfg.flow;
    let grid = flow.build_grid().map_err(lib("grid"))?;
    let body = realize(&flow.initial, &grid).map_err(lib("initial body"))?;
    let spec = flow.curvature_spec().map_err(lib("curvature"))?;
    let mut report = FunctionalReport::new(flow.grid);
    let mut notes = Vec::new();
    let power = spec.divergence_free_power();
    if let Some(k) = power {
        report.push("w_f", modified_quermassintegral(&body, &spec).map_err(lib("w_f"))?).map_err(lib("w_f"))?;
        let eps = flow.eps_floor.unwrap_or(0.5 * body.u_min());
        match u_potential(&body, &flow.forcing, flow.beta, k, eps) {
            Ok(v) => report.push("u_potential", v).map_err(lib("u_potential"))?,
            Err(e) => notes.push(format!("u_potential = unavailable ({e})")),
        }
    } else {
        notes.push("w_f = not applicable (curvature function is not divergence free)".into());
    }
    let eps = flow.eps_floor.unwrap_or(0.5 * body.rho_min());
    match v_potential(&body, &flow.forcing, flow.beta, eps) {
        Ok(v) => report.push("v_potential", v).map_err(lib("v_potential"))?,
        Err(e) => notes.push(format!("v_potential = unavailable ({e})")),
    }
    let q = cfg.functionals.q;
    report.push(format!("dual_volume_q{q}"), dual_volume(&body, q).map_err(lib("dual volume"))?).map_err(lib("dual volume"))?;

    let mut text = String::new();
    let _ = writeln!(text, "grid = n{} m{} {:?}", report.resolution.n, report.resolution.m, report.resolution.kind);
    for (name, v) in &report.values {
        let _ = writeln!(text, "{name} = {v:.17e}");
    }
    for n in &notes {
        let _ = writeln!(text, "{n}");
    }

    let mut failures = 0;
    if power.is_some() {
        let f = &cfg.functionals;
        let mut csv = String::from(
            "pair,integral,last_eps,last_quotient,last_relative_error,extrapolated,extrapolated_relative_error,last_order,failures\n",
        );
        for (i, (a, b)) in pairs(cfg.corpus.count, flow.grid.kind, &cfg.corpus.params(), cfg.seed).iter().enumerate() {
            let kb = realize(a, &grid).map_err(lib("corpus body"))?;
            let lb = realize(b, &grid).map_err(lib("corpus body"))?;
            let r = variational_check(&kb, &lb, &spec, &f.phi1, &f.phi2, &f.eps).map_err(lib("variational check"))?;
            let last = r.samples.last().expect("eps list is nonempty");
            failures += r.failures.len();
            let _ = writeln!(
                csv,
                "{i},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{}",
                r.integral,
                last.eps,
                last.quotient,
                last.relative_error,
                r.extrapolated.map_or("none".into(), |v| format!("{v:.17e}")),
                r.extrapolated_relative_error.map_or("none".into(), |v| format!("{v:.17e}")),
                r.orders.last().map_or("none".into(), |v| format!("{v:.6}")),
                r.failures.len()
            );
        }
        out.write("variational.csv", &csv)?;
        let _ = writeln!(text, "variational_pairs = {}", cfg.corpus.count);
        let _ = writeln!(text, "variational_failures = {failures}");
    }
    print!("{text}");
    out.write("functionals.txt", &text)?;
    Ok(if failures == 0 { Exit::Ok } else { Exit::CheckFailed })
}

fn cmd_inequalities(cfg: &RunConfig, out: &Artifacts) -> Result<Exit, ConfigError> {
    let flow = &cfg.flow;
    let grid = flow.build_grid().map_err(lib("grid"))?;
    let spec = flow.curvature_spec().map_err(lib("curvature"))?;
    let power = spec.divergence_free_power();
    let p = cfg.functionals.p.unwrap_or(power.unwrap_or(flow.grid.n) as f64 + 2.0);
    let params = SuiteParams { curvature: power.map(|_| spec), p, q: cfg.functionals.q, tol: cfg.functionals.tol };
    let mut csv = String::from("pair,name,lhs,rhs,margin,pass\n");
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut failed = 0;
    for (i, (a, b)) in pairs(cfg.corpus.count, flow.grid.kind, &cfg.corpus.params(), cfg.seed).iter().enumerate() {
        let kb = realize(a, &grid).map_err(lib("corpus body"))?;
        let lb = realize(b, &grid).map_err(lib("corpus body"))?;
        for r in inequality_suite(&kb, &lb, &params).map_err(lib("inequality suite"))? {
            let _ = writeln!(csv, "{i},{},{:.17e},{:.17e},{:.17e},{}", r.name, r.lhs, r.rhs, r.margin, r.pass);
            failed += usize::from(!r.pass);
            match worst.iter_mut().find(|(n, _)| *n == r.name) {
                Some((_, m)) => *m = m.min(r.margin),
                None => worst.push((r.name.clone(), r.margin)),
            }
        }
    }
    out.write("inequalities.csv", &csv)?;
    println!("p={p} q={} pairs={} failures={failed}", cfg.functionals.q, cfg.corpus.count);
    for (name, m) in &worst {
        println!("{name}: min margin {m:.6e}");
    }
    Ok(if failed == 0 { Exit::Ok } else { Exit::CheckFailed })
}

#[derive(Debug, Clone)]
struct Cell {
    beta: f64,
    alpha: Option<f64>,
    delta: Option<f64>,
    flow: FlowConfig,
}

fn axis(values: &[f64]) -> Vec<Option<f64>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

fn apply(forcing: &mut ForcingSpec, alpha: Option<f64>, delta: Option<f64>) -> Result<(), ConfigError> {
    match forcing {
        ForcingSpec::PsiURho { alpha: a, delta: d, .. } => {
            if let Some(v) = alpha {
                *a = v;
            }
            if let Some(v) = delta {
                *d = v;
            }
        }
        ForcingSpec::NuU { p, .. } => {
            if let Some(v) = alpha {
                *p = v;
            }
            if delta.is_some() {
                return Err(ConfigError("sweep.delta needs a forcing with a delta exponent".into()));
            }
        }
        ForcingSpec::Composite { p, delta: d, .. } => {
            if let Some(v) = alpha {
                *p = v;
            }
            if let Some(v) = delta {
                *d = v;
            }
        }
    }
    Ok(())
}

fn cells(cfg: &RunConfig) -> Result<Vec<Cell>, ConfigError> {
    let betas = if cfg.sweep.beta.is_empty() { vec![cfg.flow.beta] } else { cfg.sweep.beta.clone() };
    let mut out = Vec::new();
    for &beta in &betas {
        for alpha in axis(&cfg.sweep.alpha) {
            for delta in axis(&cfg.sweep.delta) {
                let mut flow = cfg.flow.clone();
                flow.beta = beta;
                apply(&mut flow.forcing, alpha, delta)?;
                out.push(Cell { beta, alpha, delta, flow });
            }
        }
    }
    Ok(out)
}

fn run_cell(cell: &Cell, dir: &Artifacts) -> Result<String, ConfigError> {
    let blocking = gate(&cell.flow)?;
    if !blocking.is_empty() {
        write_blocked(dir, &blocking)?;
        return Ok("blocked,,,,,".into());
    }
    match run(&cell.flow) {
        Ok(r) => {
            let monitors = write_run(dir, &r)?;
            let last = r.trace.final_row();
            Ok(format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.trace.status.as_str(),
                last.t,
                last.residual,
                last.u_min,
                last.u_max,
                pass_fail(monitors)
            ))
        }
        Err(e) => {
            dir.write("failure.txt", &format!("error = {e}\n"))?;
            Ok("error,,,,,".into())
        }
    }
}

fn cmd_sweep(cfg: &RunConfig, out: &Artifacts) -> Result<Exit, ConfigError> {
    let cells = cells(cfg)?;
    let dirs = cells
        .iter()
        .enumerate()
        .map(|(i, _)| out.subdir(&format!("cell_{i:03}")))
        .collect::<Result<Vec<_>, _>>()?;
    let indexed: Vec<usize> = (0..cells.len()).collect();
    let rows = map_par(&indexed, |&i| run_cell(&cells[i], &dirs[i]));
    let mut summary = String::from("cell,beta,alpha,delta,status,final_time,final_residual,u_min,u_max,monitors\n");
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for (i, (cell, row)) in cells.iter().zip(rows).enumerate() {
        let row = row?;
        let _ = writeln!(summary, "{i},{},{},{},{row}", cell.beta, fmt(cell.alpha), fmt(cell.delta));
    }
    out.write("summary.csv", &summary)?;
    print!("{summary}");
    Ok(Exit::Ok)
}

