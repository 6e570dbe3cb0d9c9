//! Stationary solutions of `G F^β = 1` reached through the normalized flow.

use std::time::{Duration, Instant};

use crate::batch::map_par;
use crate::body::{BodyRecipe, ConvexBodyState};
use crate::curvature::Radii;
use crate::error::{Error, Result};
use crate::flow::{monitor_suite, roundness_fit, run_normalized, FlowConfig, FlowRun, FlowSolver, RunStatus};
use crate::forcing::{check_condition_i, check_uniqueness_condition, eval_g, ForcingSpec, UniquenessReport};
use crate::grid::GridKind;
use crate::numeric::bisect;

/// Final-body asphericity required by the roundness certificate.
pub const ROUNDNESS_TOL: f64 = 1e-5;
const UNIQUENESS_SAMPLES: usize = 4096;

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: BodyRecipe,
    pub run: FlowRun,
}

#[derive(Debug, Clone)]
pub struct StationaryResult {
    /// Index into `runs` of the lowest-residual body.
    pub best: usize,
    pub runs: Vec<SeedRun>,
    /// Residual `max |G F^β − 1|` of the best body.
    pub residual: f64,
    /// Same residual written through the dual function, `max |G F_*(κ)^{−β} − 1|`.
    pub dual_residual: f64,
    pub asphericity: f64,
    /// Largest sup distance between final bodies of distinct seeds, reported
    /// when the uniqueness condition holds.
    pub pairwise_distance: Option<f64>,
    pub uniqueness: Option<UniquenessReport>,
    pub predicted_radius: Option<f64>,
    pub wall_time: Duration,
}

impl StationaryResult {
    pub fn best_run(&self) -> &FlowRun {
        &self.runs[self.best].run
    }

    pub fn body(&self) -> &ConvexBodyState {
        &self.best_run().body
    }

    pub fn converged(&self) -> bool {
        self.runs.iter().any(|r| r.run.trace.status == RunStatus::Converged)
    }

    /// The best body, only when some seed converged.
    pub fn solution(&self) -> Option<&ConvexBodyState> {
        self.converged().then(|| self.body())
    }
}

/// Radius `R` of the centred sphere solving `G(R, R) R^β = 1`.
pub fn sphere_solution_radius(forcing: &ForcingSpec, beta: f64) -> Result<f64> {
    if !forcing.depends_on_u_rho_only() {
        return Err(Error::Precondition("sphere radius needs G = G(u, rho)".into()));
    }
    let h = |s: f64| (forcing.on_ball(0.0, s, true) * s.powf(beta)).ln();
    let ci = check_condition_i(forcing, beta, GridKind::Circle, 1)?;
    if let (Some(lo), Some(hi)) = (ci.s_minus, ci.s_plus) {
        if let Ok(r) = bisect(h, lo, hi, 1e-12) {
            return Ok(r);
        }
    }
    // Brackets missing: scan for any sign change of log(G R^β).
    let samples: Vec<f64> = (0..=160).map(|i| 1e-4 * 10f64.powf(i as f64 / 20.0)).collect();
    for w in samples.windows(2) {
        let (a, b) = (h(w[0]), h(w[1]));
        if a == 0.0 {
            return Ok(w[0]);
        }
        if a.signum() != b.signum() {
            return bisect(h, w[0], w[1], 1e-12);
        }
    }
    Err(Error::NoBracket("G(R, R) R^beta = 1 has no root in [1e-4, 1e4]".into()))
}

/// `{0.5 R̂, 2 R̂}` around the predicted sphere radius, else `{B_0.5, B_2}`.
pub fn default_seeds(config: &FlowConfig) -> Vec<BodyRecipe> {
    let radius = sphere_solution_radius(&config.forcing, config.beta).ok();
    let (a, b) = radius.map_or((0.5, 2.0), |r| (0.5 * r, 2.0 * r));
    vec![BodyRecipe::Ball { radius: a }, BodyRecipe::Ball { radius: b }]
}

fn sup_distance(a: &ConvexBodyState, b: &ConvexBodyState) -> f64 {
    a.u().iter().zip(b.u()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |G / F_*(κ)^β − 1|` with `κ_i = 1/λ_i`.
pub fn dual_residual(config: &FlowConfig, body: &ConvexBodyState) -> Result<f64> {
    let spec = config.curvature_spec()?;
    let g = eval_g(&config.forcing, body);
    let radii: &Radii = body.radii();
    let mut worst: f64 = 0.0;
    for (j, gj) in g.iter().enumerate() {
        let kappa: Vec<f64> = radii.at(j).iter().map(|l| 1.0 / l).collect();
        let f_star = spec.dual(&kappa)?;
        worst = worst.max((gj / f_star.powf(config.beta) - 1.0).abs());
    }
    Ok(worst)
}

/// Residual of `body` recomputed from fresh derived fields.
pub fn recompute_residual(config: &FlowConfig, body: &ConvexBodyState) -> Result<f64> {
    let fresh = ConvexBodyState::from_support(body.grid().clone(), body.u().to_vec())?;
    FlowSolver::new(config, fresh.grid().clone())?.residual(fresh.u())
}

/// Runs the normalized flow from every seed concurrently and keeps the body
/// with the smallest residual.
pub fn solve_stationary(config: &FlowConfig, seeds: &[BodyRecipe]) -> Result<StationaryResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let start = Instant::now();
    let outcomes = map_par(seeds, |seed| {
        let mut c = config.clone();
        c.initial = seed.clone();
        run_normalized(&c).map(|run| SeedRun { seed: seed.clone(), run })
    });
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let best = (0..runs.len())
        .min_by(|&a, &b| {
            let ra = runs[a].run.trace.final_row().residual;
            let rb = runs[b].run.trace.final_row().residual;
            ra.total_cmp(&rb)
        })
        .expect("non-empty");
    let body = &runs[best].run.body;
    let residual = recompute_residual(config, body)?;
    let dual = dual_residual(config, body)?;
    let asphericity = body.gradient_ratio();
    let uniqueness = if runs.len() >= 2 {
        Some(check_uniqueness_condition(&config.forcing, config.beta, config.grid.kind, UNIQUENESS_SAMPLES, 0)?)
    } else {
        None
    };
    let pairwise_distance = match &uniqueness {
        Some(u) if u.pass => {
            let mut d: f64 = 0.0;
            for i in 0..runs.len() {
                for j in i + 1..runs.len() {
                    d = d.max(sup_distance(&runs[i].run.body, &runs[j].run.body));
                }
            }
            Some(d)
        }
        _ => None,
    };
    Ok(StationaryResult {
        best,
        residual,
        dual_residual: dual,
        asphericity,
        pairwise_distance,
        uniqueness,
        predicted_radius: sphere_solution_radius(&config.forcing, config.beta).ok(),
        wall_time: start.elapsed(),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    Pass,
    Fail,
    NotApplicable,
}

impl Certificate {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "not applicable",
        }
    }
}

/// Final asphericity below [`ROUNDNESS_TOL`] and an exponentially decaying
/// asphericity trace. Never fails for specs outside condition (iii).
pub fn roundness_certificate(run: &FlowRun) -> Certificate {
    let trace = &run.trace;
    if !trace.preflight.condition_iii_pass() {
        return Certificate::NotApplicable;
    }
    if run.body.gradient_ratio() >= ROUNDNESS_TOL {
        return Certificate::Fail;
    }
    let fit_ok = match roundness_fit(trace) {
        Some(f) => f.slope < 0.0 && f.r_squared >= 0.99,
        None => trace.rows[0].gradient_ratio <= 1e-12,
    };
    if fit_ok {
        Certificate::Pass
    } else {
        Certificate::Fail
    }
}

/// `key = value` summary of a stationary solve.
pub fn stationary_summary(result: &StationaryResult) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_else(|| "none".into());
    let _ = writeln!(out, "converged = {}", result.converged());
    let _ = writeln!(out, "best_seed = {}", result.best);
    let _ = writeln!(out, "residual = {:.17e}", result.residual);
    let _ = writeln!(out, "dual_residual = {:.17e}", result.dual_residual);
    let _ = writeln!(out, "asphericity = {:.17e}", result.asphericity);
    let _ = writeln!(out, "predicted_radius = {}", opt(result.predicted_radius));
    let _ = writeln!(out, "pairwise_distance = {}", opt(result.pairwise_distance));
    let uniq = result.uniqueness.as_ref().map_or("not run", |u| if u.pass { "pass" } else { "fail" });
    let _ = writeln!(out, "uniqueness_condition = {uniq}");
    let _ = writeln!(out, "roundness = {}", roundness_certificate(result.best_run()).as_str());
    for (i, r) in result.runs.iter().enumerate() {
        let last = r.run.trace.final_row();
        let _ = writeln!(out, "seed.{i}.status = {}", r.run.trace.status.as_str());
        let _ = writeln!(out, "seed.{i}.residual = {:.17e}", last.residual);
        let _ = writeln!(out, "seed.{i}.monitors = {}", if monitor_suite(&r.run.trace).pass() { "pass" } else { "fail" });
    }
    out
}
