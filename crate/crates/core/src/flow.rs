//! Explicit time integration of the normalized flow `∂_t u = (G F^β − 1) u`
//! and of the unnormalized flow `∂_t u = G F^β u`, with runtime monitors.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::{realize, verify_body, BodyRecipe, ConvexBodyState};
use crate::curvature::{CurvatureKind, CurvatureSpec, Radii};
use crate::error::{Error, Result};
use crate::forcing::{
    check_condition_i, check_condition_ii, check_condition_iii, ConditionIIIReport, ConditionIIReport,
    ConditionIReport, ForcingSpec, Verdict, DEFAULT_FAN,
};
use crate::functionals::{modified_quermassintegral, u_potential, v_potential};
use crate::grid::{GridKind, GridSpec, SphereGrid};
use crate::numeric::{line_fit, LineFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    #[default]
    Normalized,
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtPolicy {
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self { safety: default_safety(), dt_max: default_dt_max() }
    }
}

fn default_safety() -> f64 {
    0.25
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_tol_res() -> f64 {
    1e-8
}
fn default_t_max() -> f64 {
    50.0
}
fn default_checkpoint_every() -> usize {
    200
}

/// Everything needed to reproduce one flow run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub beta: f64,
    pub curvature: CurvatureKind,
    pub forcing: ForcingSpec,
    pub grid: GridSpec,
    pub initial: BodyRecipe,
    #[serde(default)]
    pub dt: DtPolicy,
    #[serde(default = "default_tol_res")]
    pub tol_res: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub mode: FlowMode,
    /// Rescaling constant for the unnormalized comparison.
    #[serde(default)]
    pub c0: Option<f64>,
    /// Accepted steps between trace rows.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Lower limit of the inner integrals in `U` and `V`.
    #[serde(default)]
    pub eps_floor: Option<f64>,
    #[serde(default)]
    pub waive_checks: bool,
}

impl FlowConfig {
    /// Config with every optional field at its default.
    pub fn new(beta: f64, curvature: CurvatureKind, forcing: ForcingSpec, grid: GridSpec, initial: BodyRecipe) -> Self {
        Self {
            beta,
            curvature,
            forcing,
            grid,
            initial,
            dt: DtPolicy::default(),
            tol_res: default_tol_res(),
            t_max: default_t_max(),
            mode: FlowMode::default(),
            c0: None,
            checkpoint_every: default_checkpoint_every(),
            eps_floor: None,
            waive_checks: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tol_res > 0.0) {
            return bad(format!("tol_res must be positive, got {}", self.tol_res));
        }
        if !(self.dt.safety > 0.0 && self.dt.safety <= 1.0) {
            return bad(format!("dt safety factor must lie in (0, 1], got {}", self.dt.safety));
        }
        if !(self.dt.dt_max > 0.0) {
            return bad(format!("dt_max must be positive, got {}", self.dt.dt_max));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be at least 1".into());
        }
        if let Some(e) = self.eps_floor {
            if !(e > 0.0) {
                return bad(format!("eps_floor must be positive, got {e}"));
            }
        }
        self.forcing.validate()?;
        self.curvature_spec()?;
        Ok(())
    }

    pub fn curvature_spec(&self) -> Result<CurvatureSpec> {
        CurvatureSpec::new(self.curvature, self.grid.n)
    }

    pub fn build_grid(&self) -> Result<Arc<SphereGrid>> {
        Ok(Arc::new(self.grid.build()?))
    }
}

/// Per-state quantities gathered while evaluating the right-hand side.
#[derive(Debug, Clone)]
struct Eval {
    rhs: Vec<f64>,
    /// `max β G u F^{β−1} Σ ∂F/∂λ_i`.
    stiffness: f64,
    residual: f64,
}

/// Right-hand side evaluator and RK4 stepper for one configuration.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    grid: Arc<SphereGrid>,
    curvature: CurvatureSpec,
    forcing: ForcingSpec,
    beta: f64,
    eta: f64,
    periodic: bool,
}

impl FlowSolver {
    pub fn new(config: &FlowConfig, grid: Arc<SphereGrid>) -> Result<Self> {
        config.validate()?;
        if grid.spec() != config.grid {
            return Err(Error::InvalidParameter("grid does not match the configured grid".into()));
        }
        let eta = match config.mode {
            FlowMode::Normalized => 1.0,
            FlowMode::Unnormalized => 0.0,
        };
        Ok(Self {
            periodic: grid.kind() == GridKind::Circle,
            curvature: config.curvature_spec()?,
            forcing: config.forcing.clone(),
            beta: config.beta,
            eta,
            grid,
        })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    fn eval(&self, u: &[f64]) -> std::result::Result<Eval, String> {
        if let Some(j) = u.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(format!("support value {} at node {j}", u[j]));
        }
        let (du, d2u) = self.grid.derivatives(u);
        let radii = Radii::from_derivatives(&self.grid, u, &du, &d2u);
        let g = self.forcing.eval_nodes(self.grid.nodes(), u, &du, self.periodic);
        let n = self.curvature.n();
        let mut lam = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut rhs = Vec::with_capacity(u.len());
        let mut stiffness: f64 = 0.0;
        let mut residual: f64 = 0.0;
        for j in 0..u.len() {
            radii.fill(j, &mut lam);
            if let Some(l) = lam.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                return Err(format!("principal radius {l} at node {j}"));
            }
            let f = self.curvature.grad_unchecked(&lam, &mut grad);
            let fb = crate::forcing::pow(f, self.beta);
            let q = g[j] * fb;
            if !q.is_finite() {
                return Err(format!("speed {q} at node {j}"));
            }
            rhs.push((q - self.eta) * u[j]);
            residual = residual.max((q - 1.0).abs());
            let s: f64 = grad.iter().sum();
            stiffness = stiffness.max(self.beta * g[j] * u[j] * fb / f * s);
        }
        Ok(Eval { rhs, stiffness, residual })
    }

    /// Sup-norm of `G F^β − 1`.
    pub fn residual(&self, u: &[f64]) -> Result<f64> {
        self.eval(u).map(|e| e.residual).map_err(Error::Precondition)
    }

    /// Parabolic step-size limit `σ h² / max(β G u F^{β−1} Σ F_i)`, capped.
    pub fn stable_dt(&self, u: &[f64], policy: &DtPolicy) -> Result<f64> {
        let e = self.eval(u).map_err(Error::Precondition)?;
        Ok(self.dt_from(&e, policy))
    }

    fn dt_from(&self, e: &Eval, policy: &DtPolicy) -> f64 {
        let h = self.grid.spacing();
        let dt = if e.stiffness > 0.0 { policy.safety * h * h / e.stiffness } else { policy.dt_max };
        dt.min(policy.dt_max)
    }

    fn rk4(&self, u: &[f64], e1: &Eval, dt: f64) -> std::result::Result<(Vec<f64>, Eval), String> {
        let axpy = |k: &[f64], a: f64| -> Vec<f64> { u.iter().zip(k).map(|(x, y)| x + a * y).collect() };
        let e2 = self.eval(&axpy(&e1.rhs, 0.5 * dt))?;
        let e3 = self.eval(&axpy(&e2.rhs, 0.5 * dt))?;
        let e4 = self.eval(&axpy(&e3.rhs, dt))?;
        let next: Vec<f64> = (0..u.len())
            .map(|j| u[j] + dt / 6.0 * (e1.rhs[j] + 2.0 * e2.rhs[j] + 2.0 * e3.rhs[j] + e4.rhs[j]))
            .collect();
        let e = self.eval(&next)?;
        Ok((next, e))
    }

    /// One classical RK4 step of size `dt` on raw support samples.
    pub fn step_rk4(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let e = self.eval(u).map_err(Error::Precondition)?;
        self.rk4(u, &e, dt).map(|(v, _)| v).map_err(|reason| Error::StepRejected { dt, reason })
    }

    fn integrate(&self, u0: Vec<f64>, plan: &Plan) -> Result<Integration> {
        let mut e = self.eval(&u0).map_err(|r| Error::Precondition(format!("initial state: {r}")))?;
        let mut u = u0;
        let mut t = 0.0;
        let mut steps = 0usize;
        let mut rejections = 0usize;
        let mut rows = vec![self.row(&u, t, 0.0, 0, plan)?];
        let mut snapshots = Vec::new();
        let mut stops = plan.stops.iter().copied().filter(|&s| s > 0.0).peekable();
        let floor = 1e-12 * plan.t_end;
        let status = loop {
            if plan.stop_residual.is_some_and(|tol| e.residual <= tol) {
                break RunStatus::Converged;
            }
            if t >= plan.t_end {
                break if plan.stop_residual.is_some() { RunStatus::NotConverged } else { RunStatus::Completed };
            }
            let mut target = plan.t_end;
            if let Some(&s) = stops.peek() {
                target = target.min(s);
            }
            let mut dt = self.dt_from(&e, &plan.dt);
            let mut lands = false;
            if t + dt >= target * (1.0 - 1e-14) {
                dt = target - t;
                lands = true;
            }
            let accepted = loop {
                match self.rk4(&u, &e, dt) {
                    Ok(next) => break Some(next),
                    Err(_) => {
                        rejections += 1;
                        dt *= 0.5;
                        lands = false;
                        if dt < floor {
                            break None;
                        }
                    }
                }
            };
            let Some((next, next_eval)) = accepted else {
                break RunStatus::Stalled;
            };
            t = if lands { target } else { t + dt };
            u = next;
            e = next_eval;
            steps += 1;
            let at_stop = lands && stops.peek() == Some(&target);
            if at_stop {
                stops.next();
                snapshots.push((t, u.clone()));
            }
            if at_stop || steps.is_multiple_of(plan.checkpoint_every) {
                rows.push(self.row(&u, t, dt, steps, plan)?);
            }
        };
        if rows.last().is_some_and(|r| r.t < t) {
            let dt = t - rows.last().map_or(0.0, |r| r.t);
            rows.push(self.row(&u, t, dt, steps, plan)?);
        }
        Ok(Integration { u, steps, rejections, rows, snapshots, status })
    }

    fn row(&self, u: &[f64], t: f64, dt: f64, steps: usize, plan: &Plan) -> Result<TraceRow> {
        let state = ConvexBodyState::from_support_unchecked(self.grid.clone(), u.to_vec())?;
        let g = self.forcing.eval_nodes(self.grid.nodes(), u, state.du(), self.periodic);
        let radii = state.radii();
        let mut lam = vec![0.0; self.curvature.n()];
        let (mut f_min, mut f_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut q_lo, mut q_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (j, gj) in g.iter().enumerate() {
            radii.fill(j, &mut lam);
            let f = self.curvature.eval_unchecked(&lam);
            f_min = f_min.min(f);
            f_max = f_max.max(f);
            let q = gj * f.powf(self.beta) - 1.0;
            q_lo = q_lo.min(q);
            q_hi = q_hi.max(q);
        }
        let eligible = self.curvature.divergence_free_power();
        let w_f = eligible.map(|_| modified_quermassintegral(&state, &self.curvature)).transpose()?;
        let (mut u_pot, mut v_pot) = (None, None);
        if let (Some(eps), Some(k)) = (plan.eps_floor, eligible) {
            if eps <= state.u_min() && plan.class != MonotoneClass::None {
                u_pot = Some(u_potential(&state, &self.forcing, self.beta, k, eps)?);
            }
            if eps <= state.rho_min() && plan.class == MonotoneClass::VolumeMinusU {
                v_pot = Some(v_potential(&state, &self.forcing, self.beta, eps)?);
            }
        }
        Ok(TraceRow {
            t,
            dt,
            steps,
            u_min: state.u_min(),
            u_max: state.u_max(),
            rho_min: state.rho_min(),
            rho_max: state.rho_max(),
            f_min,
            f_max,
            lambda_min: radii.min().1,
            residual: q_lo.abs().max(q_hi.abs()),
            q_minus_one_min: q_lo,
            q_minus_one_max: q_hi,
            sign_class: SignClass::classify(q_lo, q_hi),
            gradient_ratio: state.gradient_ratio(),
            w_f,
            u_potential: u_pot,
            v_potential: v_pot,
            verified: verify_body(&state).pass(),
        })
    }
}

struct Plan {
    t_end: f64,
    stop_residual: Option<f64>,
    checkpoint_every: usize,
    stops: Vec<f64>,
    dt: DtPolicy,
    eps_floor: Option<f64>,
    class: MonotoneClass,
}

struct Integration {
    u: Vec<f64>,
    steps: usize,
    rejections: usize,
    rows: Vec<TraceRow>,
    snapshots: Vec<(f64, Vec<f64>)>,
    status: RunStatus,
}

/// Which monotone quantity the flow is expected to increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneClass {
    /// `G = φ(x, u)` with `F^k` divergence free: `W_F − U`.
    QuermassMinusU,
    /// Gauss curvature with `G = φ(x, u) φ̂(ξ, ρ)`: `V − U`.
    VolumeMinusU,
    None,
}

impl MonotoneClass {
    pub fn of(curvature: &CurvatureSpec, forcing: &ForcingSpec) -> Self {
        let gauss = curvature.kind() == CurvatureKind::Gauss;
        if forcing.phi_hat_trivial() && curvature.divergence_free_eligible() {
            Self::QuermassMinusU
        } else if gauss {
            Self::VolumeMinusU
        } else {
            Self::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::QuermassMinusU => "w_f_minus_u",
            Self::VolumeMinusU => "v_minus_u",
            Self::None => "none",
        }
    }
}

/// Sign of `Q − 1` over the whole body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Zero,
    NonNegative,
    NonPositive,
    Mixed,
}

/// Tolerance under which `Q − 1` counts as zero when classifying signs.
pub const SIGN_CLASS_TOL: f64 = 1e-12;

impl SignClass {
    pub fn classify(q_minus_one_min: f64, q_minus_one_max: f64) -> Self {
        let nonneg = q_minus_one_min >= -SIGN_CLASS_TOL;
        let nonpos = q_minus_one_max <= SIGN_CLASS_TOL;
        match (nonneg, nonpos) {
            (true, true) => Self::Zero,
            (true, false) => Self::NonNegative,
            (false, true) => Self::NonPositive,
            (false, false) => Self::Mixed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::NonNegative => "nonnegative",
            Self::NonPositive => "nonpositive",
            Self::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Size of the step that produced this row.
    pub dt: f64,
    pub steps: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub lambda_min: f64,
    /// `max |Q − 1|` with `Q = G F^β`.
    pub residual: f64,
    pub q_minus_one_min: f64,
    pub q_minus_one_max: f64,
    pub sign_class: SignClass,
    /// `max |Du| / u`.
    pub gradient_ratio: f64,
    pub w_f: Option<f64>,
    pub u_potential: Option<f64>,
    pub v_potential: Option<f64>,
    pub verified: bool,
}

pub const TRACE_COLUMNS: &str = "t,dt,steps,u_min,u_max,rho_min,rho_max,f_min,f_max,lambda_min,residual,\
q_minus_one_min,q_minus_one_max,sign_class,gradient_ratio,w_f,u_potential,v_potential,verified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    NotConverged,
    Stalled,
    /// Fixed-horizon run without a residual stop.
    Completed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::NotConverged => "not converged",
            Self::Stalled => "stalled",
            Self::Completed => "completed",
        }
    }
}

/// Hypothesis checks run before a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Preflight {
    pub condition_i: ConditionIReport,
    /// Skipped for the Gauss curvature function.
    pub condition_ii: Option<ConditionIIReport>,
    /// Only defined when G depends on `u` and `ρ` alone.
    pub condition_iii: Option<ConditionIIIReport>,
}

impl Preflight {
    pub fn blocking(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.condition_i.verdict != Verdict::Pass {
            out.push(format!("condition (i): {}", self.condition_i.verdict.as_str()));
        }
        if let Some(r) = &self.condition_ii {
            if !r.pass {
                out.push(format!("condition (ii): min eigenvalue {:e} at node {}", r.min_eigenvalue, r.node));
            }
        }
        out
    }

    pub fn condition_iii_pass(&self) -> bool {
        self.condition_iii.as_ref().is_some_and(|r| r.pass)
    }
}

pub fn preflight(config: &FlowConfig, body: &ConvexBodyState) -> Result<Preflight> {
    let spec = config.curvature_spec()?;
    let condition_i = check_condition_i(&config.forcing, config.beta, config.grid.kind, DEFAULT_FAN)?;
    let condition_ii = if spec.kind() == CurvatureKind::Gauss {
        None
    } else {
        Some(check_condition_ii(&config.forcing, config.beta, body)?)
    };
    let condition_iii = if config.forcing.depends_on_u_rho_only() {
        Some(check_condition_iii(&config.forcing, config.beta)?)
    } else {
        None
    };
    Ok(Preflight { condition_i, condition_ii, condition_iii })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
    pub mode: FlowMode,
    pub preflight: Preflight,
    /// Blocking check failures that were waived for this run.
    pub waived: Vec<String>,
    pub class: MonotoneClass,
    pub eps_floor: Option<f64>,
    pub steps: usize,
    pub rejections: usize,
}

impl FlowTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace holds at least the initial row")
    }
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub trace: FlowTrace,
    pub body: ConvexBodyState,
}

fn prepare(config: &FlowConfig) -> Result<(Arc<SphereGrid>, ConvexBodyState, Preflight, Vec<String>)> {
    config.validate()?;
    let grid = config.build_grid()?;
    let body = realize(&config.initial, &grid)?;
    let pre = preflight(config, &body)?;
    let blocking = pre.blocking();
    if !blocking.is_empty() && !config.waive_checks {
        return Err(Error::Precondition(format!("hypothesis checks failed: {}", blocking.join("; "))));
    }
    Ok((grid, body, pre, blocking))
}

fn default_eps_floor(config: &FlowConfig, body: &ConvexBodyState, pre: &Preflight) -> f64 {
    config.eps_floor.unwrap_or_else(|| {
        let lower = pre.condition_i.s_minus.unwrap_or(f64::INFINITY);
        0.5 * body.u_min().min(lower)
    })
}

/// Runs the configured mode from the configured initial body.
pub fn run(config: &FlowConfig) -> Result<FlowRun> {
    let (grid, body, pre, waived) = prepare(config)?;
    let solver = FlowSolver::new(config, grid.clone())?;
    let eps = default_eps_floor(config, &body, &pre);
    let class = MonotoneClass::of(&solver.curvature, &config.forcing);
    let plan = Plan {
        t_end: config.t_max,
        stop_residual: (config.mode == FlowMode::Normalized).then_some(config.tol_res),
        checkpoint_every: config.checkpoint_every,
        stops: Vec::new(),
        dt: config.dt,
        eps_floor: Some(eps),
        class,
    };
    let out = solver.integrate(body.u().to_vec(), &plan)?;
    let body = ConvexBodyState::from_support_unchecked(grid, out.u)?;
    let trace = FlowTrace {
        rows: out.rows,
        status: out.status,
        mode: config.mode,
        preflight: pre,
        waived,
        class,
        eps_floor: Some(eps),
        steps: out.steps,
        rejections: out.rejections,
    };
    Ok(FlowRun { trace, body })
}

/// Normalized run; the mode field of `config` is ignored.
pub fn run_normalized(config: &FlowConfig) -> Result<FlowRun> {
    let mut c = config.clone();
    c.mode = FlowMode::Normalized;
    run(&c)
}

/// One RK4 step of `body`; rejected when the result is not an admissible body.
pub fn step(body: &ConvexBodyState, config: &FlowConfig, dt: f64) -> Result<ConvexBodyState> {
    let solver = FlowSolver::new(config, body.grid().clone())?;
    let u = solver.step_rk4(body.u(), dt)?;
    let next = ConvexBodyState::from_support(body.grid().clone(), u)
        .map_err(|e| Error::StepRejected { dt, reason: e.to_string() })?;
    let report = verify_body(&next);
    if !report.pass() {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        return Err(Error::StepRejected { dt, reason: failed.join(",") });
    }
    Ok(next)
}

/// Steps with `dt`, halving after each rejection. Returns the new body, the
/// accepted step size and the number of rejections.
pub fn step_with_retry(body: &ConvexBodyState, config: &FlowConfig, dt: f64) -> Result<(ConvexBodyState, f64, usize)> {
    let mut dt = dt;
    let mut rejections = 0;
    let floor = 1e-12 * config.t_max;
    loop {
        match step(body, config, dt) {
            Ok(b) => return Ok((b, dt, rejections)),
            Err(Error::StepRejected { .. }) if dt * 0.5 >= floor => {
                rejections += 1;
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Exponent `a = 1 − α − δ − β` of the rescaling `φ(t) = (C₀ + a t)^{1/a}`.
pub fn rescaling_exponent(forcing: &ForcingSpec, beta: f64) -> Result<f64> {
    match forcing {
        ForcingSpec::PsiURho { alpha, delta, .. } => {
            let a = 1.0 - alpha - delta - beta;
            if a > 0.0 {
                Ok(a)
            } else {
                Err(Error::Precondition(format!("rescaling needs alpha + delta + beta < 1, got {}", 1.0 - a)))
            }
        }
        _ => Err(Error::Precondition("rescaling is defined for psi_u_rho forcing only".into())),
    }
}

/// `φ(t)`, `τ(t)` and the inverse `t(τ)` for a given `C₀` and exponent `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    pub c0: f64,
    pub a: f64,
}

impl Rescaling {
    pub fn phi(&self, t: f64) -> f64 {
        (self.c0 + self.a * t).powf(1.0 / self.a)
    }

    pub fn tau(&self, t: f64) -> f64 {
        ((self.c0 + self.a * t) / self.c0).ln() / self.a
    }

    pub fn time(&self, tau: f64) -> f64 {
        self.c0 * (self.a * tau).exp_m1() / self.a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub tau: f64,
    pub phi: f64,
    /// `sup |φ^{-1}(t) u(t) − û(τ(t))|`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rescaling: Rescaling,
    pub rows: Vec<ComparisonRow>,
    pub max_discrepancy: f64,
    pub unnormalized: FlowTrace,
    pub normalized: FlowTrace,
}

/// Integrates the unnormalized flow and a paired normalized run from the
/// rescaled initial body, and compares them at `samples` equally spaced
/// values of `τ` up to `tau_end`.
pub fn run_unnormalized_and_compare(config: &FlowConfig, tau_end: f64, samples: usize) -> Result<ComparisonReport> {
    if !(tau_end > 0.0) || samples == 0 {
        return Err(Error::InvalidParameter("need tau_end > 0 and at least one sample".into()));
    }
    let a = rescaling_exponent(&config.forcing, config.beta)?;
    let (grid, body, pre, waived) = prepare(config)?;
    let mut un_cfg = config.clone();
    un_cfg.mode = FlowMode::Unnormalized;
    let un_solver = FlowSolver::new(&un_cfg, grid.clone())?;
    let q_min = {
        let e = un_solver.eval(body.u()).map_err(Error::Precondition)?;
        (0..body.u().len()).map(|j| e.rhs[j] / body.u()[j]).fold(f64::INFINITY, f64::min)
    };
    let c0 = match config.c0 {
        Some(c) if c * q_min < 1.0 - 1e-12 => {
            return Err(Error::Precondition(format!("C0 = {c} gives initial normalized speed {} < 1", c * q_min)))
        }
        Some(c) => c,
        None => 1f64.max(1.0 / q_min),
    };
    let resc = Rescaling { c0, a };
    let taus: Vec<f64> = (1..=samples).map(|i| tau_end * i as f64 / samples as f64).collect();
    let times: Vec<f64> = taus.iter().map(|&s| resc.time(s)).collect();
    let class = MonotoneClass::None;
    let un_plan = Plan {
        t_end: *times.last().unwrap(),
        stop_residual: None,
        checkpoint_every: config.checkpoint_every,
        stops: times.clone(),
        dt: config.dt,
        eps_floor: None,
        class,
    };
    let un = un_solver.integrate(body.u().to_vec(), &un_plan)?;

    let mut n_cfg = config.clone();
    n_cfg.mode = FlowMode::Normalized;
    let n_solver = FlowSolver::new(&n_cfg, grid)?;
    let scale = resc.phi(0.0);
    let seed: Vec<f64> = body.u().iter().map(|v| v / scale).collect();
    let n_plan = Plan { t_end: tau_end, stops: taus.clone(), ..un_plan };
    let nr = n_solver.integrate(seed, &n_plan)?;

    if un.snapshots.len() != samples || nr.snapshots.len() != samples {
        return Err(Error::Precondition(format!(
            "paired runs stopped early ({} and {} of {samples} checkpoints)",
            un.snapshots.len(),
            nr.snapshots.len()
        )));
    }
    let rows: Vec<ComparisonRow> = un
        .snapshots
        .iter()
        .zip(&nr.snapshots)
        .map(|((t, u), (tau, v))| {
            let phi = resc.phi(*t);
            let discrepancy = u.iter().zip(v).map(|(x, y)| (x / phi - y).abs()).fold(0.0, f64::max);
            ComparisonRow { t: *t, tau: *tau, phi, discrepancy }
        })
        .collect();
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let trace = |i: Integration, mode| FlowTrace {
        rows: i.rows,
        status: i.status,
        mode,
        preflight: pre.clone(),
        waived: waived.clone(),
        class,
        eps_floor: None,
        steps: i.steps,
        rejections: i.rejections,
    };
    Ok(ComparisonReport {
        rescaling: resc,
        rows,
        max_discrepancy,
        unnormalized: trace(un, FlowMode::Unnormalized),
        normalized: trace(nr, FlowMode::Normalized),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl MonitorStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "not applicable",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub name: &'static str,
    pub status: MonitorStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub monitors: Vec<Monitor>,
    pub roundness_fit: Option<LineFit>,
}

impl MonitorReport {
    pub fn get(&self, name: &str) -> Option<&Monitor> {
        self.monitors.iter().find(|m| m.name == name)
    }

    /// True when no monitor failed.
    pub fn pass(&self) -> bool {
        self.monitors.iter().all(|m| m.status != MonitorStatus::Fail)
    }
}

pub const SIGN_SLACK: f64 = 1e-8;
pub const MONOTONE_SLACK: f64 = 1e-6;
pub const STATIONARY_RATE: f64 = 1e-8;
const SANDWICH_SLACK: f64 = 1e-9;
const ROUNDNESS_FLOOR: f64 = 1e-12;

fn c0_sandwich(trace: &FlowTrace) -> Monitor {
    let ci = &trace.preflight.condition_i;
    let mut worst = 0.0f64;
    let mut tested = 0;
    for w in trace.rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if let Some(s_plus) = ci.s_plus {
            if a.u_max > s_plus {
                tested += 1;
                worst = worst.max((b.u_max - a.u_max) / a.u_max);
            }
        }
        if let Some(s_minus) = ci.s_minus {
            if a.u_min < s_minus {
                tested += 1;
                worst = worst.max((a.u_min - b.u_min) / a.u_min);
            }
        }
    }
    Monitor {
        name: "c0_sandwich",
        status: MonitorStatus::from_bool(worst <= SANDWICH_SLACK),
        detail: format!("intervals outside brackets {tested}, worst relative move {worst:e}"),
    }
}

fn sign_preservation(trace: &FlowTrace) -> Monitor {
    let first = &trace.rows[0];
    let check: fn(&TraceRow) -> f64 = match first.sign_class {
        SignClass::NonNegative => |r| r.q_minus_one_min,
        SignClass::NonPositive => |r| -r.q_minus_one_max,
        SignClass::Zero => |r| -r.residual,
        SignClass::Mixed => {
            return Monitor {
                name: "sign_preservation",
                status: MonitorStatus::NotApplicable,
                detail: "initial Q - 1 changes sign".into(),
            }
        }
    };
    let worst = trace.rows.iter().map(check).fold(f64::INFINITY, f64::min);
    Monitor {
        name: "sign_preservation",
        status: MonitorStatus::from_bool(worst >= -SIGN_SLACK),
        detail: format!("initial class {}, worst signed margin {worst:e}", first.sign_class.as_str()),
    }
}

fn f_bounds(trace: &FlowTrace) -> Monitor {
    let t_end = trace.final_row().t;
    let (burn, rest): (Vec<&TraceRow>, Vec<&TraceRow>) = trace.rows.iter().partition(|r| r.t <= 0.25 * t_end);
    if rest.is_empty() {
        return Monitor { name: "f_bounds", status: MonitorStatus::NotApplicable, detail: "trace too short".into() };
    }
    let lo = 0.5 * burn.iter().map(|r| r.f_min).fold(f64::INFINITY, f64::min);
    let hi = 2.0 * burn.iter().map(|r| r.f_max).fold(f64::NEG_INFINITY, f64::max);
    let ok = rest.iter().all(|r| r.f_min >= lo && r.f_max <= hi);
    Monitor {
        name: "f_bounds",
        status: MonitorStatus::from_bool(ok && lo > 0.0),
        detail: format!("bounds [{lo:e}, {hi:e}] over {} rows", rest.len()),
    }
}

/// Least-squares fit of `log(max|Du|/u)` against `t` over the later half of
/// the rows whose asphericity is above round-off.
pub fn roundness_fit(trace: &FlowTrace) -> Option<LineFit> {
    let rows: Vec<&TraceRow> = trace.rows.iter().filter(|r| r.gradient_ratio > ROUNDNESS_FLOOR).collect();
    let tail = &rows[rows.len() / 2..];
    if tail.len() < 3 {
        return None;
    }
    let t: Vec<f64> = tail.iter().map(|r| r.t).collect();
    let y: Vec<f64> = tail.iter().map(|r| r.gradient_ratio.ln()).collect();
    line_fit(&t, &y)
}

fn roundness(trace: &FlowTrace) -> (Monitor, Option<LineFit>) {
    let name = "exponential_roundness";
    if !trace.preflight.condition_iii_pass() {
        return (Monitor { name, status: MonitorStatus::NotApplicable, detail: "condition (iii) not met".into() }, None);
    }
    let fit = roundness_fit(trace);
    let monitor = match fit {
        None if trace.rows[0].gradient_ratio <= ROUNDNESS_FLOOR => {
            Monitor { name, status: MonitorStatus::Pass, detail: "initial body is a centred ball".into() }
        }
        None => Monitor { name, status: MonitorStatus::Fail, detail: "too few rows above round-off".into() },
        Some(f) => Monitor {
            name,
            status: MonitorStatus::from_bool(f.slope < 0.0 && f.r_squared >= 0.99),
            detail: format!("slope {:e}, r_squared {:.6}", f.slope, f.r_squared),
        },
    };
    (monitor, fit)
}

/// `(t, value)` of the class's monotone quantity at every row where it exists.
pub fn monotone_series(trace: &FlowTrace) -> Vec<(f64, f64)> {
    trace
        .rows
        .iter()
        .filter_map(|r| {
            let u = r.u_potential?;
            let lead = match trace.class {
                MonotoneClass::QuermassMinusU => r.w_f?,
                MonotoneClass::VolumeMinusU => r.v_potential?,
                MonotoneClass::None => return None,
            };
            Some((r.t, lead - u))
        })
        .collect()
}

fn monotone(trace: &FlowTrace) -> [Monitor; 2] {
    let na = |name, detail: &str| Monitor { name, status: MonitorStatus::NotApplicable, detail: detail.into() };
    if trace.class == MonotoneClass::None || trace.mode != FlowMode::Normalized {
        return [na("monotone_quantity", "no monotone quantity for this class"), na("stationarity", "")];
    }
    let s = monotone_series(trace);
    if s.len() < 2 || s.len() != trace.rows.len() {
        return [na("monotone_quantity", "potential undefined on some rows"), na("stationarity", "")];
    }
    let worst = s
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (1.0 + w[0].1.abs()))
        .fold(f64::INFINITY, f64::min);
    let mono = Monitor {
        name: "monotone_quantity",
        status: MonitorStatus::from_bool(worst >= -MONOTONE_SLACK),
        detail: format!("{}: worst relative increment {worst:e}", trace.class.as_str()),
    };
    let [.., a, b] = s.as_slice() else { unreachable!() };
    let rate = (b.1 - a.1).abs() / (b.0 - a.0);
    let residual = trace.final_row().residual;
    // The rate is quadratic in Q − 1, so away from stationarity it is only
    // required to stay above roundoff.
    let noise = 64.0 * f64::EPSILON * (1.0 + a.1.abs().max(b.1.abs())) / (b.0 - a.0);
    let consistent = if residual < STATIONARY_RATE { rate < STATIONARY_RATE } else { rate > noise };
    let stat = Monitor {
        name: "stationarity",
        status: MonitorStatus::from_bool(consistent),
        detail: format!("final rate {rate:e}, final residual {residual:e}"),
    };
    [mono, stat]
}

/// Verdicts for the C⁰ sandwich, sign preservation, curvature bounds,
/// exponential roundness, the monotone quantity and row admissibility.
pub fn monitor_suite(trace: &FlowTrace) -> MonitorReport {
    let mut monitors = Vec::new();
    let normalized = trace.mode == FlowMode::Normalized;
    if normalized {
        monitors.push(c0_sandwich(trace));
        monitors.push(sign_preservation(trace));
        monitors.push(f_bounds(trace));
    } else {
        for name in ["c0_sandwich", "sign_preservation", "f_bounds"] {
            monitors.push(Monitor { name, status: MonitorStatus::NotApplicable, detail: "unnormalized run".into() });
        }
    }
    let (round, fit) = if normalized {
        roundness(trace)
    } else {
        let m = Monitor { name: "exponential_roundness", status: MonitorStatus::NotApplicable, detail: "unnormalized run".into() };
        (m, None)
    };
    monitors.push(round);
    monitors.extend(monotone(trace));
    let bad = trace.rows.iter().filter(|r| !r.verified || r.lambda_min <= 0.0).count();
    monitors.push(Monitor {
        name: "rows_verified",
        status: MonitorStatus::from_bool(bad == 0),
        detail: format!("{bad} of {} rows failed body verification", trace.rows.len()),
    });
    MonitorReport { monitors, roundness_fit: fit }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Trace rows as comma-separated text under [`TRACE_COLUMNS`].
pub fn trace_csv(trace: &FlowTrace) -> String {
    let mut out = String::from(TRACE_COLUMNS);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{},{},{},{}",
            r.t,
            r.dt,
            r.steps,
            r.u_min,
            r.u_max,
            r.rho_min,
            r.rho_max,
            r.f_min,
            r.f_max,
            r.lambda_min,
            r.residual,
            r.q_minus_one_min,
            r.q_minus_one_max,
            r.sign_class.as_str(),
            r.gradient_ratio,
            opt(r.w_f),
            opt(r.u_potential),
            opt(r.v_potential),
            r.verified
        );
    }
    out
}

/// `key = value` lines describing the run outcome and its monitors.
pub fn trace_summary(trace: &FlowTrace, monitors: &MonitorReport) -> String {
    let mut out = String::new();
    let last = trace.final_row();
    let ci = &trace.preflight.condition_i;
    let _ = writeln!(out, "status = {}", trace.status.as_str());
    let _ = writeln!(out, "mode = {}", if trace.mode == FlowMode::Normalized { "normalized" } else { "unnormalized" });
    let _ = writeln!(out, "final_time = {:.17e}", last.t);
    let _ = writeln!(out, "final_residual = {:.17e}", last.residual);
    let _ = writeln!(out, "steps = {}", trace.steps);
    let _ = writeln!(out, "rejections = {}", trace.rejections);
    let _ = writeln!(out, "condition_i = {}", ci.verdict.as_str());
    let _ = writeln!(out, "s_minus = {}", opt(ci.s_minus));
    let _ = writeln!(out, "s_plus = {}", opt(ci.s_plus));
    let ii = trace.preflight.condition_ii.as_ref().map_or("skipped", |r| if r.pass { "pass" } else { "fail" });
    let _ = writeln!(out, "condition_ii = {ii}");
    let iii = trace.preflight.condition_iii.as_ref().map_or("not applicable", |r| if r.pass { "pass" } else { "fail" });
    let _ = writeln!(out, "condition_iii = {iii}");
    let _ = writeln!(out, "waived = {}", if trace.waived.is_empty() { "none".into() } else { trace.waived.join("; ") });
    let _ = writeln!(out, "monotone_class = {}", trace.class.as_str());
    let _ = writeln!(out, "eps_floor = {}", opt(trace.eps_floor));
    for m in &monitors.monitors {
        let _ = writeln!(out, "monitor.{} = {}", m.name, m.status.as_str());
        let _ = writeln!(out, "monitor.{}.detail = {}", m.name, m.detail);
    }
    out
}
