//! Integral functionals of convex bodies, Orlicz combinations and the
//! inequality suite.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::{gauss_jacobian, verify_body, ConvexBodyState};
use crate::curvature::{sigma, CurvatureSpec, Radii};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::grid::{GridKind, GridSpec, ScalarField, SphereGrid};
use crate::numeric::adaptive_simpson;

const INNER_TOL: f64 = 1e-10;

fn periodic(body: &ConvexBodyState) -> bool {
    body.grid().kind() == GridKind::Circle
}

fn same_grid(a: &ConvexBodyState, b: &ConvexBodyState) -> Result<()> {
    if a.grid().spec() != b.grid().spec() {
        return Err(Error::GridMismatch { expected: a.grid().len(), found: b.grid().len() });
    }
    Ok(())
}

fn eligible_power(spec: &CurvatureSpec) -> Result<usize> {
    spec.divergence_free_power()
        .ok_or_else(|| Error::Precondition("F^k is not divergence free for this curvature function".into()))
}

/// `F^k(λ)` at every node, with k the divergence-free power of `spec`.
pub fn power_k_field(body: &ConvexBodyState, spec: &CurvatureSpec) -> Result<Vec<f64>> {
    check_dim(body, spec)?;
    let radii = body.radii();
    let mut buf = vec![0.0; spec.n()];
    (0..radii.len())
        .map(|j| {
            radii.fill(j, &mut buf);
            spec.power_k(&buf)
        })
        .collect()
}

fn check_dim(body: &ConvexBodyState, spec: &CurvatureSpec) -> Result<()> {
    if body.dim() != spec.n() {
        return Err(Error::InvalidParameter(format!(
            "curvature function is for n = {}, body lives on S^{}",
            spec.n(),
            body.dim()
        )));
    }
    Ok(())
}

/// `W_F(K) = (1/(k+1)) ∫ u F^k dx`.
pub fn modified_quermassintegral(body: &ConvexBodyState, spec: &CurvatureSpec) -> Result<f64> {
    let k = eligible_power(spec)?;
    let fk = power_k_field(body, spec)?;
    let integrand: Vec<f64> = body.u().iter().zip(&fk).map(|(u, f)| u * f).collect();
    Ok(body.grid().integrate(&integrand)? / (k + 1) as f64)
}

/// Normal-side factor used by `U`: `φ` itself, with a constant `φ̂` folded in.
fn u_factor(forcing: &ForcingSpec, theta: f64, s: f64, periodic: bool) -> f64 {
    let scale = if forcing.phi_hat_trivial() { forcing.phi_hat(0.0, 1.0, periodic) } else { 1.0 };
    forcing.phi(theta, s, periodic) * scale
}

/// `∫_a^b φ^{-k/β}(x, s) ds` at the normal angle `theta`; signed when `b < a`.
pub fn u_inner(forcing: &ForcingSpec, beta: f64, k: usize, theta: f64, a: f64, b: f64, periodic: bool) -> f64 {
    if a == b {
        return 0.0;
    }
    let e = -(k as f64) / beta;
    let f = |s: f64| u_factor(forcing, theta, s, periodic).powf(e);
    adaptive_simpson(&f, a, b, INNER_TOL)
}

/// `U = ∫ ∫_ε^u φ^{-k/β}(x, s) ds dx`.
pub fn u_potential(body: &ConvexBodyState, forcing: &ForcingSpec, beta: f64, k: usize, eps_floor: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(eps_floor > 0.0 && eps_floor <= body.u_min()) {
        return Err(Error::Precondition(format!(
            "eps_floor must lie in (0, min u = {}], got {eps_floor}",
            body.u_min()
        )));
    }
    let per = periodic(body);
    let nodes = body.grid().nodes();
    let vals: Vec<f64> = nodes
        .iter()
        .zip(body.u())
        .map(|(&t, &u)| u_inner(forcing, beta, k, t, eps_floor, u, per))
        .collect();
    body.grid().integrate(&vals)
}

/// `∫_a^b φ̂^{n/β}(ξ, s) s^n ds` at the radial angle `xi`.
pub fn v_inner(forcing: &ForcingSpec, beta: f64, n: usize, xi: f64, a: f64, b: f64, periodic: bool) -> f64 {
    if a == b {
        return 0.0;
    }
    let e = n as f64 / beta;
    let f = |s: f64| forcing.phi_hat(xi, s, periodic).powf(e) * s.powi(n as i32);
    adaptive_simpson(&f, a, b, INNER_TOL)
}

/// Radial angle `ξ_j` of every boundary point.
fn radial_angles(body: &ConvexBodyState) -> Vec<f64> {
    body.grid()
        .nodes()
        .iter()
        .zip(body.u().iter().zip(body.du()))
        .map(|(&t, (&u, &d))| t + d.atan2(u))
        .collect()
}

/// `V = ∫ ∫_ε^ρ φ̂^{n/β}(ξ, s) s^n ds dξ`, pulled back to the normal grid.
pub fn v_potential(body: &ConvexBodyState, forcing: &ForcingSpec, beta: f64, eps_floor: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(eps_floor > 0.0 && eps_floor <= body.rho_min()) {
        return Err(Error::Precondition(format!(
            "eps_floor must lie in (0, min rho = {}], got {eps_floor}",
            body.rho_min()
        )));
    }
    let per = periodic(body);
    let n = body.dim();
    let jac = gauss_jacobian(body);
    let vals: Vec<f64> = radial_angles(body)
        .iter()
        .zip(body.rho().iter().zip(jac.iter()))
        .map(|(&xi, (&rho, &j))| v_inner(forcing, beta, n, xi, eps_floor, rho, per) * j)
        .collect();
    body.grid().integrate(&vals)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("beta must be positive, got {beta}")))
    }
}

/// Convex increasing Orlicz functions with `φ(0) = 0` and `φ(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrliczFunction {
    Linear,
    Power { p: f64 },
    /// Piecewise linear through `(x, y)`, extended with the last slope.
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

impl OrliczFunction {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            Self::Linear => Ok(()),
            Self::Power { p } if *p >= 1.0 && p.is_finite() => Ok(()),
            Self::Power { p } => bad(format!("Orlicz power must be >= 1, got {p}")),
            Self::Tabulated { x, y } => {
                if x.len() != y.len() || x.len() < 2 {
                    return bad("tabulated Orlicz function needs matching x and y with >= 2 points".into());
                }
                if x[0] != 0.0 || y[0] != 0.0 {
                    return bad("tabulated Orlicz function must start at (0, 0)".into());
                }
                if !x.iter().zip(y).any(|(a, b)| *a == 1.0 && *b == 1.0) {
                    return bad("tabulated Orlicz function must pass through (1, 1)".into());
                }
                let slopes: Vec<f64> = x.windows(2).zip(y.windows(2)).map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0])).collect();
                if x.windows(2).any(|w| !(w[1] > w[0])) || slopes.iter().any(|s| !(*s > 0.0)) {
                    return bad("tabulated Orlicz function must be strictly increasing".into());
                }
                if slopes.windows(2).any(|w| w[1] < w[0]) {
                    return bad("tabulated Orlicz function must be convex".into());
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Linear => t,
            Self::Power { p } => t.powf(*p),
            Self::Tabulated { x, y } => {
                let i = x.partition_point(|&a| a <= t).clamp(1, x.len() - 1);
                y[i - 1] + (y[i] - y[i - 1]) * (t - x[i - 1]) / (x[i] - x[i - 1])
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Power { p } => p * t.powf(p - 1.0),
            Self::Tabulated { x, y } => {
                let i = x.partition_point(|&a| a <= t).clamp(1, x.len() - 1);
                (y[i] - y[i - 1]) / (x[i] - x[i - 1])
            }
        }
    }

    /// Left derivative at 1.
    pub fn left_derivative_at_one(&self) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Power { p } => *p,
            Self::Tabulated { x, y } => {
                let i = x.iter().position(|&a| a == 1.0).expect("validated table passes through 1");
                (y[i] - y[i - 1]) / (x[i] - x[i - 1])
            }
        }
    }
}

/// Support function of `K +_{φ,ε} L`: the root λ ≥ u_K of
/// `φ₁(u_K/λ) + ε φ₂(u_L/λ) = 1` at every node.
pub fn orlicz_combination(
    u_k: &[f64],
    u_l: &[f64],
    eps: f64,
    phi1: &OrliczFunction,
    phi2: &OrliczFunction,
) -> Result<Vec<f64>> {
    phi1.validate()?;
    phi2.validate()?;
    if u_k.len() != u_l.len() {
        return Err(Error::GridMismatch { expected: u_k.len(), found: u_l.len() });
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {eps}")));
    }
    u_k.iter()
        .zip(u_l)
        .map(|(&a, &b)| {
            if !(a > 0.0) || !(b >= 0.0) {
                return Err(Error::InvalidParameter(format!("need u_K > 0 and u_L >= 0, got {a}, {b}")));
            }
            if eps == 0.0 || b == 0.0 {
                return Ok(a);
            }
            orlicz_root(a, b, eps, phi1, phi2)
        })
        .collect()
}

fn orlicz_root(a: f64, b: f64, eps: f64, phi1: &OrliczFunction, phi2: &OrliczFunction) -> Result<f64> {
    let g = |lam: f64| phi1.eval(a / lam) + eps * phi2.eval(b / lam) - 1.0;
    let mut lo = a;
    let mut hi = 2.0 * a;
    let mut doublings = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NoBracket("Orlicz combination upper bracket".into()));
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..2 {
        let dg = -(a * phi1.derivative(a / lam) + eps * b * phi2.derivative(b / lam)) / (lam * lam);
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = lam - g(lam) / dg;
        if next.is_finite() && (next - lam).abs() <= 1e-10 * lam && g(next).abs() <= g(lam).abs() {
            lam = next;
        }
    }
    Ok(lam)
}

/// Integral representation `∫ u_K/φ₁'(1) φ₂(u_L/u_K) F^k(λ_K) dx`.
pub fn orlicz_mixed_quermassintegral(
    k_body: &ConvexBodyState,
    l_body: &ConvexBodyState,
    spec: &CurvatureSpec,
    phi1: &OrliczFunction,
    phi2: &OrliczFunction,
) -> Result<f64> {
    same_grid(k_body, l_body)?;
    phi1.validate()?;
    phi2.validate()?;
    eligible_power(spec)?;
    let fk = power_k_field(k_body, spec)?;
    let d = phi1.left_derivative_at_one();
    let vals: Vec<f64> = (0..fk.len())
        .map(|j| {
            let (uk, ul) = (k_body.u()[j], l_body.u()[j]);
            uk / d * phi2.eval(ul / uk) * fk[j]
        })
        .collect();
    k_body.grid().integrate(&vals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientSample {
    pub eps: f64,
    pub quotient: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalReport {
    pub integral: f64,
    pub samples: Vec<QuotientSample>,
    /// `2q(ε) − q(2ε)` at the last ε when the list halves at the end.
    pub extrapolated: Option<f64>,
    pub extrapolated_relative_error: Option<f64>,
    /// `log₂` of successive error ratios; about 1 for first-order decay.
    pub orders: Vec<f64>,
    /// Intermediate combinations that failed the admissibility checks.
    pub failures: Vec<String>,
}

/// Compares forward ε-quotients of `W_F` along `K +_{φ,ε} L` with the
/// integral representation.
pub fn variational_check(
    k_body: &ConvexBodyState,
    l_body: &ConvexBodyState,
    spec: &CurvatureSpec,
    phi1: &OrliczFunction,
    phi2: &OrliczFunction,
    eps_list: &[f64],
) -> Result<VariationalReport> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("epsilon list must be positive and strictly decreasing".into()));
    }
    let integral = orlicz_mixed_quermassintegral(k_body, l_body, spec, phi1, phi2)?;
    let w0 = modified_quermassintegral(k_body, spec)?;
    let grid: Arc<SphereGrid> = k_body.grid().clone();
    let mut samples = Vec::with_capacity(eps_list.len());
    let mut failures = Vec::new();
    for &eps in eps_list {
        let u = orlicz_combination(k_body.u(), l_body.u(), eps, phi1, phi2)?;
        let body = match ConvexBodyState::from_support(grid.clone(), u) {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("eps={eps:e}: {e}"));
                continue;
            }
        };
        let report = verify_body(&body);
        if !report.pass() {
            let names: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
            failures.push(format!("eps={eps:e}: {}", names.join(",")));
        }
        let q = (modified_quermassintegral(&body, spec)? - w0) / eps;
        samples.push(QuotientSample { eps, quotient: q, relative_error: rel(q, integral) });
    }
    let orders = samples
        .windows(2)
        .map(|w| (w[0].relative_error / w[1].relative_error).log2() / (w[0].eps / w[1].eps).log2())
        .collect();
    let extrapolated = match samples.as_slice() {
        [.., a, b] if (a.eps / b.eps - 2.0).abs() < 1e-12 => Some(2.0 * b.quotient - a.quotient),
        _ => None,
    };
    Ok(VariationalReport {
        integral,
        extrapolated_relative_error: extrapolated.map(|e| rel(e, integral)),
        extrapolated,
        samples,
        orders,
        failures,
    })
}

fn rel(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Dual volume `Ṽ_q = (1/q) ∫ ρ^q dξ`, or `∫ log ρ dξ` at `q = 0`.
pub fn dual_volume(body: &ConvexBodyState, q: f64) -> Result<f64> {
    let jac = gauss_jacobian(body);
    let vals: Vec<f64> = body
        .rho()
        .iter()
        .zip(jac.iter())
        .map(|(&r, &j)| if q == 0.0 { r.ln() * j } else { r.powf(q) * j })
        .collect();
    let total = body.grid().integrate(&vals)?;
    Ok(if q == 0.0 { total } else { total / q })
}

/// `Ṽ_{p,q}(K, L, B) = ∫ u_L^p u_K^{−p} ρ_K^q dξ`, pulled back through the
/// normals of `K`.
pub fn lp_dual_mixed_volume(k_body: &ConvexBodyState, l_body: &ConvexBodyState, p: f64, q: f64) -> Result<f64> {
    same_grid(k_body, l_body)?;
    let jac = gauss_jacobian(k_body);
    let vals: Vec<f64> = (0..jac.len())
        .map(|j| (l_body.u()[j] / k_body.u()[j]).powf(p) * k_body.rho()[j].powf(q) * jac[j])
        .collect();
    k_body.grid().integrate(&vals)
}

/// `W_{p,F}(L, K) = ∫ u_K^p u_L^{1−p} F^k(λ_L) dx`.
pub fn lp_mixed_quermassintegral(l_body: &ConvexBodyState, k_body: &ConvexBodyState, spec: &CurvatureSpec, p: f64) -> Result<f64> {
    same_grid(k_body, l_body)?;
    let fk = power_k_field(l_body, spec)?;
    let vals: Vec<f64> = (0..fk.len())
        .map(|j| k_body.u()[j].powf(p) * l_body.u()[j].powf(1.0 - p) * fk[j])
        .collect();
    k_body.grid().integrate(&vals)
}

/// Density `u φ(1/u) F^k(λ)` of the modified Orlicz surface area measure.
pub fn surface_measure_density(body: &ConvexBodyState, spec: &CurvatureSpec, phi: &OrliczFunction) -> Result<ScalarField> {
    phi.validate()?;
    let fk = power_k_field(body, spec)?;
    let vals = body.u().iter().zip(&fk).map(|(&u, &f)| u * phi.eval(1.0 / u) * f).collect();
    ScalarField::new(body.grid(), vals)
}

/// Named functional values together with the grid they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalReport {
    pub resolution: GridSpec,
    pub values: Vec<(String, f64)>,
}

impl FunctionalReport {
    pub fn new(resolution: GridSpec) -> Self {
        Self { resolution, values: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        let name = name.into();
        if !value.is_finite() {
            return Err(Error::NonFinite { node: self.values.len(), value });
        }
        self.values.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Outcome of one inequality evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs` for inequalities of the form `lhs ≥ rhs`.
    pub margin: f64,
    pub pass: bool,
}

pub const DEFAULT_QUAD_TOL: f64 = 1e-6;

fn result(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> InequalityResult {
    let margin = lhs - rhs;
    InequalityResult { name: name.into(), lhs, rhs, margin, pass: margin >= -tol }
}

/// Smallest eigenvalue of `D²h + h I` on the grid.
fn min_spherical_hessian(grid: &Arc<SphereGrid>, h: Vec<f64>) -> Result<f64> {
    let state = ConvexBodyState::from_support_unchecked(grid.clone(), h)?;
    Ok(state.radii().min().1)
}

/// Positive definiteness of `D²h + h I` for `h = (u_L^{p−1}/σ_k(λ_L))^{1/(k+p−1)}`.
pub fn lp_admissible(l_body: &ConvexBodyState, spec: &CurvatureSpec, p: f64) -> Result<bool> {
    let k = eligible_power(spec)?;
    let radii: &Radii = l_body.radii();
    let e = 1.0 / (k as f64 + p - 1.0);
    let h: Vec<f64> = (0..radii.len())
        .map(|j| (l_body.u()[j].powf(p - 1.0) / sigma(&radii.at(j), k)).powf(e))
        .collect();
    Ok(min_spherical_hessian(l_body.grid(), h)? > 0.0)
}

/// `W_{p,F}(L, K) ≥ p W_F(K) + (k+1−p) W_F(L)` for `p > k+1`.
pub fn inequality_lp_quermass(
    k_body: &ConvexBodyState,
    l_body: &ConvexBodyState,
    spec: &CurvatureSpec,
    p: f64,
    tol: f64,
) -> Result<InequalityResult> {
    let k = eligible_power(spec)? as f64;
    if !(p > k + 1.0) {
        return Err(Error::InvalidParameter(format!("need p > k + 1 = {}, got {p}", k + 1.0)));
    }
    if !lp_admissible(l_body, spec, p)? {
        return Err(Error::Precondition("D^2 h + h I is not positive definite for L".into()));
    }
    let lhs = lp_mixed_quermassintegral(l_body, k_body, spec, p)?;
    let rhs = p * modified_quermassintegral(k_body, spec)? + (k + 1.0 - p) * modified_quermassintegral(l_body, spec)?;
    Ok(result("lp_quermassintegral", lhs, rhs, tol))
}

/// `(1/p) ∫ u^p + (1/(k+1) − 1/p)|S^n| ≥ W_F(K)` for `p ≥ k+1`.
pub fn inequality_unit_ball(k_body: &ConvexBodyState, spec: &CurvatureSpec, p: f64, tol: f64) -> Result<InequalityResult> {
    let k = eligible_power(spec)? as f64;
    if !(p >= k + 1.0) {
        return Err(Error::InvalidParameter(format!("need p >= k + 1 = {}, got {p}", k + 1.0)));
    }
    let grid = k_body.grid();
    let up: Vec<f64> = k_body.u().iter().map(|u| u.powf(p)).collect();
    let lhs = grid.integrate(&up)? / p + (1.0 / (k + 1.0) - 1.0 / p) * grid.total_measure();
    let rhs = modified_quermassintegral(k_body, spec)?;
    Ok(result("unit_ball_quermassintegral", lhs, rhs, tol))
}

/// `Ṽ_{p,q}(K, L) ≥ p Ṽ_q(L) + (q−p) Ṽ_q(K)` for `p > q`, `pq ≠ 0`.
pub fn inequality_dual_mixed(k_body: &ConvexBodyState, l_body: &ConvexBodyState, p: f64, q: f64, tol: f64) -> Result<InequalityResult> {
    if !(p > q) || p == 0.0 || q == 0.0 {
        return Err(Error::InvalidParameter(format!("need p > q and pq != 0, got p={p}, q={q}")));
    }
    let lhs = lp_dual_mixed_volume(k_body, l_body, p, q)?;
    let rhs = p * dual_volume(l_body, q)? + (q - p) * dual_volume(k_body, q)?;
    Ok(result("dual_mixed_volume", lhs, rhs, tol))
}

/// `Ṽ_{p,0}(K, L) ≥ |S^n| + p Ṽ_0(L) − p Ṽ_0(K)` for `p > 0`.
pub fn inequality_dual_mixed_log(k_body: &ConvexBodyState, l_body: &ConvexBodyState, p: f64, tol: f64) -> Result<InequalityResult> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("need p > q = 0, got p={p}")));
    }
    let lhs = lp_dual_mixed_volume(k_body, l_body, p, 0.0)?;
    let rhs = k_body.grid().total_measure() + p * dual_volume(l_body, 0.0)? - p * dual_volume(k_body, 0.0)?;
    Ok(result("dual_mixed_volume_log", lhs, rhs, tol))
}

/// `∫ log(u_L/u_K) dC̃_q(K) ≥ Ṽ_q(L) − Ṽ_q(K)` for `q < 0`.
pub fn inequality_dual_curvature_log(k_body: &ConvexBodyState, l_body: &ConvexBodyState, q: f64, tol: f64) -> Result<InequalityResult> {
    if !(q < 0.0) {
        return Err(Error::InvalidParameter(format!("need 0 = p > q, got q={q}")));
    }
    same_grid(k_body, l_body)?;
    let jac = gauss_jacobian(k_body);
    let vals: Vec<f64> = (0..jac.len())
        .map(|j| (l_body.u()[j] / k_body.u()[j]).ln() * k_body.rho()[j].powf(q) * jac[j])
        .collect();
    let lhs = k_body.grid().integrate(&vals)?;
    let rhs = dual_volume(l_body, q)? - dual_volume(k_body, q)?;
    Ok(result("dual_curvature_log", lhs, rhs, tol))
}

/// `V_p(K, L) ≥ p V(L) + (n+1−p) V(K)` for `p > n+1`.
pub fn inequality_lp_minkowski(k_body: &ConvexBodyState, l_body: &ConvexBodyState, p: f64, tol: f64) -> Result<InequalityResult> {
    let q = (k_body.dim() + 1) as f64;
    if !(p > q) {
        return Err(Error::InvalidParameter(format!("need p > n + 1 = {q}, got {p}")));
    }
    let lhs = lp_dual_mixed_volume(k_body, l_body, p, q)?;
    let rhs = p * dual_volume(l_body, q)? + (q - p) * dual_volume(k_body, q)?;
    Ok(result("lp_minkowski", lhs, rhs, tol))
}

/// `∫∫_{u_L}^{u_K} φ^{−k/β} ≥ W_F(K) − W_F(L)` with `L` a stationary body.
pub fn inequality_quermass_potential(
    k_body: &ConvexBodyState,
    l_body: &ConvexBodyState,
    spec: &CurvatureSpec,
    forcing: &ForcingSpec,
    beta: f64,
    tol: f64,
) -> Result<InequalityResult> {
    same_grid(k_body, l_body)?;
    check_beta(beta)?;
    let k = eligible_power(spec)?;
    let per = periodic(k_body);
    let vals: Vec<f64> = k_body
        .grid()
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &t)| u_inner(forcing, beta, k, t, l_body.u()[j], k_body.u()[j], per))
        .collect();
    let lhs = k_body.grid().integrate(&vals)?;
    let rhs = modified_quermassintegral(k_body, spec)? - modified_quermassintegral(l_body, spec)?;
    Ok(result("quermassintegral_potential", lhs, rhs, tol))
}

/// `∫∫_{u_L}^{u_K} φ^{−n/β} ≥ V_ε(K) − V_ε(L)` with `L` a stationary body.
pub fn inequality_volume_potential(
    k_body: &ConvexBodyState,
    l_body: &ConvexBodyState,
    forcing: &ForcingSpec,
    beta: f64,
    eps: f64,
    tol: f64,
) -> Result<InequalityResult> {
    same_grid(k_body, l_body)?;
    let n = k_body.dim();
    let per = periodic(k_body);
    let vals: Vec<f64> = k_body
        .grid()
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &t)| u_inner(forcing, beta, n, t, l_body.u()[j], k_body.u()[j], per))
        .collect();
    let lhs = k_body.grid().integrate(&vals)?;
    let rhs = v_potential(k_body, forcing, beta, eps)? - v_potential(l_body, forcing, beta, eps)?;
    Ok(result(format!("volume_potential_eps_{eps:e}"), lhs, rhs, tol))
}

/// Parameters for [`inequality_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteParams {
    pub curvature: Option<CurvatureSpec>,
    pub p: f64,
    pub q: f64,
    pub tol: f64,
}

/// Every inequality whose parameter range admits `params`, evaluated on the
/// pair `(K, L)`. Statements outside their range are skipped.
pub fn inequality_suite(k_body: &ConvexBodyState, l_body: &ConvexBodyState, params: &SuiteParams) -> Result<Vec<InequalityResult>> {
    let mut out = Vec::new();
    let SuiteParams { curvature, p, q, tol } = params;
    if let Some(spec) = curvature {
        if let Some(k) = spec.divergence_free_power() {
            if *p > k as f64 + 1.0 && lp_admissible(l_body, spec, *p)? {
                out.push(inequality_lp_quermass(k_body, l_body, spec, *p, *tol)?);
            }
            if *p >= k as f64 + 1.0 {
                out.push(inequality_unit_ball(k_body, spec, *p, *tol)?);
            }
        }
    }
    if p > q {
        if *p != 0.0 && *q != 0.0 {
            out.push(inequality_dual_mixed(k_body, l_body, *p, *q, *tol)?);
        }
        if *q == 0.0 && *p != 0.0 {
            out.push(inequality_dual_mixed_log(k_body, l_body, *p, *tol)?);
        }
        if *p == 0.0 {
            out.push(inequality_dual_curvature_log(k_body, l_body, *q, *tol)?);
        }
    }
    if *p > (k_body.dim() + 1) as f64 {
        out.push(inequality_lp_minkowski(k_body, l_body, *p, *tol)?);
    }
    Ok(out)
}

/// Comma-separated margin table for a list of inequality results.
pub fn margin_table(results: &[InequalityResult]) -> String {
    let mut out = String::from("name,lhs,rhs,margin,pass\n");
    for r in results {
        let _ = writeln!(out, "{},{:.17e},{:.17e},{:.17e},{}", r.name, r.lhs, r.rhs, r.margin, r.pass);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{realize, BodyRecipe, Mode};
    use crate::forcing::{SphericalFactor, TrigTerm};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize, m: usize) -> Arc<SphereGrid> {
        let kind = if n == 1 { GridKind::Circle } else { GridKind::Axisymmetric };
        Arc::new(SphereGrid::new(n, m, kind).unwrap())
    }

    fn ball(g: &Arc<SphereGrid>, r: f64) -> ConvexBodyState {
        realize(&BodyRecipe::Ball { radius: r }, g).unwrap()
    }

    fn sk(k: usize, n: usize) -> CurvatureSpec {
        CurvatureSpec::sigma_k_root(k, n).unwrap()
    }

    #[test]
    fn quermassintegral_values() {
        let g = grid(2, 64);
        assert!((modified_quermassintegral(&ball(&g, 1.0), &sk(1, 2)).unwrap() - 2.0 * PI).abs() < 1e-10);
        let gauss = CurvatureSpec::gauss(2).unwrap();
        assert!((modified_quermassintegral(&ball(&g, 1.0), &gauss).unwrap() - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!((modified_quermassintegral(&ball(&g, 1.5), &sk(1, 2)).unwrap() - 2.0 * PI * 2.25).abs() < 1e-10);
        let quotient = CurvatureSpec::new(crate::curvature::CurvatureKind::SigmaQuotient { k: 2, l: 1 }, 2).unwrap();
        assert!(modified_quermassintegral(&ball(&g, 1.0), &quotient).is_err());
    }

    #[test]
    fn u_potential_values() {
        // φ^{-k/β} = s with k = 1, β = 1 needs φ = s^{-1}: p = 0.
        let forcing = ForcingSpec::NuU { c: 1.0, f: SphericalFactor::default(), p: 0.0 };
        for n in [1, 2, 3] {
            let g = grid(n, 64);
            let area = g.total_measure();
            let u = u_potential(&ball(&g, 1.0), &forcing, 1.0, 1, 1e-6).unwrap();
            assert!((u - area * (1.0 - 1e-12) / 2.0).abs() < 1e-9);
            assert_eq!(u_potential(&ball(&g, 1.0), &forcing, 1.0, 1, 1.0).unwrap(), 0.0);
            let flat = ForcingSpec::NuU { c: 1.0, f: SphericalFactor::default(), p: 1.0 };
            let v = u_potential(&ball(&g, 2.0), &flat, 1.0, 1, 1.0).unwrap();
            assert!((v - area).abs() < 1e-9);
        }
        let g = grid(1, 16);
        assert!(u_potential(&ball(&g, 1.0), &forcing, 1.0, 1, 1.5).is_err());
    }

    #[test]
    fn lower_limit_shifts_u_by_a_body_independent_constant() {
        let g = grid(1, 128);
        let forcing = ForcingSpec::NuU { c: 2.0, f: SphericalFactor::Trig { a0: 1.0, terms: vec![TrigTerm::cos(2, 0.3)], power: 1.0 }, p: 0.5 };
        let bodies = [
            ball(&g, 1.0),
            realize(&BodyRecipe::Ellipse { a: 1.5, b: 0.9 }, &g).unwrap(),
            realize(&BodyRecipe::PerturbedBall { radius: 2.0, amplitude: 0.04, modes: vec![Mode { k: 3, cos: 1.0, sin: 0.5 }] }, &g).unwrap(),
        ];
        let shifts: Vec<f64> = bodies
            .iter()
            .map(|b| u_potential(b, &forcing, 0.5, 1, 0.2).unwrap() - u_potential(b, &forcing, 0.5, 1, 0.6).unwrap())
            .collect();
        assert!(shifts[0].abs() > 1e-3);
        for s in &shifts[1..] {
            assert!((s - shifts[0]).abs() < 1e-10, "{shifts:?}");
        }
    }

    #[test]
    fn v_potential_values() {
        // φ̂^{n/β} s^n = s^{q-1} with q = n+1: φ̂ ≡ 1.
        for n in [1, 2, 3] {
            let g = grid(n, 64);
            let r = 1.7;
            let forcing = ForcingSpec::psi_u_rho(1.0, 0.0, 0.0);
            let v = v_potential(&ball(&g, r), &forcing, 0.5, 1e-5).unwrap();
            let expected = (r.powi(n as i32 + 1) - 1e-5f64.powi(n as i32 + 1)) * g.total_measure() / (n + 1) as f64;
            assert!((v - expected).abs() < 1e-9, "{v} {expected}");
            assert_eq!(v_potential(&ball(&g, 1.0), &forcing, 0.5, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn v_potential_pullback_matches_direct_quadrature() {
        // φ̂^{1/β} s = s^{q-1} with q = 2, n = 1 means φ̂ ≡ 1.
        let g = grid(1, 256);
        let e = realize(&BodyRecipe::Ellipse { a: 2.0, b: 1.0 }, &g).unwrap();
        let forcing = ForcingSpec::psi_u_rho(1.0, 0.0, 0.0);
        let eps = 0.5;
        let pulled = v_potential(&e, &forcing, 1.0, eps).unwrap();
        // ellipse radial function in closed form on a uniform ξ grid
        let m = 4096;
        let direct: f64 = (0..m)
            .map(|i| {
                let xi = 2.0 * PI * i as f64 / m as f64;
                let rho = 1.0 / ((xi.cos() / 2.0).powi(2) + xi.sin().powi(2)).sqrt();
                0.5 * (rho * rho - eps * eps)
            })
            .sum::<f64>()
            * 2.0
            * PI
            / m as f64;
        assert!((pulled - direct).abs() < 1e-4, "{pulled} {direct}");
    }

    #[test]
    fn orlicz_examples() {
        let p2 = OrliczFunction::Power { p: 2.0 };
        let lam = orlicz_combination(&[1.0], &[2.0], 1.0, &p2, &p2).unwrap();
        assert!((lam[0] - 5f64.sqrt()).abs() < 1e-11);
        let lin = OrliczFunction::Linear;
        assert_eq!(orlicz_combination(&[1.3], &[2.0], 0.0, &p2, &lin).unwrap(), vec![1.3]);
        let lam = orlicz_combination(&[1.0], &[2.0], 0.5, &lin, &lin).unwrap();
        assert!((lam[0] - 2.0).abs() < 1e-11);
        let tab = OrliczFunction::Tabulated { x: vec![0.0, 0.5, 1.0, 2.0], y: vec![0.0, 0.2, 1.0, 3.0] };
        tab.validate().unwrap();
        assert_eq!(tab.left_derivative_at_one(), 1.6);
        let bad = OrliczFunction::Tabulated { x: vec![0.0, 0.5, 1.0], y: vec![0.0, 0.8, 1.0] };
        assert!(bad.validate().is_err());
        assert!(OrliczFunction::Power { p: 0.5 }.validate().is_err());
    }

    #[test]
    fn orlicz_mixed_examples() {
        let g = grid(2, 32);
        let (b1, b2) = (ball(&g, 1.0), ball(&g, 2.0));
        let lin = OrliczFunction::Linear;
        let s = sk(1, 2);
        assert!((orlicz_mixed_quermassintegral(&b1, &b1, &s, &lin, &lin).unwrap() - 4.0 * PI).abs() < 1e-10);
        assert!((orlicz_mixed_quermassintegral(&b1, &b2, &s, &lin, &lin).unwrap() - 8.0 * PI).abs() < 1e-10);
        let p2 = OrliczFunction::Power { p: 2.0 };
        assert!((orlicz_mixed_quermassintegral(&b1, &b2, &s, &lin, &p2).unwrap() - 16.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn variational_ball_family() {
        let g = grid(2, 64);
        let (b1, b2) = (ball(&g, 1.0), ball(&g, 2.0));
        let lin = OrliczFunction::Linear;
        let r = variational_check(&b1, &b2, &sk(1, 2), &lin, &lin, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        assert!((r.integral - 8.0 * PI).abs() < 1e-8);
        for s in &r.samples {
            assert!((s.relative_error - s.eps).abs() < 1e-8);
        }
        assert!(r.orders.iter().all(|o| (o - 1.0).abs() < 1e-3));
        assert!(r.extrapolated_relative_error.unwrap() < 1e-8);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn variational_self_pair() {
        let g = grid(1, 128);
        let k = realize(&BodyRecipe::Ellipse { a: 1.3, b: 1.0 }, &g).unwrap();
        let lin = OrliczFunction::Linear;
        let s = sk(1, 1);
        let r = variational_check(&k, &k, &s, &lin, &lin, &[1e-2, 5e-3]).unwrap();
        let expected = 2.0 * modified_quermassintegral(&k, &s).unwrap();
        assert!((r.integral - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_volume_values() {
        for n in [1, 2, 3] {
            let g = grid(n, 64);
            let r: f64 = 1.3;
            let vol = r.powi(n as i32 + 1) * g.total_measure() / (n + 1) as f64;
            assert!((dual_volume(&ball(&g, r), (n + 1) as f64).unwrap() - vol).abs() < 1e-10);
        }
        let g = grid(1, 64);
        assert!(dual_volume(&ball(&g, 1.0), 0.0).unwrap().abs() < 1e-14);
        assert!((dual_volume(&ball(&g, 2.0), 2.0).unwrap() - PI * 4.0).abs() < 1e-10);
        let e = realize(&BodyRecipe::Ellipse { a: 2.0, b: 1.0 }, &grid(1, 256)).unwrap();
        assert!((dual_volume(&e, 2.0).unwrap() - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn lp_dual_mixed_values() {
        let g = grid(2, 64);
        let area = g.total_measure();
        let b = ball(&g, 1.5);
        assert!((lp_dual_mixed_volume(&b, &b, 3.0, 2.0).unwrap() - 2.25 * area).abs() < 1e-10);
        let vol = 1.5f64.powi(3) * area / 3.0;
        assert!((lp_dual_mixed_volume(&b, &ball(&g, 0.7), 0.0, 3.0).unwrap() - 3.0 * vol).abs() < 1e-10);
        let g1 = grid(1, 64);
        assert!((lp_dual_mixed_volume(&ball(&g1, 1.0), &ball(&g1, 2.0), 2.0, 2.0).unwrap() - 8.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn surface_density_values() {
        let g = grid(2, 32);
        let d = surface_measure_density(&ball(&g, 1.0), &sk(1, 2), &OrliczFunction::Linear).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let r: f64 = 1.7;
        let p = 3.0;
        let d = surface_measure_density(&ball(&g, r), &sk(2, 2), &OrliczFunction::Power { p }).unwrap();
        assert!(d.iter().all(|v| (v - r * r.powf(-p) * r * r).abs() < 1e-10));
        let g1 = grid(1, 256);
        let e = realize(&BodyRecipe::Ellipse { a: 2.0, b: 1.0 }, &g1).unwrap();
        let d = surface_measure_density(&e, &sk(1, 1), &OrliczFunction::Linear).unwrap();
        let length = g1.integrate(&d).unwrap();
        let m = 20000;
        let oracle: f64 = (0..m)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / m as f64;
                (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt()
            })
            .sum::<f64>()
            * 2.0
            * PI
            / m as f64;
        assert!((length - oracle).abs() < 1e-4, "{length} {oracle}");
    }

    #[test]
    fn inequality_equality_cases() {
        let g = grid(2, 64);
        let k = realize(&BodyRecipe::Ellipse { a: 1.2, b: 1.0 }, &g).unwrap();
        let s = sk(1, 2);
        let r = inequality_lp_quermass(&k, &k, &s, 3.0, 1e-6).unwrap();
        assert!(r.margin.abs() < 1e-8, "{r:?}");
        let r = inequality_unit_ball(&ball(&g, 1.0), &s, 3.0, 1e-6).unwrap();
        assert!(r.margin.abs() < 1e-8);
        assert!((r.lhs - g.total_measure() / 2.0).abs() < 1e-10);
        assert!(inequality_lp_quermass(&k, &k, &s, 2.0, 1e-6).is_err());
    }

    #[test]
    fn lp_minkowski_on_balls() {
        for n in [1, 2, 3] {
            let g = grid(n, 64);
            let p = n as f64 + 2.0;
            let r = inequality_lp_minkowski(&ball(&g, 1.0), &ball(&g, 2.0), p, 1e-6).unwrap();
            let area = g.total_measure();
            let q = n as f64 + 1.0;
            let expected = 2f64.powf(p) * area - (p * 2f64.powf(q) + q - p) * area / q;
            assert!(r.margin > 0.0 && (r.margin - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn suite_skips_out_of_range() {
        let g = grid(1, 64);
        let params = SuiteParams { curvature: Some(sk(1, 1)), p: 3.0, q: 1.0, tol: 1e-6 };
        let res = inequality_suite(&ball(&g, 1.0), &ball(&g, 1.4), &params).unwrap();
        let names: Vec<&str> = res.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["lp_quermassintegral", "unit_ball_quermassintegral", "dual_mixed_volume", "lp_minkowski"]);
        assert!(res.iter().all(|r| r.pass));
        assert!(margin_table(&res).starts_with("name,lhs,rhs,margin,pass\n"));
    }

    proptest! {
        #[test]
        fn dual_volume_homogeneity(q in -3.0f64..4.0, c in prop::sample::select(vec![0.5, 2.0]), a in 0.0f64..0.05) {
            prop_assume!(q.abs() > 1e-3);
            let g = grid(1, 64);
            let r = BodyRecipe::PerturbedBall { radius: 1.0, amplitude: a, modes: vec![Mode { k: 2, cos: 1.0, sin: 0.3 }] };
            let u = r.support(&g).unwrap();
            let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
            let k = ConvexBodyState::from_support(g.clone(), u).unwrap();
            let ck = ConvexBodyState::from_support(g, cu).unwrap();
            let v = dual_volume(&k, q).unwrap();
            prop_assert!((dual_volume(&ck, q).unwrap() - c.powf(q) * v).abs() <= 1e-10 * v.abs().max(1.0));
        }

        #[test]
        fn orlicz_root_solves_equation(a in 0.2f64..3.0, b in 0.0f64..3.0, eps in 0.0f64..2.0, p in 1.0f64..4.0) {
            let f1 = OrliczFunction::Power { p };
            let f2 = OrliczFunction::Linear;
            let lam = orlicz_combination(&[a], &[b], eps, &f1, &f2).unwrap()[0];
            prop_assert!(lam >= a);
            let resid = f1.eval(a / lam) + eps * f2.eval(b / lam) - 1.0;
            prop_assert!(resid.abs() < 1e-11);
        }
    }
}
