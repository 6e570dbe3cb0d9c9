//! Forcing terms `G(x, u, Du)` and checkers for their structural hypotheses.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::ConvexBodyState;
use crate::error::{Error, Result};
use crate::grid::{GridKind, ScalarField};

fn one() -> f64 {
    1.0
}

/// A `a cos kθ + b sin kθ` term of a trigonometric factor. Axisymmetric
/// factors should use cosine terms only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: u32,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

impl TrigTerm {
    pub fn cos(k: u32, a: f64) -> Self {
        Self { k, a, b: 0.0 }
    }

    fn eval(&self, theta: f64) -> f64 {
        let (s, c) = (self.k as f64 * theta).sin_cos();
        self.a * c + self.b * s
    }
}

/// Positive function on the sphere depending on the polar angle only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphericalFactor {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `(a0 + Σ a_k cos kθ + b_k sin kθ)^power`
    Trig {
        a0: f64,
        #[serde(default)]
        terms: Vec<TrigTerm>,
        #[serde(default = "one")]
        power: f64,
    },
    /// Linear interpolation of `(angle, value)` pairs; periodic on the circle
    /// and clamped at the ends on axisymmetric grids.
    Tabulated { angles: Vec<f64>, values: Vec<f64> },
}

impl Default for SphericalFactor {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

impl SphericalFactor {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Trig { terms, .. } => terms.iter().all(|t| (t.a == 0.0 && t.b == 0.0) || t.k == 0),
            Self::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Value at polar angle `theta`. On axisymmetric grids angles are folded
    /// into `[0, π]`.
    pub fn eval(&self, theta: f64, periodic: bool) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Trig { a0, terms, power } => {
                let base = a0 + terms.iter().map(|t| t.eval(theta)).sum::<f64>();
                if *power == 1.0 {
                    base
                } else {
                    base.powf(*power)
                }
            }
            Self::Tabulated { angles, values } => {
                let t = if periodic { theta.rem_euclid(2.0 * PI) } else { fold(theta) };
                tabulated(angles, values, t, periodic)
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{name}: {msg}")));
        match self {
            Self::Constant { value } if !(*value > 0.0) => bad(format!("constant factor must be positive, got {value}")),
            Self::Constant { .. } => Ok(()),
            Self::Trig { a0, terms, power } => {
                if !power.is_finite() {
                    return bad("power must be finite".into());
                }
                let worst = (0..=4096)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / 4096.0;
                        a0 + terms.iter().map(|c| c.eval(t)).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                if worst > 0.0 {
                    Ok(())
                } else {
                    bad(format!("trigonometric base reaches {worst}"))
                }
            }
            Self::Tabulated { angles, values } => {
                if angles.len() != values.len() || angles.is_empty() {
                    return bad("angles and values must be non-empty and of equal length".into());
                }
                if angles.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("angles must be strictly increasing".into());
                }
                if values.iter().any(|v| !(*v > 0.0)) {
                    return bad("tabulated values must be positive".into());
                }
                Ok(())
            }
        }
    }
}

fn fold(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        2.0 * PI - t
    } else {
        t
    }
}

fn tabulated(angles: &[f64], values: &[f64], t: f64, periodic: bool) -> f64 {
    let n = angles.len();
    if n == 1 {
        return values[0];
    }
    let i = angles.partition_point(|&a| a <= t);
    if i == 0 || i == n {
        if !periodic {
            return if i == 0 { values[0] } else { values[n - 1] };
        }
        // wrap between the last and first sample
        let (a0, v0) = (angles[n - 1], values[n - 1]);
        let (a1, v1) = (angles[0] + 2.0 * PI, values[0]);
        let tt = if i == 0 { t + 2.0 * PI } else { t };
        return v0 + (v1 - v0) * (tt - a0) / (a1 - a0);
    }
    let (a0, a1) = (angles[i - 1], angles[i]);
    values[i - 1] + (values[i] - values[i - 1]) * (t - a0) / (a1 - a0)
}

fn default_c() -> f64 {
    1.0
}

/// Catalog of forcing terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    /// `c ψ(x) u^{α−1} ρ^δ`
    PsiURho {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        psi: SphericalFactor,
        #[serde(default)]
        alpha: f64,
        #[serde(default)]
        delta: f64,
    },
    /// `c f(x) u^{p−1}`
    NuU {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        f: SphericalFactor,
        #[serde(default)]
        p: f64,
    },
    /// `c f(x) u^{p−1} g(ξ) ρ^δ` with `ξ = X/|X|`.
    Composite {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        f: SphericalFactor,
        #[serde(default)]
        p: f64,
        #[serde(default)]
        g: SphericalFactor,
        #[serde(default)]
        delta: f64,
    },
}

impl ForcingSpec {
    pub fn psi_u_rho(c: f64, alpha: f64, delta: f64) -> Self {
        Self::PsiURho { c, psi: SphericalFactor::default(), alpha, delta }
    }

    pub fn validate(&self) -> Result<()> {
        let c = match self {
            Self::PsiURho { c, psi, alpha, delta } => {
                psi.validate("psi")?;
                finite(&[*alpha, *delta])?;
                *c
            }
            Self::NuU { c, f, p } => {
                f.validate("f")?;
                finite(&[*p])?;
                *c
            }
            Self::Composite { c, f, p, g, delta } => {
                f.validate("f")?;
                g.validate("g")?;
                finite(&[*p, *delta])?;
                *c
            }
        };
        if c > 0.0 && c.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("scale constant must be positive, got {c}")))
        }
    }

    /// True when G has no explicit dependence on the normal `x` or on `ξ`.
    pub fn depends_on_u_rho_only(&self) -> bool {
        match self {
            Self::PsiURho { psi, .. } => psi.is_constant(),
            Self::NuU { f, .. } => f.is_constant(),
            Self::Composite { f, g, .. } => f.is_constant() && g.is_constant(),
        }
    }

    /// Exponent `e` with `G(x, mu, mρ) = m^e G(x, u, ρ)`.
    pub fn scaling_exponent(&self) -> f64 {
        match self {
            Self::PsiURho { alpha, delta, .. } => alpha - 1.0 + delta,
            Self::NuU { p, .. } => p - 1.0,
            Self::Composite { p, delta, .. } => p - 1.0 + delta,
        }
    }

    /// `G` at normal angle `theta`, support value `u`, radial norm `rho`
    /// and radial angle `xi`.
    pub fn value(&self, theta: f64, u: f64, rho: f64, xi: f64, periodic: bool) -> f64 {
        match self {
            Self::PsiURho { c, psi, alpha, delta } => {
                c * psi.eval(theta, periodic) * pow(u, alpha - 1.0) * pow(rho, *delta)
            }
            Self::NuU { c, f, p } => c * f.eval(theta, periodic) * pow(u, p - 1.0),
            Self::Composite { c, f, p, g, delta } => {
                c * f.eval(theta, periodic) * pow(u, p - 1.0) * g.eval(xi, periodic) * pow(rho, *delta)
            }
        }
    }

    /// Normal-side factor `φ(x, s)` in the split `G = φ(x, u) φ̂(ξ, ρ)`.
    pub fn phi(&self, theta: f64, s: f64, periodic: bool) -> f64 {
        match self {
            Self::PsiURho { c, psi, alpha, .. } => c * psi.eval(theta, periodic) * pow(s, alpha - 1.0),
            Self::NuU { c, f, p } | Self::Composite { c, f, p, .. } => c * f.eval(theta, periodic) * pow(s, p - 1.0),
        }
    }

    /// Radial-side factor `φ̂(ξ, s)` in the split `G = φ(x, u) φ̂(ξ, ρ)`.
    pub fn phi_hat(&self, xi: f64, s: f64, periodic: bool) -> f64 {
        match self {
            Self::PsiURho { delta, .. } => pow(s, *delta),
            Self::NuU { .. } => 1.0,
            Self::Composite { g, delta, .. } => g.eval(xi, periodic) * pow(s, *delta),
        }
    }

    /// True when `φ̂` is constant, so that `G = G(x, u)`.
    pub fn phi_hat_trivial(&self) -> bool {
        match self {
            Self::PsiURho { delta, .. } => *delta == 0.0,
            Self::NuU { .. } => true,
            Self::Composite { g, delta, .. } => *delta == 0.0 && g.is_constant(),
        }
    }

    /// `G(s, s)` for the centred ball of radius `s` at normal angle `theta`.
    pub fn on_ball(&self, theta: f64, s: f64, periodic: bool) -> f64 {
        self.value(theta, s, s, theta, periodic)
    }

    /// Nodal values of G from support samples and their θ-derivative.
    pub(crate) fn eval_nodes(&self, nodes: &[f64], u: &[f64], du: &[f64], periodic: bool) -> Vec<f64> {
        let (needs_rho, needs_xi) = match self {
            Self::PsiURho { delta, .. } => (*delta != 0.0, false),
            Self::NuU { .. } => (false, false),
            Self::Composite { g, delta, .. } => (*delta != 0.0, !g.is_constant()),
        };
        nodes
            .iter()
            .zip(u.iter().zip(du))
            .map(|(&t, (&u, &d))| {
                let rho = if needs_rho { u.hypot(d) } else { u };
                let xi = if needs_xi { t + d.atan2(u) } else { t };
                self.value(t, u, rho, xi, periodic)
            })
            .collect()
    }
}

/// `x^e` with shortcuts for the common exponents.
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == -1.0 {
        1.0 / x
    } else if e == 0.5 {
        x.sqrt()
    } else if e == -0.5 {
        1.0 / x.sqrt()
    } else {
        x.powf(e)
    }
}

fn finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("exponents must be finite".into()))
    }
}

/// `G` at every node of `body`.
pub fn eval_g(spec: &ForcingSpec, body: &ConvexBodyState) -> ScalarField {
    let grid = body.grid();
    let periodic = grid.kind() == GridKind::Circle;
    ScalarField::from_values(spec.eval_nodes(grid.nodes(), body.u(), body.du(), periodic))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionIReport {
    pub verdict: Verdict,
    /// Largest probed `s` below which `min_x G s^β > 1` throughout.
    pub s_minus: Option<f64>,
    /// Smallest probed `s` above which `max_x G s^β < 1` throughout.
    pub s_plus: Option<f64>,
    /// `sup max_x G s^β` over the top decade of the window.
    pub upper_tail: f64,
    /// `inf min_x G s^β` over the bottom decade of the window.
    pub lower_tail: f64,
}

pub const DEFAULT_FAN: usize = 64;
const S_LO: f64 = 1e-4;
const S_HI: f64 = 1e4;
const PER_DECADE: usize = 20;

fn fan(kind: GridKind, count: usize) -> Vec<f64> {
    match kind {
        GridKind::Circle => (0..count).map(|i| 2.0 * PI * i as f64 / count as f64).collect(),
        GridKind::Axisymmetric => (0..count).map(|i| PI * i as f64 / (count - 1).max(1) as f64).collect(),
    }
}

fn log_samples() -> Vec<f64> {
    let decades = (S_HI / S_LO).log10().round() as usize;
    let n = decades * PER_DECADE;
    (0..=n).map(|i| S_LO * 10f64.powf(i as f64 / PER_DECADE as f64)).collect()
}

/// Probes the asymptotic condition on `G(x, sx) s^β` on a finite window.
pub fn check_condition_i(spec: &ForcingSpec, beta: f64, kind: GridKind, directions: usize) -> Result<ConditionIReport> {
    if !(beta > 0.0) {
        return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
    }
    if directions == 0 {
        return Err(Error::InvalidParameter("direction fan must be non-empty".into()));
    }
    let periodic = kind == GridKind::Circle;
    let dirs = fan(kind, directions);
    let s = log_samples();
    let (h_max, h_min): (Vec<f64>, Vec<f64>) = s
        .iter()
        .map(|&s| {
            dirs.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &t| {
                let h = spec.on_ball(t, s, periodic) * s.powf(beta);
                (hi.max(h), lo.min(h))
            })
        })
        .unzip();
    let n = s.len();
    let top = n - 1 - PER_DECADE..n;
    let bottom = 0..=PER_DECADE;
    let upper_tail = h_max[top.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lower_tail = h_min[bottom.clone()].iter().copied().fold(f64::INFINITY, f64::min);
    let upper_ok = upper_tail < 1.0;
    let lower_ok = lower_tail > 1.0;
    let upper_bad = !upper_ok && h_max[n - 1] >= h_max[n - 1 - PER_DECADE];
    let lower_bad = !lower_ok && h_min[0] <= h_min[PER_DECADE];
    let verdict = if upper_ok && lower_ok {
        Verdict::Pass
    } else if upper_bad || lower_bad {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    let below = h_min.iter().take_while(|&&h| h > 1.0).count();
    let s_minus = (below > 0).then(|| s[below - 1]);
    let above = h_max.iter().rev().take_while(|&&h| h < 1.0).count();
    let s_plus = (above > 0).then(|| s[n - above]);
    Ok(ConditionIReport { verdict, s_minus, s_plus, upper_tail, lower_tail })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionIIReport {
    pub min_eigenvalue: f64,
    pub node: usize,
    pub pass: bool,
}

/// Smallest eigenvalue of `D²w + w I` with `w = (G u)^{1/(β+1)}`, where the
/// ambient slot of G is frozen at each node's boundary point.
pub fn check_condition_ii(spec: &ForcingSpec, beta: f64, body: &ConvexBodyState) -> Result<ConditionIIReport> {
    if !(beta > 0.0) {
        return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
    }
    let grid = body.grid();
    let periodic = grid.kind() == GridKind::Circle;
    let axisym_n = if grid.kind() == GridKind::Axisymmetric { grid.dim() } else { 1 };
    let exp = 1.0 / (beta + 1.0);
    let h = 1e-4;
    let mut worst = (0, f64::INFINITY);
    for j in 0..grid.len() {
        let theta_j = grid.nodes()[j];
        let x = body.point(j);
        let rho = x[0].hypot(x[1]);
        let xi = x[1].atan2(x[0]);
        let w = |theta: f64, support: f64| (spec.value(theta, support, rho, xi, periodic) * support).powf(exp);
        let meridian = |s: f64| {
            let t = theta_j + s;
            w(t, x[0] * t.cos() + x[1] * t.sin())
        };
        let w0 = meridian(0.0);
        let d2 = (meridian(h) + meridian(-h) - 2.0 * w0) / (h * h);
        let mut lam = d2 + w0;
        if axisym_n > 1 {
            let u_j = body.u()[j];
            let parallel = |s: f64| {
                let polar = (s.cos() * theta_j.cos()).clamp(-1.0, 1.0).acos();
                w(polar, u_j * s.cos())
            };
            let d2p = (parallel(h) + parallel(-h) - 2.0 * w0) / (h * h);
            lam = lam.min(d2p + w0);
        }
        if lam < worst.1 || lam.is_nan() {
            worst = (j, lam);
        }
    }
    Ok(ConditionIIReport { min_eigenvalue: worst.1, node: worst.0, pass: worst.1 > 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionIIIReport {
    /// Largest sampled `u G_u/G + ρ G_ρ/G + β`.
    pub max_value: f64,
    pub pass: bool,
}

pub const CONDITION_III_SLACK: f64 = 1e-10;

/// Samples the decay condition `u G_u/G + ρ G_ρ/G + β ≤ 0` on a box
/// `0 < u ≤ ρ`.
pub fn check_condition_iii(spec: &ForcingSpec, beta: f64) -> Result<ConditionIIIReport> {
    if !(beta > 0.0) {
        return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
    }
    if !spec.depends_on_u_rho_only() {
        return Err(Error::Precondition("condition (iii) needs G = G(u, rho) with no x-dependence".into()));
    }
    let g = |u: f64, rho: f64| spec.value(0.0, u, rho, 0.0, true).ln();
    let h: f64 = 1e-4;
    let mut max_value = f64::NEG_INFINITY;
    for i in 0..=40 {
        let u = 1e-2 * 10f64.powf(i as f64 / 10.0);
        for r in [1.0, 1.25, 1.5, 2.0, 3.0, 4.0] {
            let rho = r * u;
            let du = (g(u * h.exp(), rho) - g(u * (-h).exp(), rho)) / (2.0 * h);
            let dr = (g(u, rho * h.exp()) - g(u, rho * (-h).exp())) / (2.0 * h);
            max_value = max_value.max(du + dr + beta);
        }
    }
    Ok(ConditionIIIReport { max_value, pass: max_value <= CONDITION_III_SLACK })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub samples: usize,
    /// Number of samples with `m > 1` for which the inequality holds.
    pub counterexamples: usize,
    /// Largest `G(x, ms₁, ms₂) m^β / G(x, s₁, s₂)` seen with `m > 1`.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Searches for `m > 1` with `G(x, ms₁, ms₂) ≥ G(x, s₁, s₂) m^{−β}`.
///
/// The composite kind is probed with `ξ = x`.
pub fn check_uniqueness_condition(
    spec: &ForcingSpec,
    beta: f64,
    kind: GridKind,
    samples: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    let periodic = kind == GridKind::Circle;
    let span = if periodic { 2.0 * PI } else { PI };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut counterexamples = 0;
    for _ in 0..samples {
        let theta = rng.gen_range(0.0..span);
        let s1 = 10f64.powf(rng.gen_range(-2.0..2.0));
        let s2 = s1 * rng.gen_range(1.0..4.0);
        let m = 1.0 + rng.gen_range(1e-3..9.0);
        let base = spec.value(theta, s1, s2, theta, periodic);
        let scaled = spec.value(theta, m * s1, m * s2, theta, periodic);
        let ratio = scaled * m.powf(beta) / base;
        worst = worst.max(ratio);
        if scaled >= base * m.powf(-beta) {
            counterexamples += 1;
        }
    }
    Ok(UniquenessReport { samples, counterexamples, worst_ratio: worst, pass: counterexamples == 0 })
}
