//! Convex bodies described by their support function on the grid.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curvature::Radii;
use crate::error::{Error, Result};
use crate::grid::{GridKind, Interpolant, ScalarField, SphereGrid};
use crate::numeric::{golden_max, golden_min};

/// One trigonometric mode `a cos kθ + b sin kθ` of a perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Closed-form bodies used as initial data and test fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyRecipe {
    Ball { radius: f64 },
    /// Ball translated by `center`, written in the (axis, meridian) plane.
    OffsetBall { radius: f64, center: [f64; 2] },
    /// Semi-axis `a` along the first axis and `b` in every other direction.
    Ellipse { a: f64, b: f64 },
    /// `u = R(1 + ε q(θ))` with `q` a trigonometric polynomial.
    PerturbedBall { radius: f64, amplitude: f64, modes: Vec<Mode> },
}

impl BodyRecipe {
    /// Support function samples on `grid`.
    pub fn support(&self, grid: &SphereGrid) -> Result<Vec<f64>> {
        let axisym = grid.kind() == GridKind::Axisymmetric;
        let nodes = grid.nodes();
        let u = match self {
            Self::Ball { radius } => vec![*radius; grid.len()],
            Self::OffsetBall { radius, center } => {
                if axisym && center[1] != 0.0 {
                    return Err(Error::InvalidParameter(
                        "axisymmetric grids need the center on the symmetry axis".into(),
                    ));
                }
                nodes.iter().map(|t| radius + center[0] * t.cos() + center[1] * t.sin()).collect()
            }
            Self::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::InvalidParameter(format!("ellipse semi-axes must be positive, got {a}, {b}")));
                }
                nodes.iter().map(|t| (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt()).collect()
            }
            Self::PerturbedBall { radius, amplitude, modes } => {
                if axisym && modes.iter().any(|m| m.sin != 0.0) {
                    return Err(Error::InvalidParameter(
                        "axisymmetric perturbations admit cosine modes only".into(),
                    ));
                }
                nodes
                    .iter()
                    .map(|&t| {
                        let q: f64 = modes
                            .iter()
                            .map(|m| m.cos * (m.k as f64 * t).cos() + m.sin * (m.k as f64 * t).sin())
                            .sum();
                        radius * (1.0 + amplitude * q)
                    })
                    .collect()
            }
        };
        Ok(u)
    }
}

/// Builds the body state described by `recipe`.
pub fn realize(recipe: &BodyRecipe, grid: &Arc<SphereGrid>) -> Result<ConvexBodyState> {
    ConvexBodyState::from_support(grid.clone(), recipe.support(grid)?)
}

/// Support function samples with every derived field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBodyState {
    grid: Arc<SphereGrid>,
    u: Vec<f64>,
    du: Vec<f64>,
    d2u: Vec<f64>,
    rho: Vec<f64>,
    radii: Radii,
}

impl ConvexBodyState {
    /// Builds a state and rejects bodies that are not strictly convex or do
    /// not contain the origin.
    pub fn from_support(grid: Arc<SphereGrid>, u: Vec<f64>) -> Result<Self> {
        let state = Self::from_support_unchecked(grid, u)?;
        state.admissible()?;
        Ok(state)
    }

    /// Builds a state without the admissibility checks; only lengths and
    /// finiteness are enforced. Useful for diagnosing bad data.
    pub fn from_support_unchecked(grid: Arc<SphereGrid>, u: Vec<f64>) -> Result<Self> {
        let u = ScalarField::new(&grid, u)?.into_inner();
        let (du, d2u) = grid.derivatives(&u);
        let rho = u.iter().zip(&du).map(|(a, b)| a.hypot(*b)).collect();
        let radii = Radii::from_derivatives(&grid, &u, &du, &d2u);
        Ok(Self { grid, u, du, d2u, rho, radii })
    }

    fn admissible(&self) -> Result<()> {
        for (j, &v) in self.u.iter().enumerate() {
            if !(v > 0.0) {
                return Err(self.inadmissible(j, format!("support function {v} is not positive")));
            }
        }
        let (j, lam) = self.radii.min();
        if !(lam > 0.0) {
            return Err(self.inadmissible(j, format!("principal radius {lam} is not positive")));
        }
        Ok(())
    }

    fn inadmissible(&self, node: usize, reason: String) -> Error {
        Error::Inadmissible { node, angle: self.grid.nodes()[node], reason }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn du(&self) -> &[f64] {
        &self.du
    }

    pub fn d2u(&self) -> &[f64] {
        &self.d2u
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn radii(&self) -> &Radii {
        &self.radii
    }

    pub fn u_min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rho_min(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn rho_max(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |Du| / u` over the nodes; zero exactly for centred balls.
    pub fn gradient_ratio(&self) -> f64 {
        self.u.iter().zip(&self.du).map(|(u, d)| d.abs() / u).fold(0.0, f64::max)
    }

    /// Boundary point `X_j = u_j x_j + u'_j e_θ` in the (axis, meridian) plane.
    pub fn point(&self, j: usize) -> [f64; 2] {
        let t = self.grid.nodes()[j];
        let (s, c) = t.sin_cos();
        [self.u[j] * c - self.du[j] * s, self.u[j] * s + self.du[j] * c]
    }

    /// Unit radial direction of `X_j`.
    pub fn point_direction(&self, j: usize) -> [f64; 2] {
        let p = self.point(j);
        let r = p[0].hypot(p[1]);
        [p[0] / r, p[1] / r]
    }

    pub fn interpolant(&self) -> Interpolant {
        self.grid.interpolant(&self.u).expect("support samples match the grid")
    }
}

/// Embedding points `X_j = Du + u x` in R^{n+1}; the meridian plane occupies
/// the first two coordinates and the rest vanish.
pub fn embedding(state: &ConvexBodyState) -> Vec<Vec<f64>> {
    let n = state.dim();
    (0..state.u.len())
        .map(|j| {
            let p = state.point(j);
            let mut x = vec![0.0; n + 1];
            x[0] = p[0];
            x[1] = p[1];
            x
        })
        .collect()
}

/// Radial function `ρ(ξ) = min_x u(x)/⟨x, ξ⟩` for a direction in the
/// (axis, meridian) plane.
pub fn radial_function(state: &ConvexBodyState, xi: [f64; 2]) -> f64 {
    let phi = xi[1].atan2(xi[0]);
    let grid = state.grid();
    let nodes = grid.nodes();
    let mirrored = grid.kind() == GridKind::Axisymmetric;
    let mut best = (f64::NAN, f64::INFINITY);
    for (j, &t) in nodes.iter().enumerate() {
        for theta in [t, -t].into_iter().take(if mirrored { 2 } else { 1 }) {
            let c = (theta - phi).cos();
            if c > 0.0 {
                let v = state.u[j] / c;
                if v < best.1 {
                    best = (theta, v);
                }
            }
        }
    }
    let interp = state.interpolant();
    let h = grid.spacing();
    let lo = best.0 - h;
    let hi = best.0 + h;
    let ratio = |theta: f64| {
        let c = (theta - phi).cos();
        if c > 0.0 {
            interp.value(theta) / c
        } else {
            f64::INFINITY
        }
    };
    let (_, refined) = golden_min(ratio, lo, hi, 1e-12);
    refined.min(best.1)
}

/// Pullback density `|JacA*| = u Π λ_i / ρ^{n+1}` of the radial Gauss map.
pub fn gauss_jacobian(state: &ConvexBodyState) -> ScalarField {
    let n = state.dim() as i32;
    let values = (0..state.u.len())
        .map(|j| state.u[j] * state.radii.product(j) / state.rho[j].powi(n + 1))
        .collect();
    ScalarField::from_values(values)
}

/// A single named admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// Signed slack; nonnegative when the inequality holds exactly.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyReport {
    pub checks: Vec<Check>,
    pub tolerance: f64,
}

impl BodyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Refined extremum of `g` near node `j`, searched on the interpolant.
fn refine(g: impl Fn(f64) -> f64, theta: f64, h: f64, maximize: bool) -> (f64, f64) {
    if maximize {
        golden_max(g, theta - h, theta + h, 1e-13)
    } else {
        golden_min(g, theta - h, theta + h, 1e-13)
    }
}

fn arg_extreme(v: &[f64], maximize: bool) -> usize {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if (maximize && *x > v[best]) || (!maximize && *x < v[best]) {
            best = j;
        }
    }
    best
}

/// Checks positivity, strict convexity and the basic support/radial
/// inequalities, reporting a margin for each.
pub fn verify_body(state: &ConvexBodyState) -> BodyReport {
    let tol = 1e-8 * state.u_max().max(1.0);
    let nodes = state.grid.nodes();
    let h = state.grid.spacing();
    let mut checks = Vec::with_capacity(5);

    let u_min = state.u_min();
    checks.push(Check { name: "u_positive", pass: u_min > 0.0, margin: u_min });
    let lam_min = state.radii.min().1;
    checks.push(Check { name: "radii_positive", pass: lam_min > 0.0, margin: lam_min });

    let interp = state.interpolant();
    let u_t = |t: f64| interp.value(t);
    let rho_t = |t: f64| {
        let (v, d, _) = interp.eval(t);
        v.hypot(d)
    };
    let ju = arg_extreme(&state.u, true);
    let jr = arg_extreme(&state.rho, true);
    let (theta_max, u_hi) = refine(u_t, nodes[ju], h, true);
    let (_, rho_hi) = refine(rho_t, nodes[jr], h, true);
    let ju = arg_extreme(&state.u, false);
    let jr = arg_extreme(&state.rho, false);
    let (theta_min, u_lo) = refine(u_t, nodes[ju], h, false);
    let (_, rho_lo) = refine(rho_t, nodes[jr], h, false);
    let gap = (u_hi - rho_hi).abs().max((u_lo - rho_lo).abs());
    checks.push(Check { name: "extrema_agree", pass: gap <= tol, margin: -gap });

    let support_slack = nodes
        .iter()
        .zip(&state.u)
        .map(|(t, u)| u - (t - theta_max).cos() * u_hi)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check { name: "support_lower_bound", pass: support_slack >= -tol, margin: support_slack });

    let xi_min = [theta_min.cos(), theta_min.sin()];
    let radial_slack = (0..nodes.len())
        .map(|j| {
            let d = state.point_direction(j);
            rho_lo - state.rho[j] * (d[0] * xi_min[0] + d[1] * xi_min[1])
        })
        .fold(f64::INFINITY, f64::min);
    checks.push(Check { name: "radial_upper_bound", pass: radial_slack >= -tol, margin: radial_slack });

    BodyReport { checks, tolerance: tol }
}

/// Comma-separated table `angle,u,rho,lambda_1..lambda_n`.
pub fn body_table(state: &ConvexBodyState) -> String {
    let n = state.dim();
    let mut out = String::from("angle,u,rho");
    for i in 1..=n {
        let _ = write!(out, ",lambda_{i}");
    }
    out.push('\n');
    for (j, t) in state.grid.nodes().iter().enumerate() {
        let _ = write!(out, "{t:.17e},{:.17e},{:.17e}", state.u[j], state.rho[j]);
        for l in state.radii.at(j) {
            let _ = write!(out, ",{l:.17e}");
        }
        out.push('\n');
    }
    out
}

/// Polar angle of a direction in the (axis, meridian) plane, in `[0, 2π)`.
pub fn planar_angle(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(2.0 * PI)
}
