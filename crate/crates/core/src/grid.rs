//! Discretized parameter domains on the sphere.
//!
//! Two symmetry classes are supported:
//!
//! * [`GridKind::Circle`]: the full circle S¹ with `m` uniform nodes
//!   `θ_j = 2πj/m`, periodic spectral differentiation and the uniform rule.
//! * [`GridKind::Axisymmetric`]: fields on S^n that depend only on the polar
//!   angle θ measured from the symmetry axis. Nodes are cell centred,
//!   `θ_j = (j + ½)π/m`, so no node sits on a pole. Derivatives are second
//!   order centred differences with even reflection across both poles.
//!
//! Quadrature weights absorb the `sin^{n-1}θ` density and the measure of the
//! parallel sphere S^{n-1}, and are rescaled so constants integrate to |S^n|.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Circle,
    Axisymmetric,
}

/// `(n, m, kind)` triple from which a grid can be rebuilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub m: usize,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn build(&self) -> Result<SphereGrid> {
        SphereGrid::new(self.n, self.m, self.kind)
    }
}

/// Surface measure |S^n| = 2π^{(n+1)/2}/Γ((n+1)/2).
pub fn sphere_area(n: usize) -> f64 {
    // |S^0| = 2, |S^1| = 2π, |S^n| = 2π/(n-1) |S^{n-2}|
    let mut area = if n.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
    let mut k = if n.is_multiple_of(2) { 0 } else { 1 };
    while k < n {
        k += 2;
        area *= 2.0 * PI / (k as f64 - 1.0);
    }
    area
}

#[derive(Clone)]
struct SpectralPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Discretized sphere with quadrature weights and differentiation rules.
#[derive(Clone)]
pub struct SphereGrid {
    dim: usize,
    kind: GridKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
    plans: Option<SpectralPlans>,
}

impl fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereGrid")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("m", &self.nodes.len())
            .finish()
    }
}

impl PartialEq for SphereGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.kind == other.kind && self.nodes.len() == other.nodes.len()
    }
}

impl SphereGrid {
    pub fn new(dim: usize, m: usize, kind: GridKind) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidGrid(format!("dimension must be >= 1, got {dim}")));
        }
        if m < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "resolution must be >= {MIN_NODES}, got {m}"
            )));
        }
        match kind {
            GridKind::Circle => {
                if dim != 1 {
                    return Err(Error::InvalidGrid(format!(
                        "circle grids require n = 1, got n = {dim}"
                    )));
                }
                let spacing = 2.0 * PI / m as f64;
                let nodes = (0..m).map(|j| j as f64 * spacing).collect();
                let weights = vec![spacing; m];
                let mut planner = FftPlanner::new();
                let plans = SpectralPlans {
                    forward: planner.plan_fft_forward(m),
                    inverse: planner.plan_fft_inverse(m),
                };
                Ok(Self { dim, kind, nodes, weights, spacing, plans: Some(plans) })
            }
            GridKind::Axisymmetric => {
                let spacing = PI / m as f64;
                let nodes: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * spacing).collect();
                let mut weights = axisymmetric_weights(dim, &nodes, spacing);
                let total: f64 = weights.iter().sum();
                let scale = sphere_area(dim) / total;
                weights.iter_mut().for_each(|w| *w *= scale);
                Ok(Self { dim, kind, nodes, weights, spacing, plans: None })
            }
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.dim, m: self.len(), kind: self.kind }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node angles θ_j.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node spacing h in θ.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn total_measure(&self) -> f64 {
        sphere_area(self.dim)
    }

    /// Unit normal at node `j`, written in the plane spanned by the first
    /// ambient axis and the meridian direction.
    pub fn direction(&self, j: usize) -> [f64; 2] {
        let theta = self.nodes[j];
        [theta.cos(), theta.sin()]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), found: len });
        }
        Ok(())
    }

    /// Quadrature Σ_j w_j f_j.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(self.integrate_unchecked(f))
    }

    pub(crate) fn integrate_unchecked(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Samples of the θ-derivative of order 1 or 2.
    pub fn differentiate(&self, f: &[f64], order: u8) -> Result<ScalarField> {
        self.check_len(f.len())?;
        let (d1, d2) = self.derivatives(f);
        match order {
            1 => Ok(ScalarField(d1)),
            2 => Ok(ScalarField(d2)),
            _ => Err(Error::InvalidParameter(format!(
                "derivative order must be 1 or 2, got {order}"
            ))),
        }
    }

    /// First and second θ-derivatives in one pass.
    pub(crate) fn derivatives(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.plans {
            Some(plans) => spectral_derivatives(plans, f),
            None => reflected_differences(f, self.spacing),
        }
    }

    /// Smooth interpolant through the nodal values.
    pub fn interpolant(&self, f: &[f64]) -> Result<Interpolant> {
        self.check_len(f.len())?;
        let m = f.len();
        match &self.plans {
            Some(plans) => {
                let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
                plans.forward.process(&mut buf);
                let scale = 1.0 / m as f64;
                let mut cos = Vec::with_capacity(m / 2 + 1);
                let mut sin = Vec::with_capacity(m / 2 + 1);
                cos.push(buf[0].re * scale);
                sin.push(0.0);
                for k in 1..=m / 2 {
                    let c = buf[k] * scale;
                    if 2 * k == m {
                        cos.push(c.re);
                        sin.push(0.0);
                    } else {
                        cos.push(2.0 * c.re);
                        sin.push(-2.0 * c.im);
                    }
                }
                Ok(Interpolant { cos, sin, periodic: true })
            }
            None => {
                // DCT-II of the evenly reflected samples.
                let mut cos = Vec::with_capacity(m);
                for k in 0..m {
                    let kf = k as f64;
                    let a: f64 = f
                        .iter()
                        .zip(&self.nodes)
                        .map(|(v, t)| v * (kf * t).cos())
                        .sum::<f64>()
                        * 2.0
                        / m as f64;
                    cos.push(if k == 0 { 0.5 * a } else { a });
                }
                Ok(Interpolant { sin: vec![0.0; m], cos, periodic: false })
            }
        }
    }
}

fn axisymmetric_weights(dim: usize, nodes: &[f64], spacing: f64) -> Vec<f64> {
    let m = nodes.len();
    let parallel = sphere_area(dim - 1);
    if dim % 2 == 1 {
        // sin^{n-1}θ is an even trigonometric polynomial: the midpoint rule
        // is spectrally accurate for smooth axisymmetric integrands.
        nodes
            .iter()
            .map(|t| spacing * t.sin().powi(dim as i32 - 1) * parallel)
            .collect()
    } else {
        // Fejér's first rule in x = cos θ for the remaining sin θ factor.
        nodes
            .iter()
            .map(|&t| {
                let tail: f64 = (1..=m / 2)
                    .map(|k| {
                        let k = k as f64;
                        (2.0 * k * t).cos() / (4.0 * k * k - 1.0)
                    })
                    .sum();
                let fejer = 2.0 / m as f64 * (1.0 - 2.0 * tail);
                fejer * t.sin().powi(dim as i32 - 2) * parallel
            })
            .collect()
    }
}

fn spectral_derivatives(plans: &SpectralPlans, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = f.len();
    let mut hat: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    plans.forward.process(&mut hat);
    let mut d1 = hat.clone();
    let mut d2 = hat;
    for j in 0..m {
        let k = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
        if 2 * j == m {
            d1[j] = Complex::new(0.0, 0.0);
        } else {
            d1[j] *= Complex::new(0.0, k);
        }
        d2[j] *= -k * k;
    }
    plans.inverse.process(&mut d1);
    plans.inverse.process(&mut d2);
    let scale = 1.0 / m as f64;
    (
        d1.iter().map(|c| c.re * scale).collect(),
        d2.iter().map(|c| c.re * scale).collect(),
    )
}

fn reflected_differences(f: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let m = f.len();
    let at = |j: isize| -> f64 {
        if j < 0 {
            f[(-j - 1) as usize]
        } else if j as usize >= m {
            f[2 * m - 1 - j as usize]
        } else {
            f[j as usize]
        }
    };
    let mut d1 = Vec::with_capacity(m);
    let mut d2 = Vec::with_capacity(m);
    for j in 0..m as isize {
        let (l, c, r) = (at(j - 1), at(j), at(j + 1));
        d1.push((r - l) / (2.0 * h));
        d2.push((r - 2.0 * c + l) / (h * h));
    }
    (d1, d2)
}

/// Trigonometric interpolant `Σ a_k cos kθ + b_k sin kθ`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    cos: Vec<f64>,
    sin: Vec<f64>,
    periodic: bool,
}

impl Interpolant {
    /// Value, first and second derivative at θ.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            v += a * c + b * s;
            d1 += kf * (b * c - a * s);
            d2 -= kf * kf * (a * c + b * s);
        }
        (v, d1, d2)
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.eval(theta).0
    }

    /// True for circle grids; axisymmetric interpolants are even in θ.
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }
}

/// Nodal samples of a scalar quantity on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(grid: &SphereGrid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self(values))
    }

    pub fn from_fn(grid: &SphereGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&t| f(t)).collect())
    }

    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(grid: &SphereGrid, value: f64) -> Self {
        Self(vec![value; grid.len()])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for ScalarField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ScalarField> for Vec<f64> {
    fn from(f: ScalarField) -> Self {
        f.0
    }
}
