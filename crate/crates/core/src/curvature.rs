//! Curvature functions of the principal radii.
//!
//! Every function in the catalog is symmetric, positive and homogeneous of
//! degree one on the positive cone, normalized so that `F(1,…,1) = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridKind, ScalarField, SphereGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvatureKind {
    /// `(σ_k / C(n,k))^{1/k}`
    SigmaKRoot { k: usize },
    /// `σ_n^{1/n}`
    Gauss,
    /// `((σ_k / C(n,k)) / (σ_l / C(n,l)))^{1/(k-l)}`
    SigmaQuotient { k: usize, l: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvatureSpec {
    kind: CurvatureKind,
    n: usize,
}

impl CurvatureSpec {
    pub fn new(kind: CurvatureKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("curvature dimension must be >= 1".into()));
        }
        match kind {
            CurvatureKind::SigmaKRoot { k } if k == 0 || k > n => {
                return Err(Error::InvalidParameter(format!("sigma_k_root needs 1 <= k <= n, got k={k}, n={n}")));
            }
            CurvatureKind::SigmaQuotient { k, l } if l == 0 || l >= k || k > n => {
                return Err(Error::InvalidParameter(format!(
                    "sigma_quotient needs 1 <= l < k <= n, got k={k}, l={l}, n={n}"
                )));
            }
            _ => {}
        }
        Ok(Self { kind, n })
    }

    pub fn sigma_k_root(k: usize, n: usize) -> Result<Self> {
        Self::new(CurvatureKind::SigmaKRoot { k }, n)
    }

    pub fn gauss(n: usize) -> Result<Self> {
        Self::new(CurvatureKind::Gauss, n)
    }

    pub fn kind(&self) -> CurvatureKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Exponent k for which `F^k` is proportional to σ_k, when it exists.
    pub fn divergence_free_power(&self) -> Option<usize> {
        match self.kind {
            CurvatureKind::SigmaKRoot { k } => Some(k),
            CurvatureKind::Gauss => Some(self.n),
            CurvatureKind::SigmaQuotient { .. } => None,
        }
    }

    /// True when `F^k` is divergence free on the sphere, which is what the
    /// modified quermassintegral needs.
    pub fn divergence_free_eligible(&self) -> bool {
        self.divergence_free_power().is_some()
    }

    fn check(&self, lam: &[f64]) -> Result<()> {
        if lam.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "expected {} radii, got {}",
                self.n,
                lam.len()
            )));
        }
        match lam.iter().find(|&&l| !(l > 0.0)) {
            Some(&bad) => Err(Error::NonPositiveRadius(bad)),
            None => Ok(()),
        }
    }

    pub fn eval(&self, lam: &[f64]) -> Result<f64> {
        self.check(lam)?;
        Ok(self.eval_unchecked(lam))
    }

    pub(crate) fn eval_unchecked(&self, lam: &[f64]) -> f64 {
        let n = self.n;
        match self.kind {
            CurvatureKind::SigmaKRoot { k } => {
                crate::forcing::pow(sigma(lam, k) / binomial(n, k), 1.0 / k as f64)
            }
            CurvatureKind::Gauss => lam.iter().product::<f64>().powf(1.0 / n as f64),
            CurvatureKind::SigmaQuotient { k, l } => {
                let num = sigma(lam, k) / binomial(n, k);
                let den = sigma(lam, l) / binomial(n, l);
                (num / den).powf(1.0 / (k - l) as f64)
            }
        }
    }

    /// Value of F and its gradient `∂F/∂λ_i` written into `grad`.
    pub fn grad(&self, lam: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check(lam)?;
        if grad.len() != self.n {
            return Err(Error::InvalidParameter("gradient buffer has wrong length".into()));
        }
        Ok(self.grad_unchecked(lam, grad))
    }

    pub(crate) fn grad_unchecked(&self, lam: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.eval_unchecked(lam);
        match self.kind {
            CurvatureKind::SigmaKRoot { k } => {
                let sk = sigma(lam, k);
                for (i, g) in grad.iter_mut().enumerate() {
                    *g = f / (k as f64 * sk) * sigma_without(lam, i, k - 1);
                }
            }
            CurvatureKind::Gauss => {
                for (g, l) in grad.iter_mut().zip(lam) {
                    *g = f / (self.n as f64 * l);
                }
            }
            CurvatureKind::SigmaQuotient { k, l } => {
                let sk = sigma(lam, k);
                let sl = sigma(lam, l);
                let p = 1.0 / (k - l) as f64;
                for (i, g) in grad.iter_mut().enumerate() {
                    *g = f * p * (sigma_without(lam, i, k - 1) / sk - sigma_without(lam, i, l - 1) / sl);
                }
            }
        }
        f
    }

    /// `F^k` with k the divergence-free power: `σ_k / C(n,k)`.
    pub fn power_k(&self, lam: &[f64]) -> Result<f64> {
        self.check(lam)?;
        match self.kind {
            CurvatureKind::SigmaKRoot { k } => Ok(sigma(lam, k) / binomial(self.n, k)),
            CurvatureKind::Gauss => Ok(lam.iter().product()),
            CurvatureKind::SigmaQuotient { .. } => Err(Error::Precondition(
                "F^k is not divergence free for sigma quotients".into(),
            )),
        }
    }

    /// Dual function `F_*(κ) = 1 / F(1/κ)`.
    pub fn dual(&self, kappa: &[f64]) -> Result<f64> {
        let inv: Vec<f64> = kappa.iter().map(|k| 1.0 / k).collect();
        Ok(1.0 / self.eval(&inv)?)
    }

    /// Values of F at every node.
    pub fn eval_field(&self, radii: &Radii) -> Result<ScalarField> {
        let mut buf = vec![0.0; self.n];
        let mut out = Vec::with_capacity(radii.len());
        for j in 0..radii.len() {
            radii.fill(j, &mut buf);
            out.push(self.eval(&buf)?);
        }
        Ok(ScalarField::from_values(out))
    }

    /// Gradient fields, one per eigenvalue slot.
    pub fn grad_field(&self, radii: &Radii) -> Result<Vec<ScalarField>> {
        let mut buf = vec![0.0; self.n];
        let mut g = vec![0.0; self.n];
        let mut out = vec![Vec::with_capacity(radii.len()); self.n];
        for j in 0..radii.len() {
            radii.fill(j, &mut buf);
            self.grad(&buf, &mut g)?;
            for (col, v) in out.iter_mut().zip(&g) {
                col.push(*v);
            }
        }
        Ok(out.into_iter().map(ScalarField::from_values).collect())
    }
}

/// Elementary symmetric polynomial σ_k.
pub fn sigma(lam: &[f64], k: usize) -> f64 {
    if k > lam.len() {
        return 0.0;
    }
    elementary(lam, None, k)
}

/// σ_k of `lam` with entry `skip` removed.
fn sigma_without(lam: &[f64], skip: usize, k: usize) -> f64 {
    elementary(lam, Some(skip), k)
}

const STACK_ORDER: usize = 16;

fn elementary(lam: &[f64], skip: Option<usize>, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut stack = [0.0; STACK_ORDER + 1];
    let mut heap;
    let e: &mut [f64] = if k <= STACK_ORDER {
        &mut stack[..=k]
    } else {
        heap = vec![0.0; k + 1];
        &mut heap
    };
    e[0] = 1.0;
    for (i, &l) in lam.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        for j in (1..=k).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e[k]
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Principal curvature radii, stored per symmetry class.
///
/// On the circle there is a single radius `u'' + u`. On axisymmetric grids
/// the meridian radius `u'' + u` has multiplicity one and the parallel radius
/// `u' cot θ + u` has multiplicity `n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Radii {
    n: usize,
    meridian: Vec<f64>,
    parallel: Vec<f64>,
}

impl Radii {
    pub fn from_derivatives(grid: &SphereGrid, u: &[f64], du: &[f64], d2u: &[f64]) -> Self {
        let meridian: Vec<f64> = u.iter().zip(d2u).map(|(a, b)| a + b).collect();
        let parallel = match grid.kind() {
            GridKind::Circle => Vec::new(),
            GridKind::Axisymmetric if grid.dim() == 1 => Vec::new(),
            GridKind::Axisymmetric => {
                let h = grid.spacing();
                let pi = std::f64::consts::PI;
                grid.nodes()
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| {
                        if t < h || pi - t < h {
                            meridian[j]
                        } else {
                            du[j] * t.cos() / t.sin() + u[j]
                        }
                    })
                    .collect()
            }
        };
        Self { n: grid.dim(), meridian, parallel }
    }

    pub fn len(&self) -> usize {
        self.meridian.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meridian.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn meridian(&self) -> &[f64] {
        &self.meridian
    }

    /// Parallel radius with multiplicity `n − 1`; empty on S¹.
    pub fn parallel(&self) -> &[f64] {
        &self.parallel
    }

    /// Writes the full eigenvalue list `(λ₁, λ₂, …, λ₂)` at node `j`.
    pub fn fill(&self, j: usize, buf: &mut [f64]) {
        buf[0] = self.meridian[j];
        if self.n > 1 {
            buf[1..].fill(self.parallel[j]);
        }
    }

    pub fn at(&self, j: usize) -> Vec<f64> {
        let mut buf = vec![0.0; self.n];
        self.fill(j, &mut buf);
        buf
    }

    /// Product of all radii at node `j`, the reciprocal Gauss curvature.
    pub fn product(&self, j: usize) -> f64 {
        if self.n > 1 {
            self.meridian[j] * self.parallel[j].powi(self.n as i32 - 1)
        } else {
            self.meridian[j]
        }
    }

    /// Smallest radius over nodes and eigenvalue slots, with its node.
    pub fn min(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for j in 0..self.len() {
            let v = if self.n > 1 { self.meridian[j].min(self.parallel[j]) } else { self.meridian[j] };
            if v < best.1 || v.is_nan() {
                best = (j, v);
            }
        }
        best
    }
}

/// Result of a sampled midpoint-concavity test of the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `(F_*(κ) + F_*(κ'))/2 − F_*((κ+κ')/2)` seen; positive means a
    /// violation of concavity.
    pub worst_violation: f64,
    pub pass: bool,
}

pub const CONCAVITY_SLACK: f64 = 1e-10;

/// Probes inverse concavity of `spec` on random pairs of positive points.
pub fn inverse_concavity_probe(spec: &CurvatureSpec, sample_count: usize, seed: u64) -> Result<ConcavityReport> {
    if sample_count < 100 {
        return Err(Error::InvalidParameter(format!(
            "inverse concavity probe needs at least 100 samples, got {sample_count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect()
    };
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..sample_count {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let gap = 0.5 * (spec.dual(&a)? + spec.dual(&b)?) - spec.dual(&mid)?;
        worst = worst.max(gap);
        if gap > CONCAVITY_SLACK {
            violations += 1;
        }
    }
    Ok(ConcavityReport { samples: sample_count, violations, worst_violation: worst, pass: violations == 0 })
}
