//! Seeded random corpus of smooth convex bodies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::{BodyRecipe, Mode};
use crate::grid::GridKind;

/// Upper bound on `ε Σ (k² + 1)(|a_k| + |b_k|)`, which keeps every principal
/// radius of `R(1 + ε q)` above `R/2`.
pub const CURVATURE_CAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusParams {
    pub radius_range: (f64, f64),
    /// Highest mode number in the perturbation.
    pub max_mode: u32,
    /// Fraction of [`CURVATURE_CAP`] used by each body, drawn from this range.
    pub cap_fraction: (f64, f64),
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self { radius_range: (0.5, 2.0), max_mode: 3, cap_fraction: (0.2, 0.95) }
    }
}

/// `count` perturbed balls `R(1 + ε q(θ))`. On axisymmetric grids only
/// cosine modes are drawn.
pub fn perturbed_balls(count: usize, kind: GridKind, params: &CorpusParams, seed: u64) -> Vec<BodyRecipe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw(&mut rng, kind, params)).collect()
}

fn draw(rng: &mut ChaCha8Rng, kind: GridKind, params: &CorpusParams) -> BodyRecipe {
    let radius = rng.gen_range(params.radius_range.0..=params.radius_range.1);
    let modes: Vec<Mode> = (1..=params.max_mode.max(1))
        .map(|k| Mode {
            k,
            cos: rng.gen_range(-1.0..=1.0),
            sin: if kind == GridKind::Circle { rng.gen_range(-1.0..=1.0) } else { 0.0 },
        })
        .collect();
    let weight: f64 = modes.iter().map(|m| (f64::from(m.k * m.k) + 1.0) * (m.cos.abs() + m.sin.abs())).sum();
    let fraction = rng.gen_range(params.cap_fraction.0..=params.cap_fraction.1);
    let amplitude = if weight > 0.0 { CURVATURE_CAP * fraction / weight } else { 0.0 };
    BodyRecipe::PerturbedBall { radius, amplitude, modes }
}

/// `count` independent pairs drawn from one stream.
pub fn pairs(count: usize, kind: GridKind, params: &CorpusParams, seed: u64) -> Vec<(BodyRecipe, BodyRecipe)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (draw(&mut rng, kind, params), draw(&mut rng, kind, params))).collect()
}
