//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use convex_flow::batch::map_par;
use convex_flow::body::{gauss_jacobian, radial_function, realize, verify_body, BodyRecipe, ConvexBodyState};
use convex_flow::corpus::{pairs, perturbed_balls, CorpusParams};
use convex_flow::curvature::{CurvatureKind, CurvatureSpec};
use convex_flow::flow::{
    monitor_suite, run_normalized, run_unnormalized_and_compare, FlowConfig, FlowSolver, FlowTrace, MonitorStatus,
    RunStatus, SignClass,
};
use convex_flow::forcing::{check_uniqueness_condition, eval_g, ForcingSpec, SphericalFactor, TrigTerm};
use convex_flow::functionals::{
    inequality_lp_minkowski, inequality_lp_quermass, inequality_unit_ball, lp_admissible, v_potential,
    variational_check, OrliczFunction,
};
use convex_flow::grid::{sphere_area, GridKind, GridSpec, SphereGrid};
use convex_flow::stationary::{roundness_certificate, solve_stationary, Certificate};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Traces of every flow run, for the run-wide monitor check.
#[derive(Default)]
struct Runs {
    traces: Vec<(String, FlowTrace)>,
}

impl Runs {
    fn add(&mut self, label: impl Into<String>, trace: &FlowTrace) {
        self.traces.push((label.into(), trace.clone()));
    }
}

fn circle(m: usize) -> GridSpec {
    GridSpec { n: 1, m, kind: GridKind::Circle }
}

fn axisym(n: usize, m: usize) -> GridSpec {
    GridSpec { n, m, kind: GridKind::Axisymmetric }
}

fn grid_of(spec: GridSpec) -> Arc<SphereGrid> {
    Arc::new(spec.build().expect("valid grid"))
}

fn sigma(k: usize) -> CurvatureKind {
    CurvatureKind::SigmaKRoot { k }
}

fn two_over_u() -> ForcingSpec {
    ForcingSpec::psi_u_rho(2.0, 0.0, 0.0)
}

fn trig(a: f64) -> SphericalFactor {
    SphericalFactor::Trig { a0: 1.0, terms: vec![TrigTerm::cos(2, a)], power: 1.0 }
}

fn label(g: GridSpec) -> String {
    match g.kind {
        GridKind::Circle => format!("S1/m{}", g.m),
        GridKind::Axisymmetric => format!("S{}/m{}", g.n, g.m),
    }
}

/// Radius of the ball solution of `R' = (2 R^{-1/2} − 1) R`; `√R` solves a
/// linear equation.
fn ode_radius(r0: f64, t: f64) -> f64 {
    (2.0 - (2.0 - r0.sqrt()) * (-t / 2.0).exp()).powi(2)
}

fn fixed_point() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for g in [circle(128), axisym(2, 128)] {
        for (forcing, radius) in [(ForcingSpec::psi_u_rho(1.0, 1.0, 0.0), 1.0), (two_over_u(), 4.0)] {
            let cfg = FlowConfig::new(0.5, sigma(1), forcing, g, BodyRecipe::Ball { radius });
            let solver = FlowSolver::new(&cfg, grid_of(g)).unwrap();
            let mut u = vec![radius; g.m];
            let dt = solver.stable_dt(&u, &cfg.dt).unwrap();
            let mut w: f64 = 0.0;
            for _ in 0..1000 {
                u = solver.step_rk4(&u, dt).unwrap();
                w = w.max(solver.residual(&u).unwrap());
            }
            worst = worst.max(w);
            parts.push(format!("{} R={radius}: {w:.1e}", label(g)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-12 && secs < 10.0, format!("max residual over 1000 steps {} ({secs:.1}s)", parts.join(", ")))
}

fn stationary_radius(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [circle(128), axisym(2, 128)] {
        for r0 in [0.5, 3.0] {
            let mut cfg = FlowConfig::new(0.5, sigma(1), two_over_u(), g, BodyRecipe::Ball { radius: r0 });
            cfg.checkpoint_every = 50;
            let start = Instant::now();
            let run = run_normalized(&cfg).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let sup = run.body.u().iter().map(|u| (u - 4.0).abs()).fold(0.0, f64::max);
            let ode = run
                .trace
                .rows
                .iter()
                .map(|r| (r.u_min - ode_radius(r0, r.t)).abs().max((r.u_max - ode_radius(r0, r.t)).abs()))
                .fold(0.0, f64::max);
            let ok = run.trace.status == RunStatus::Converged && sup < 1e-5 && ode < 1e-8 && secs < 30.0;
            pass &= ok;
            parts.push(format!("{} B{r0}: sup {sup:.1e}, ode {ode:.1e}, {secs:.1}s", label(g)));
            runs.add(format!("stationary {} B{r0}", label(g)), &run.trace);
        }
    }
    outcome(pass, parts.join("; "))
}

fn rescaling() -> Outcome {
    let g = circle(128);
    let mut cfg = FlowConfig::new(0.5, sigma(1), ForcingSpec::psi_u_rho(1.0, 0.0, 0.0), g, BodyRecipe::Ball { radius: 1.0 });
    cfg.c0 = Some(1.0);
    let ball = run_unnormalized_and_compare(&cfg, 3.0, 30).unwrap();
    let radius_err = ball
        .unnormalized
        .rows
        .iter()
        .map(|r| (r.u_max - (1.0 + r.t / 2.0).powi(2)).abs().max((r.u_min - (1.0 + r.t / 2.0).powi(2)).abs()))
        .fold(0.0, f64::max);
    let phi_err = ball.rows.iter().map(|r| (r.phi - (1.0 + r.t / 2.0).powi(2)).abs()).fold(0.0, f64::max);
    let ball_ok = radius_err < 1e-10 && ball.max_discrepancy < 1e-10 && phi_err < 1e-10;

    let mut cfg = cfg.clone();
    cfg.c0 = None;
    cfg.initial = BodyRecipe::Ellipse { a: 1.2, b: 1.0 };
    let ell = run_unnormalized_and_compare(&cfg, 3.0, 30).unwrap();
    let ell_ok = ell.max_discrepancy < 1e-6;
    outcome(
        ball_ok && ell_ok,
        format!(
            "unit ball: |R - (1+t/2)^2| {radius_err:.1e}, |u/phi - 1| {:.1e}; ellipse (C0 = {:.4}): discrepancy {:.1e} up to tau = 3",
            ball.max_discrepancy, ell.rescaling.c0, ell.max_discrepancy
        ),
    )
}

fn monotone_runs(runs: &mut Runs) -> Outcome {
    let params = CorpusParams::default();
    let quermass_class = ForcingSpec::NuU { c: 2.0, f: trig(0.2), p: 0.0 };
    let volume_class = ForcingSpec::Composite { c: 2.0, f: trig(0.1), p: 0.5, g: trig(0.2), delta: -0.5 };
    let mut cases = Vec::new();
    for seed in perturbed_balls(5, GridKind::Circle, &params, 41) {
        cases.push(("w_f - u", circle(128), sigma(1), quermass_class.clone(), seed));
    }
    for (i, seed) in perturbed_balls(5, GridKind::Axisymmetric, &params, 42).into_iter().enumerate() {
        let k = if i % 2 == 0 { 1 } else { 2 };
        cases.push(("w_f - u", axisym(2, 64), sigma(k), quermass_class.clone(), seed));
    }
    for seed in perturbed_balls(5, GridKind::Circle, &params, 43) {
        cases.push(("v - u", circle(128), CurvatureKind::Gauss, volume_class.clone(), seed));
    }
    for seed in perturbed_balls(5, GridKind::Axisymmetric, &params, 44) {
        cases.push(("v - u", axisym(2, 64), CurvatureKind::Gauss, volume_class.clone(), seed));
    }
    let results = map_par(&cases, |(class, g, curv, forcing, seed)| {
        let mut cfg = FlowConfig::new(0.5, *curv, forcing.clone(), *g, seed.clone());
        cfg.checkpoint_every = 100;
        (class.to_string(), *g, run_normalized(&cfg).unwrap())
    });
    let mut counts = [[0usize; 2]; 2];
    let mut worst = [f64::INFINITY; 2];
    let mut pass = true;
    for (class, g, run) in &results {
        let idx = usize::from(class == "v - u");
        let m = monitor_suite(&run.trace);
        let mono = m.get("monotone_quantity").unwrap();
        let stat = m.get("stationarity").unwrap();
        let ok = run.trace.status == RunStatus::Converged
            && mono.status == MonitorStatus::Pass
            && stat.status == MonitorStatus::Pass;
        counts[idx][0] += 1;
        counts[idx][1] += usize::from(ok);
        let inc = convex_flow::flow::monotone_series(&run.trace)
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (1.0 + w[0].1.abs()))
            .fold(f64::INFINITY, f64::min);
        worst[idx] = worst[idx].min(inc);
        pass &= ok;
        runs.add(format!("monotone class {class} {}", label(*g)), &run.trace);
    }
    outcome(
        pass,
        format!(
            "W_F - U: {}/{} runs monotone and stationary-consistent (worst relative step {:.1e}); V - U: {}/{} (worst {:.1e})",
            counts[0][1], counts[0][0], worst[0], counts[1][1], counts[1][0], worst[1]
        ),
    )
}

/// `Q − 1` range on the initial body, from the public forcing and curvature
/// evaluators.
fn initial_sign(cfg: &FlowConfig) -> SignClass {
    let grid = grid_of(cfg.grid);
    let body = realize(&cfg.initial, &grid).unwrap();
    let g = eval_g(&cfg.forcing, &body);
    let f = cfg.curvature_spec().unwrap().eval_field(body.radii()).unwrap();
    let q: Vec<f64> = g.iter().zip(f.iter()).map(|(g, f)| g * f.powf(cfg.beta) - 1.0).collect();
    SignClass::classify(q.iter().copied().fold(f64::INFINITY, f64::min), q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn sign_preservation(runs: &mut Runs) -> Outcome {
    let g = circle(128);
    let mut seeds = Vec::new();
    for (range, seed) in [((0.5, 1.5), 51u64), ((8.0, 12.0), 52)] {
        let params = CorpusParams { radius_range: range, ..CorpusParams::default() };
        let picked: Vec<_> = perturbed_balls(40, g.kind, &params, seed)
            .into_iter()
            .map(|s| FlowConfig::new(0.5, sigma(1), two_over_u(), g, s))
            .filter(|c| matches!(initial_sign(c), SignClass::NonNegative | SignClass::NonPositive))
            .take(5)
            .collect();
        seeds.extend(picked);
    }
    let results = map_par(&seeds, |c| {
        let mut c = c.clone();
        c.checkpoint_every = 100;
        run_normalized(&c).unwrap()
    });
    let mut held = 0;
    let mut worst = f64::INFINITY;
    for run in &results {
        let m = monitor_suite(&run.trace);
        let s = m.get("sign_preservation").unwrap();
        let class = run.trace.rows[0].sign_class;
        if s.status == MonitorStatus::Pass && class != SignClass::Mixed {
            held += 1;
        }
        let margin = run
            .trace
            .rows
            .iter()
            .map(|r| if class == SignClass::NonNegative { r.q_minus_one_min } else { -r.q_minus_one_max })
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(margin);
        runs.add("sign preservation S1/m128", &run.trace);
    }
    outcome(
        seeds.len() == 10 && held == 10,
        format!("{held}/{} one-signed runs kept their class, worst signed margin {worst:.1e} (slack -1e-8)", seeds.len()),
    )
}

fn sandwich(runs: &Runs) -> Outcome {
    let mut failed = Vec::new();
    for (name, trace) in &runs.traces {
        let m = monitor_suite(trace);
        if m.get("c0_sandwich").unwrap().status != MonitorStatus::Pass {
            failed.push(name.clone());
        }
    }
    let tested: usize = runs
        .traces
        .iter()
        .map(|(_, t)| {
            let ci = &t.preflight.condition_i;
            t.rows
                .windows(2)
                .filter(|w| ci.s_plus.is_some_and(|s| w[0].u_max > s) || ci.s_minus.is_some_and(|s| w[0].u_min < s))
                .count()
        })
        .sum();
    outcome(
        failed.is_empty() && !runs.traces.is_empty(),
        format!(
            "{} runs, {tested} checkpoint intervals outside a bracket, failures: {}",
            runs.traces.len(),
            if failed.is_empty() { "none".into() } else { failed.join(", ") }
        ),
    )
}

fn roundness(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [circle(128), axisym(2, 128)] {
        let mut cfg = FlowConfig::new(0.5, sigma(1), ForcingSpec::psi_u_rho(2.0, 0.0, 0.0), g, BodyRecipe::Ellipse { a: 1.2, b: 1.0 });
        cfg.checkpoint_every = 100;
        let run = run_normalized(&cfg).unwrap();
        let m = monitor_suite(&run.trace);
        let fit = m.roundness_fit.unwrap();
        let asph = run.body.gradient_ratio();
        let cert = roundness_certificate(&run);
        let ok = fit.slope < 0.0 && fit.r_squared >= 0.99 && asph < 1e-5 && cert == Certificate::Pass;
        pass &= ok;
        parts.push(format!("{}: slope {:.3}, R^2 {:.5}, final asphericity {asph:.1e}", label(g), fit.slope, fit.r_squared));
        runs.add(format!("roundness {}", label(g)), &run.trace);
    }
    outcome(pass, parts.join("; "))
}

fn uniqueness(runs: &mut Runs) -> Outcome {
    let g = circle(128);
    let forcing = ForcingSpec::NuU { c: 2.0, f: trig(0.2), p: 0.0 };
    let beta = 0.5;
    let report = check_uniqueness_condition(&forcing, beta, g.kind, 4096, 1).unwrap();
    let seeds = [
        BodyRecipe::PerturbedBall { radius: 0.7, amplitude: 0.05, modes: vec![convex_flow::body::Mode { k: 3, cos: 1.0, sin: 0.5 }] },
        BodyRecipe::Ellipse { a: 6.0, b: 4.5 },
    ];
    let mut cfg = FlowConfig::new(beta, sigma(1), forcing, g, seeds[0].clone());
    cfg.checkpoint_every = 100;
    let res = solve_stationary(&cfg, &seeds).unwrap();
    for r in &res.runs {
        runs.add("uniqueness S1/m128", &r.run.trace);
    }
    let dist = res.pairwise_distance.unwrap_or(f64::INFINITY);
    let pass_part = report.pass && res.converged() && dist < 1e-4;

    // G F^β on cB scales like c^{α−1+δ+β}; the uniqueness condition holds
    // exactly when that exponent is negative.
    let combos = [(1.0, 0.0, 0.5), (0.5, 0.5, 0.5), (0.0, 0.0, 0.5), (-1.0, 0.5, 1.0), (1.5, -0.2, 0.3), (0.2, -0.4, 0.7)];
    let mut agree = 0;
    let mut failing = 0;
    for (alpha, delta, beta) in combos {
        let expected: bool = alpha - 1.0 + delta + beta < 0.0;
        let rep = check_uniqueness_condition(&ForcingSpec::psi_u_rho(1.0, alpha, delta), beta, g.kind, 512, 2).unwrap();
        agree += usize::from(rep.pass == expected);
        failing += usize::from(!expected);
    }
    outcome(
        pass_part && agree == combos.len() && failing > 0,
        format!(
            "passing spec: sup distance {dist:.1e} between seeds; exponent algebra agrees on {agree}/{} specs ({failing} failing)",
            combos.len()
        ),
    )
}

fn variational() -> Outcome {
    let eps = [1e-2, 5e-3, 2.5e-3];
    let params = CorpusParams::default();
    let lin = OrliczFunction::Linear;
    let sq = OrliczFunction::Power { p: 2.0 };
    let mut cases = Vec::new();
    for (i, (k, l)) in pairs(5, GridKind::Circle, &params, 91).into_iter().enumerate() {
        let (f1, f2) = if i % 2 == 0 { (lin.clone(), lin.clone()) } else { (sq.clone(), lin.clone()) };
        cases.push((circle(128), 1usize, k, l, f1, f2));
    }
    for (i, (k, l)) in pairs(5, GridKind::Axisymmetric, &params, 92).into_iter().enumerate() {
        let (f1, f2) = if i % 2 == 0 { (lin.clone(), sq.clone()) } else { (lin.clone(), lin.clone()) };
        cases.push((axisym(2, 128), 1 + i % 2, k, l, f1, f2));
    }
    let mut worst_raw: f64 = 0.0;
    let mut worst_extra: f64 = 0.0;
    let mut orders = Vec::new();
    let mut failures = 0;
    for (g, k, a, b, f1, f2) in &cases {
        let grid = grid_of(*g);
        let kb = realize(a, &grid).unwrap();
        let lb = realize(b, &grid).unwrap();
        let spec = CurvatureSpec::sigma_k_root(*k, g.n).unwrap();
        let r = variational_check(&kb, &lb, &spec, f1, f2, &eps).unwrap();
        worst_raw = worst_raw.max(r.samples.last().unwrap().relative_error);
        worst_extra = worst_extra.max(r.extrapolated_relative_error.unwrap());
        orders.extend(r.orders.iter().copied());
        failures += r.failures.len();
    }
    let order_ok = orders.iter().all(|o| (0.8..=1.2).contains(o));
    let grid = grid_of(axisym(2, 128));
    let b1 = realize(&BodyRecipe::Ball { radius: 1.0 }, &grid).unwrap();
    let b2 = realize(&BodyRecipe::Ball { radius: 2.0 }, &grid).unwrap();
    let ball = variational_check(&b1, &b2, &CurvatureSpec::sigma_k_root(1, 2).unwrap(), &lin, &lin, &eps).unwrap();
    let ball_int = (ball.integral - 8.0 * PI).abs() / (8.0 * PI);
    let ball_ext = ball.extrapolated_relative_error.unwrap();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let max_order = orders.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst_extra < 1e-3 && order_ok && failures == 0 && ball_int < 1e-8 && ball_ext < 1e-8,
        format!(
            "10 pairs: relative error at eps=2.5e-3 {worst_extra:.1e} extrapolated ({worst_raw:.1e} raw forward quotient), \
             observed orders {min_order:.3}..{max_order:.3}; ball pair integral vs 8pi {ball_int:.1e}, extrapolated quotient {ball_ext:.1e}"
        ),
    )
}

fn inequalities() -> Outcome {
    let params = CorpusParams::default();
    let mut worst_65: f64 = f64::INFINITY;
    let mut worst_eq_65: f64 = 0.0;
    let mut admissible = 0;
    let mut tried = 0;
    let setups = [(circle(128), 1usize, 10usize, 101u64), (axisym(2, 128), 1, 5, 102), (axisym(2, 128), 2, 5, 103)];
    for (g, k, want, seed) in setups {
        let grid = grid_of(g);
        let spec = CurvatureSpec::sigma_k_root(k, g.n).unwrap();
        let p = k as f64 + 2.0;
        let mut got = 0;
        for (a, b) in pairs(200, g.kind, &params, seed) {
            if got == want {
                break;
            }
            tried += 1;
            let kb = realize(&a, &grid).unwrap();
            let lb = realize(&b, &grid).unwrap();
            if !lp_admissible(&lb, &spec, p).unwrap() {
                continue;
            }
            got += 1;
            worst_65 = worst_65.min(inequality_lp_quermass(&kb, &lb, &spec, p, 1e-6).unwrap().margin);
            worst_eq_65 = worst_eq_65.max(inequality_lp_quermass(&lb, &lb, &spec, p, 1e-6).unwrap().margin.abs());
        }
        admissible += got;
    }

    let mut worst_66 = f64::INFINITY;
    let mut worst_eq_66: f64 = 0.0;
    for (g, k, seed) in [(circle(128), 1usize, 111u64), (axisym(2, 128), 1, 112), (axisym(2, 128), 2, 113)] {
        let grid = grid_of(g);
        let spec = CurvatureSpec::sigma_k_root(k, g.n).unwrap();
        let p = k as f64 + 2.0;
        let unit = realize(&BodyRecipe::Ball { radius: 1.0 }, &grid).unwrap();
        worst_eq_66 = worst_eq_66.max(inequality_unit_ball(&unit, &spec, p, 1e-6).unwrap().margin.abs());
        let count = if g.kind == GridKind::Circle { 10 } else { 5 };
        for recipe in perturbed_balls(count, g.kind, &params, seed) {
            let body = realize(&recipe, &grid).unwrap();
            worst_66 = worst_66.min(inequality_unit_ball(&body, &spec, p, 1e-6).unwrap().margin);
        }
    }

    let mut worst_68 = f64::INFINITY;
    for (n, g) in [(1, circle(128)), (2, axisym(2, 128)), (3, axisym(3, 128))] {
        let grid = grid_of(g);
        for (r1, r2) in [(1.0, 2.0), (2.0, 1.0), (0.5, 3.0), (1.5, 1.5)] {
            let kb = realize(&BodyRecipe::Ball { radius: r1 }, &grid).unwrap();
            let lb = realize(&BodyRecipe::Ball { radius: r2 }, &grid).unwrap();
            let r = inequality_lp_minkowski(&kb, &lb, n as f64 + 2.0, 1e-6).unwrap();
            worst_68 = worst_68.min(r.margin);
        }
    }
    let pass = admissible == 20 && worst_65 >= -1e-6 && worst_eq_65 < 1e-8 && worst_eq_66 < 1e-8 && worst_66 >= -1e-6 && worst_68 >= -1e-6;
    outcome(
        pass,
        format!(
            "lp quermassintegral: {admissible} admissible pairs of {tried} drawn, min margin {worst_65:.2e}, |K=L margin| {worst_eq_65:.1e}; \
             unit-ball bound: |margin at B1| {worst_eq_66:.1e}, min margin on 20 bodies {worst_66:.2e}; \
             lp Minkowski on ball pairs: min margin {worst_68:.2e}"
        ),
    )
}

/// `∫ (ρ(ξ)^{n+1} − ε^{n+1})/(n+1) dξ` by midpoint rule in ξ, with ρ from the
/// support-function minimization.
fn direct_v(body: &ConvexBodyState, eps: f64, samples: usize) -> f64 {
    let n = body.dim();
    let q = (n + 1) as i32;
    let inner = |rho: f64| (rho.powi(q) - eps.powi(q)) / f64::from(q);
    if body.grid().kind() == GridKind::Circle {
        let h = 2.0 * PI / samples as f64;
        (0..samples)
            .map(|i| {
                let xi = (i as f64 + 0.5) * h;
                inner(radial_function(body, [xi.cos(), xi.sin()]))
            })
            .sum::<f64>()
            * h
    } else {
        let h = PI / samples as f64;
        let parallel = sphere_area(n - 1);
        (0..samples)
            .map(|i| {
                let xi = (i as f64 + 0.5) * h;
                inner(radial_function(body, [xi.cos(), xi.sin()])) * xi.sin().powi(n as i32 - 1)
            })
            .sum::<f64>()
            * h
            * parallel
    }
}

fn geometry() -> Outcome {
    let params = CorpusParams::default();
    let mut worst_jac: f64 = 0.0;
    let mut info_jac: f64 = 0.0;
    let mut worst_ext: f64 = 0.0;
    let mut ext_ok = true;
    let mut count = 0;
    for (g, info, seed) in [(circle(128), None, 121u64), (axisym(2, 512), Some(axisym(2, 128)), 122), (axisym(3, 512), Some(axisym(3, 128)), 123)] {
        let grid = grid_of(g);
        let recipes = perturbed_balls(20, g.kind, &params, seed);
        for recipe in &recipes {
            let body = realize(recipe, &grid).unwrap();
            let total = grid.integrate(&gauss_jacobian(&body)).unwrap();
            worst_jac = worst_jac.max((total - sphere_area(g.n)).abs());
            let report = verify_body(&body);
            let check = report.get("extrema_agree").unwrap();
            ext_ok &= check.pass;
            worst_ext = worst_ext.max(-check.margin);
            count += 1;
        }
        if let Some(coarse) = info {
            let grid = grid_of(coarse);
            for recipe in &recipes {
                let body = realize(recipe, &grid).unwrap();
                let total = grid.integrate(&gauss_jacobian(&body)).unwrap();
                info_jac = info_jac.max((total - sphere_area(coarse.n)).abs());
            }
        }
    }

    let forcing = ForcingSpec::psi_u_rho(1.0, 0.0, 0.0);
    let mut worst_v: f64 = 0.0;
    let mut bodies: Vec<(GridSpec, BodyRecipe)> = vec![(circle(256), BodyRecipe::Ellipse { a: 2.0, b: 1.0 })];
    for r in perturbed_balls(5, GridKind::Circle, &params, 124) {
        bodies.push((circle(128), r));
    }
    for r in perturbed_balls(3, GridKind::Axisymmetric, &params, 125) {
        bodies.push((axisym(2, 512), r));
    }
    for (g, recipe) in &bodies {
        let body = realize(recipe, &grid_of(*g)).unwrap();
        let eps = 0.5 * body.rho_min();
        // φ̂ ≡ 1 and β = 1 give the inner integrand s^n.
        let pulled = v_potential(&body, &forcing, 1.0, eps).unwrap();
        let direct = direct_v(&body, eps, 1024);
        worst_v = worst_v.max((pulled - direct).abs());
    }
    outcome(
        worst_jac < 1e-4 && ext_ok && worst_v < 1e-4,
        format!(
            "{count} corpus bodies: |int Jac - |S^n|| {worst_jac:.1e} (S1 m128, S2/S3 m512; S2/S3 at m128 gives {info_jac:.1e}), \
             extrema gap {worst_ext:.1e}; pullback vs direct V on {} bodies {worst_v:.1e}",
            bodies.len()
        ),
    )
}

fn orders() -> Outcome {
    let f = |t: f64| t.sin().exp();
    let df = |t: f64| t.cos() * t.sin().exp();
    let spectral: Vec<f64> = [16, 32]
        .iter()
        .map(|&m| {
            let grid = SphereGrid::new(1, m, GridKind::Circle).unwrap();
            let vals: Vec<f64> = grid.nodes().iter().map(|&t| f(t)).collect();
            let d = grid.differentiate(&vals, 1).unwrap();
            grid.nodes().iter().zip(d.iter()).map(|(&t, v)| (v - df(t)).abs()).fold(0.0, f64::max)
        })
        .collect();
    let spectral_ok = spectral[1] < 1e-12 && spectral[0] / spectral[1].max(1e-16) > 1e3;

    let g = |t: f64| t.cos().exp();
    let dg = |t: f64| -t.sin() * t.cos().exp();
    let d2g = |t: f64| (t.sin().powi(2) - t.cos()) * t.cos().exp();
    let errs: Vec<(f64, f64)> = [64, 128, 256]
        .iter()
        .map(|&m| {
            let grid = SphereGrid::new(2, m, GridKind::Axisymmetric).unwrap();
            let vals: Vec<f64> = grid.nodes().iter().map(|&t| g(t)).collect();
            let d1 = grid.differentiate(&vals, 1).unwrap();
            let d2 = grid.differentiate(&vals, 2).unwrap();
            let e1 = grid.nodes().iter().zip(d1.iter()).map(|(&t, v)| (v - dg(t)).abs()).fold(0.0, f64::max);
            let e2 = grid.nodes().iter().zip(d2.iter()).map(|(&t, v)| (v - d2g(t)).abs()).fold(0.0, f64::max);
            (e1, e2)
        })
        .collect();
    let ord: Vec<f64> = errs
        .windows(2)
        .flat_map(|w| [(w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2()])
        .collect();
    let axis_ok = ord.iter().all(|o| (1.8..=2.2).contains(o));
    outcome(
        spectral_ok && axis_ok,
        format!(
            "S1 first derivative error m16 {:.1e}, m32 {:.1e}; axisymmetric doubling orders {}",
            spectral[0],
            spectral[1],
            ord.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let names = [
        "fixed point",
        "stationary radius",
        "rescaling equivalence",
        "monotone quantities",
        "sign preservation",
        "C0 sandwich",
        "exponential roundness",
        "uniqueness",
        "variational formula",
        "inequality suite",
        "geometry identities",
        "discretization orders",
    ];
    let mut runs = Runs::default();
    let mut results: Vec<Option<(Outcome, f64)>> = (0..12).map(|_| None).collect();
    let timed = |f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        (o, start.elapsed().as_secs_f64())
    };
    results[0] = Some(timed(&mut fixed_point));
    results[1] = Some(timed(&mut || stationary_radius(&mut runs)));
    results[2] = Some(timed(&mut rescaling));
    results[3] = Some(timed(&mut || monotone_runs(&mut runs)));
    results[4] = Some(timed(&mut || sign_preservation(&mut runs)));
    results[6] = Some(timed(&mut || roundness(&mut runs)));
    results[7] = Some(timed(&mut || uniqueness(&mut runs)));
    results[5] = Some(timed(&mut || sandwich(&runs)));
    results[8] = Some(timed(&mut variational));
    results[9] = Some(timed(&mut inequalities));
    results[10] = Some(timed(&mut geometry));
    results[11] = Some(timed(&mut orders));

    let mut failed = 0;
    for (i, (name, r)) in names.iter().zip(&results).enumerate() {
        let (o, secs) = r.as_ref().expect("every criterion evaluated");
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {} {name}: {} [{secs:.1}s]", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
