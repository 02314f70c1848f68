//! The acceptance suite: eleven numbered criteria, each a self-contained
//! experiment with a pass/fail verdict.
//!
//! `TIKFLOW_TOL_SCALE` multiplies every tolerance width (default 1).

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::analysis::{
    check_lyapunov_bound, equivalence_check, fill_energy, fit_power_law, fit_rate,
    viscosity_point, Observable,
};
use crate::dynamics::{DynamicsKind, DynamicsSpec};
use crate::error::{Error, Result};
use crate::integrators::{integrate, IntegratorConfig, Method, TrajectoryRecord};
use crate::problems::{catalog, ObjectiveProblem, Point};
use crate::schedules::TikhonovSchedule;

pub const CRITERIA: usize = 11;
pub const TOL_SCALE_ENV: &str = "TIKFLOW_TOL_SCALE";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub quick: bool,
    pub tol_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { quick: false, tol_scale: 1.0 }
    }
}

impl VerifyOptions {
    /// Reads the tolerance scale from the environment.
    pub fn from_env(quick: bool) -> Result<Self> {
        let tol_scale = match std::env::var(TOL_SCALE_ENV) {
            Ok(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0 && v.is_finite())
                .ok_or_else(|| Error::Config(format!("{TOL_SCALE_ENV}={s} is not a nonnegative number")))?,
            Err(_) => 1.0,
        };
        Ok(VerifyOptions { quick, tol_scale })
    }

    fn width(&self, w: f64) -> f64 {
        w * self.tol_scale
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub lines: Vec<String>,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn summary(&self) -> String {
        format!(
            "[{}] criterion {:>2}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects checks of one criterion.
struct Checks {
    passed: bool,
    lines: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { passed: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn info(&mut self, msg: String) {
        self.lines.push(format!("info {msg}"));
    }

    fn fail_on<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, format!("{what}: {e}"));
                None
            }
        }
    }
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "value rate of the delta/t inertial system",
        2 => "gradient rate of the delta/t inertial system",
        3 => "minimum-norm selection",
        4 => "value rate of the 1/t^r inertial system",
        5 => "first-order rates",
        6 => "Lyapunov bound along first-order runs",
        7 => "three-way equivalence",
        8 => "viscosity-curve properties",
        9 => "extended gradient lemma",
        10 => "nonsmooth selection",
        11 => "integrator order and refinement",
        _ => "unknown criterion",
    }
}

/// Whether a criterion belongs to the `--quick` subset.
pub fn in_quick_subset(id: usize) -> bool {
    id != 10
}

pub fn run_criterion(id: usize, opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let mut c = Checks::new();
    match id {
        1 => value_rate_delta(&mut c, opts),
        2 => gradient_rate_delta(&mut c, opts),
        3 => min_norm_selection(&mut c, opts),
        4 => value_rate_power(&mut c, opts),
        5 => first_order_rates(&mut c, opts),
        6 => lyapunov_bound(&mut c, opts),
        7 => equivalence(&mut c, opts),
        8 => viscosity(&mut c, opts),
        9 => gradient_lemma(&mut c, opts),
        10 => nonsmooth(&mut c, opts),
        11 => integrator_order(&mut c, opts),
        _ => c.check(false, format!("no criterion {id}")),
    }
    CriterionResult {
        id,
        title: title(id),
        passed: c.passed,
        lines: c.lines,
        elapsed: start.elapsed(),
    }
}

/// Ids run for the given options, in order.
pub fn selected(opts: &VerifyOptions) -> Vec<usize> {
    (1..=CRITERIA).filter(|id| !opts.quick || in_quick_subset(*id)).collect()
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionResult> {
    selected(opts).into_iter().map(|id| run_criterion(id, opts)).collect()
}

fn p(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

fn delta(d: f64) -> TikhonovSchedule {
    TikhonovSchedule::delta_over_t(d, 1.0).expect("valid delta")
}

fn power(r: f64) -> TikhonovSchedule {
    TikhonovSchedule::inverse_power(r, 1.0).expect("valid r")
}

fn run(
    kind: DynamicsKind,
    prob: ObjectiveProblem,
    sched: TikhonovSchedule,
    alpha: f64,
    x0: Point,
    t_end: f64,
) -> Result<TrajectoryRecord> {
    let spec = DynamicsSpec::builder(kind, prob)
        .schedule(sched)
        .alpha(alpha)
        .x0(x0)
        .build()?;
    let cfg = IntegratorConfig::log_spaced(Method::default_for(kind), 1.0, t_end)?;
    integrate(&spec, &cfg)
}

fn delta_runs() -> Vec<(&'static str, Result<TrajectoryRecord>)> {
    [("f2", catalog::f2()), ("f1", catalog::f1())]
        .into_iter()
        .map(|(name, prob)| {
            (
                name,
                run(DynamicsKind::InertialImplicitHessian, prob, delta(2.0), 3.5, p(&[0.0, 0.0]), 1e3),
            )
        })
        .collect()
}

const LAST_DECADE: (f64, f64) = (1e2, 1e3);

fn value_rate_delta(c: &mut Checks, o: &VerifyOptions) {
    let ceiling = -2.0 + o.width(0.2);
    for (name, rec) in delta_runs() {
        let Some(rec) = c.fail_on(name, rec) else { continue };
        if let Some(fit) = c.fail_on(name, fit_rate(&rec, Observable::FGap, Some(LAST_DECADE))) {
            c.check(fit.slope <= ceiling, format!("{name}: f_gap slope {:.4} <= {ceiling:.2}", fit.slope));
        }
    }
}

fn gradient_rate_delta(c: &mut Checks, o: &VerifyOptions) {
    let ceiling = -1.0 + o.width(0.1);
    for (name, rec) in delta_runs() {
        let Some(rec) = c.fail_on(name, rec) else { continue };
        if let Some(fit) = c.fail_on(name, fit_rate(&rec, Observable::GradNorm, Some(LAST_DECADE))) {
            c.check(fit.slope <= ceiling, format!("{name}: grad_norm slope {:.4} <= {ceiling:.2}", fit.slope));
        }
    }
}

fn min_norm_selection(c: &mut Checks, o: &VerifyOptions) {
    let xs = p(&[0.5, 0.5]);
    let tol = o.width(1e-2);
    let rec = run(DynamicsKind::InertialImplicitHessian, catalog::f2(), delta(2.0), 3.5, p(&[0.0, 0.0]), 1e3);
    if let Some(rec) = c.fail_on("f2", rec) {
        let d = (&rec.final_state().position - &xs).norm();
        c.check(d <= tol, format!("f2: |x(T) - x*| = {d:.3e} <= {tol:.1e}"));
    }
    let zero = TikhonovSchedule::zero(1.0).expect("zero schedule");
    let avd = run(DynamicsKind::AvdBaseline, catalog::f2(), zero, 3.5, p(&[2.0, -3.0]), 1e3);
    match avd {
        Ok(rec) => {
            let d = (&rec.final_state().position - &xs).norm();
            c.info(format!(
                "contrast: avd_baseline from (2,-3) ends {d:.3e} from x* ({} 1e-1)",
                if d >= 0.1 { ">=" } else { "<" }
            ));
        }
        Err(e) => c.info(format!("contrast run failed: {e}")),
    }
}

fn value_rate_power(c: &mut Checks, o: &VerifyOptions) {
    let width = o.width(0.2);
    for (name, prob) in [("f2", catalog::f2()), ("f1", catalog::f1())] {
        for r in [0.5, 0.9] {
            let label = format!("{name} r={r}");
            let rec = run(DynamicsKind::InertialImplicitHessian, prob.clone(), power(r), 3.5, p(&[0.0, 0.0]), 1e3);
            let Some(rec) = c.fail_on(&label, rec) else { continue };
            if let Some(fit) = c.fail_on(&label, fit_rate(&rec, Observable::FGap, Some(LAST_DECADE))) {
                let target = -2.0 * r;
                c.check(
                    (fit.slope - target).abs() <= width,
                    format!("{label}: f_gap slope {:.4} within {width:.2} of {target:.2}", fit.slope),
                );
            }
        }
    }
}

fn sd_run(sched: TikhonovSchedule) -> Result<TrajectoryRecord> {
    let prob = catalog::f2();
    let mut rec = run(DynamicsKind::SdTikhonov, prob.clone(), sched, 3.0, p(&[0.0, 0.0]), 1e3)?;
    fill_energy(&mut rec, &prob)?;
    Ok(rec)
}

/// `‖x(t) − x_{ε(t)}‖²` along a first-order record.
fn viscosity_gap_sq(rec: &TrajectoryRecord, prob: &ObjectiveProblem) -> Result<Vec<f64>> {
    rec.states
        .iter()
        .zip(&rec.diagnostics)
        .map(|(s, d)| Ok((&s.position - viscosity_point(prob, d.eps_value)?.point).norm_squared()))
        .collect()
}

fn first_order_rates(c: &mut Checks, o: &VerifyOptions) {
    let ceiling = -1.0 + o.width(0.1);
    if let Some(rec) = c.fail_on("delta=2", sd_run(delta(2.0))) {
        for obs in [Observable::Energy, Observable::FGap] {
            if let Some(fit) = c.fail_on(obs.name(), fit_rate(&rec, obs, Some(LAST_DECADE))) {
                c.check(
                    fit.slope <= ceiling,
                    format!("delta=2: {} slope {:.4} <= {ceiling:.2}", obs.name(), fit.slope),
                );
            }
        }
    }
    let r = 0.5;
    if let Some(rec) = c.fail_on("r=0.5", sd_run(power(r))) {
        let w = o.width(0.15);
        if let Some(fit) = c.fail_on("f_gap", fit_rate(&rec, Observable::FGap, Some(LAST_DECADE))) {
            c.check(
                (fit.slope + r).abs() <= w,
                format!("r=0.5: f_gap slope {:.4} within {w:.2} of {:.2}", fit.slope, -r),
            );
        }
        let w = o.width(0.2);
        let dist = viscosity_gap_sq(&rec, &catalog::f2())
            .and_then(|v| fit_power_law(&rec.times, &v, LAST_DECADE));
        if let Some(fit) = c.fail_on("|x - x_eps|^2", dist) {
            c.check(
                (fit.slope + (1.0 - r)).abs() <= w,
                format!("r=0.5: |x - x_eps|^2 slope {:.4} within {w:.2} of {:.2}", fit.slope, -(1.0 - r)),
            );
        }
        if let Ok(fit) = fit_rate(&rec, Observable::GradNorm, Some(LAST_DECADE)) {
            let (a, b) = crate::analysis::rates::gradient_rate_candidates(r);
            c.info(format!("r=0.5: grad_norm slope {:.4} (candidates {a:.3}, {b:.3})", fit.slope));
        }
    }
}

fn lyapunov_bound(c: &mut Checks, _o: &VerifyOptions) {
    let prob = catalog::f2();
    for (name, sched) in [("delta=2", delta(2.0)), ("r=0.5", power(0.5))] {
        let Some(rec) = c.fail_on(name, sd_run(sched)) else { continue };
        if let Some(rep) = c.fail_on(name, check_lyapunov_bound(&rec, &sched, &prob)) {
            c.check(
                rep.violations() == 0,
                format!(
                    "{name}: {} energy, {} distance, {} f-gap violations over {} samples",
                    rep.energy_violations.len(),
                    rep.distance_violations.len(),
                    rep.sandwich_violations.len(),
                    rep.samples.len()
                ),
            );
        }
    }
}

fn equivalence(c: &mut Checks, o: &VerifyOptions) {
    let tol = o.width(1e-5);
    for (pname, prob) in [("f2", catalog::f2()), ("f1", catalog::f1())] {
        for (sname, sched) in [("delta=2", delta(2.0)), ("r=0.5", power(0.5))] {
            let label = format!("{pname} {sname}");
            let build = |kind| {
                DynamicsSpec::builder(kind, prob.clone())
                    .schedule(sched)
                    .alpha(3.0)
                    .x0(p(&[0.0, 0.0]))
                    .build()
            };
            let report = build(DynamicsKind::InertialImplicitHessian).and_then(|second| {
                let coupled = build(DynamicsKind::CoupledVX)?;
                let cfg = IntegratorConfig::log_spaced(Method::AdaptiveRk, 1.0, 100.0)?;
                equivalence_check(&second, &coupled, &cfg)
            });
            if let Some(rep) = c.fail_on(&label, report) {
                c.check(
                    rep.max_discrepancy <= tol,
                    format!(
                        "{label}: max discrepancy {:.3e} <= {tol:.1e} (worst at t = {:.3})",
                        rep.max_discrepancy, rep.worst_time
                    ),
                );
            }
        }
    }
}

fn viscosity_problems() -> Vec<ObjectiveProblem> {
    vec![
        catalog::f1(),
        catalog::f2(),
        catalog::quadratic(p(&[1.0, 2.0, 0.5]), p(&[1.0, -1.0, 0.25])).expect("valid"),
        catalog::quadratic(p(&[3.0, 0.0, 1.0, 0.0]), p(&[1.0, 0.0, -2.0, 0.0])).expect("valid"),
        catalog::affine_least_squares(p(&[1.0, -2.0, 3.0]), 2.0).expect("valid"),
        catalog::half_norm_squared(5),
    ]
}

fn viscosity(c: &mut Checks, o: &VerifyOptions) {
    let grid: Vec<f64> = (0..=20).map(|i| 10f64.powf(1.0 - 0.25 * i as f64)).collect();
    for prob in viscosity_problems() {
        let xs = prob.min_norm_solution().expect("catalog problems know x*").clone();
        let mut worst = f64::NEG_INFINITY;
        let mut failed = None;
        for &eps in &grid {
            match viscosity_point(&prob, eps) {
                Ok(vp) => worst = worst.max(vp.point.norm() - xs.norm()),
                Err(e) => failed = Some(e),
            }
        }
        if let Some(e) = failed {
            c.check(false, format!("{}: {e}", prob.name()));
            continue;
        }
        let slack = o.width(1e-8);
        c.check(worst <= slack, format!("{}: max(|x_eps| - |x*|) = {worst:.2e} <= {slack:.0e}", prob.name()));
        if let Some(vp) = c.fail_on(prob.name(), viscosity_point(&prob, 1e-4)) {
            let d = (&vp.point - &xs).norm();
            let tol = o.width(1e-2) * (1.0 + xs.norm());
            c.check(d <= tol, format!("{}: |x_1e-4 - x*| = {d:.2e} <= {tol:.2e}", prob.name()));
        }
    }
}

fn gradient_lemma(c: &mut Checks, o: &VerifyOptions) {
    let mut rng = StdRng::seed_from_u64(20_240_917);
    let quads = [
        catalog::quadratic(p(&[1.0, 2.0, 0.5]), p(&[1.0, -1.0, 0.25])).expect("valid"),
        catalog::quadratic(p(&[3.0, 0.0, 1.0, 0.0]), p(&[1.0, 0.0, -2.0, 0.0])).expect("valid"),
        catalog::f2(),
    ];
    for q in &quads {
        let l = q.lipschitz_grad().expect("catalog quadratics know L");
        let min = q.min_value().expect("catalog quadratics know min");
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let x = Point::from_fn(q.dim(), |_, _| rng.random_range(-5.0..5.0));
            let (Ok(v), Ok(g)) = (q.value(&x), q.gradient(&x)) else {
                c.check(false, format!("{}: oracle failure", q.name()));
                return;
            };
            worst = worst.min(v - min - g.norm_squared() / (2.0 * l));
        }
        c.check(
            worst >= -o.width(1e-12),
            format!("{}: min of f - min f - |grad|^2/2L = {worst:.3e} >= 0", q.name()),
        );
    }
    let h = catalog::half_norm_squared(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = Point::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
        let g = h.gradient(&x).expect("smooth");
        worst = worst.max((h.value(&x).expect("total") - g.norm_squared() / 2.0).abs());
    }
    let tol = o.width(1e-12);
    c.check(worst <= tol, format!("half_norm_squared: equality residual {worst:.2e} <= {tol:.0e}"));
}

fn nonsmooth(c: &mut Checks, o: &VerifyOptions) {
    let prob = catalog::abs_affine(p(&[1.0, 1.0]), 1.0).expect("valid");
    let rec = run(DynamicsKind::CoupledVXNonsmooth, prob.clone(), delta(2.0), 3.5, p(&[0.0, 0.0]), 1e2);
    let Some(rec) = c.fail_on("abs", rec) else { return };
    let xs = p(&[0.5, 0.5]);
    let d = (&rec.final_state().position - &xs).norm();
    let tol = o.width(5e-2);
    c.check(d <= tol, format!("|x(T) - x*| = {d:.3e} <= {tol:.0e}"));
    let viable = rec.positions().all(|x| prob.in_domain(x));
    c.check(viable, "every sample lies in dom f".into());
    let (lo, _) = crate::analysis::rates::default_window(&rec);
    let gaps: Vec<f64> = rec
        .times
        .iter()
        .zip(&rec.diagnostics)
        .filter(|(t, _)| **t >= lo)
        .map(|(_, d)| d.f_gap)
        .collect();
    let mut diffs: Vec<f64> = gaps.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(f64::total_cmp);
    let median = if diffs.is_empty() { f64::NAN } else { diffs[diffs.len() / 2] };
    c.check(median <= 0.0, format!("median successive f_gap difference {median:.3e} <= 0"));
}

fn integrator_order(c: &mut Checks, o: &VerifyOptions) {
    let spec = DynamicsSpec::builder(DynamicsKind::SdTikhonov, catalog::half_norm_squared(1))
        .x0(p(&[1.0]))
        .build();
    let Some(spec) = c.fail_on("spec", spec) else { return };
    let exact = (-2.0f64).exp();
    let mut errs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let cfg = IntegratorConfig::new(Method::FixedRk4, vec![1.0, 3.0]).and_then(|c| c.with_step(h));
        let Some(rec) = c.fail_on("rk4", cfg.and_then(|cfg| integrate(&spec, &cfg))) else { return };
        errs.push((rec.final_state().position[0] - exact).abs());
    }
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    let floor = 4.0 - o.width(0.2);
    c.check(order >= floor, format!("observed RK4 order {order:.3} >= {floor:.2}"));

    let grid = vec![1.0, 2.0];
    for rel in [1e-6, 1e-8] {
        let final_at = |rt: f64| -> Result<f64> {
            let cfg = IntegratorConfig::new(Method::AdaptiveRk, grid.clone())?.with_tolerances(rt, 1e-10)?;
            Ok(integrate(&spec, &cfg)?.final_state().position[0])
        };
        let both = final_at(rel).and_then(|a| Ok((a, final_at(rel / 2.0)?)));
        if let Some((a, b)) = c.fail_on("adaptive", both) {
            let bound = o.width(10.0) * rel;
            c.check(
                (a - b).abs() <= bound,
                format!("rel_tol {rel:e}: |x_tol - x_tol/2| = {:.2e} <= {bound:.1e}", (a - b).abs()),
            );
        }
    }
}
