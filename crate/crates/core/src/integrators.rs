//! Time integration on logarithmic sample grids.
//!
//! Three steppers: an adaptive Dormand–Prince 5(4) pair with cubic Hermite
//! dense output, a fixed-step RK4 and the semi-implicit proximal stepper of
//! the nonsmooth coupled system. The last two land exactly on sample times;
//! adaptive steps never exceed the local sample spacing.

use crate::dynamics::{DynamicsKind, DynamicsSpec, State};
use crate::error::{Error, Result};
use crate::problems::{ObjectiveProblem, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AdaptiveRk,
    FixedRk4,
    ProximalSemiImplicit,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::AdaptiveRk => "adaptive_rk",
            Method::FixedRk4 => "fixed_rk4",
            Method::ProximalSemiImplicit => "proximal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adaptive_rk" | "adaptive" | "dopri5" => Ok(Method::AdaptiveRk),
            "fixed_rk4" | "rk4" => Ok(Method::FixedRk4),
            "proximal" | "proximal_semi_implicit" => Ok(Method::ProximalSemiImplicit),
            _ => Err(Error::Config(format!("unknown integrator method `{s}`"))),
        }
    }

    /// Natural method for a dynamics kind.
    pub fn default_for(kind: DynamicsKind) -> Self {
        if kind == DynamicsKind::CoupledVXNonsmooth {
            Method::ProximalSemiImplicit
        } else {
            Method::AdaptiveRk
        }
    }
}

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 5_000_000;
pub const DEFAULT_SAMPLES_PER_DECADE: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Step of `FixedRk4`; extra cap on the proximal step.
    pub step: Option<f64>,
    pub sample_grid: Vec<f64>,
    /// Consecutive step halvings allowed after a domain exit.
    pub max_retries: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, sample_grid: Vec<f64>) -> Result<Self> {
        let cfg = IntegratorConfig {
            method,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_steps: DEFAULT_MAX_STEPS,
            step: None,
            sample_grid,
            max_retries: 30,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Log-spaced grid on `[t0, t_end]` with the default density.
    pub fn log_spaced(method: Method, t0: f64, t_end: f64) -> Result<Self> {
        Self::new(method, log_grid(t0, t_end, DEFAULT_SAMPLES_PER_DECADE)?)
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Result<Self> {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        self.step = Some(h);
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn t_end(&self) -> f64 {
        *self.sample_grid.last().expect("validated grid is nonempty")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return bad(format!(
                "tolerances must be positive, got rel {} abs {}",
                self.rel_tol, self.abs_tol
            ));
        }
        if let Some(h) = self.step {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("step must be positive, got {h}"));
            }
        }
        if self.sample_grid.len() < 2 {
            return bad("sample grid needs at least two times".into());
        }
        if self.sample_grid.iter().any(|t| !t.is_finite())
            || self.sample_grid.windows(2).any(|w| !(w[1] > w[0]))
        {
            return bad("sample grid must be finite and strictly increasing".into());
        }
        Ok(())
    }
}

/// `per_decade` log-spaced points per factor of ten, endpoints included exactly.
pub fn log_grid(t0: f64, t_end: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || !(t_end > t0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < t0 < t_end, got [{t0}, {t_end}]"
        )));
    }
    if per_decade == 0 {
        return Err(Error::InvalidParameter("samples per decade must be positive".into()));
    }
    let decades = (t_end / t0).log10();
    let n = ((per_decade as f64 * decades).ceil() as usize).max(1);
    let mut grid: Vec<f64> = (0..=n)
        .map(|i| t0 * (t_end / t0).powf(i as f64 / n as f64))
        .collect();
    grid[0] = t0;
    grid[n] = t_end;
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub f_gap: f64,
    pub grad_norm: Option<f64>,
    pub dist_to_min_norm: Option<f64>,
    pub eps_value: f64,
    pub energy: Option<f64>,
}

/// What `f_gap` is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapReference {
    KnownMinimum(f64),
    /// Smallest value of `f` seen along the record.
    BestSeen(f64),
}

impl GapReference {
    pub fn value(&self) -> f64 {
        match *self {
            GapReference::KnownMinimum(v) | GapReference::BestSeen(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub domain_retries: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub kind: DynamicsKind,
    pub method: Method,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Time derivative of `position` at each sample (ODE methods only).
    pub position_rates: Option<Vec<Point>>,
    pub diagnostics: Vec<Diagnostics>,
    pub gap_reference: GapReference,
    pub stats: StepStats,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("records are never empty")
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point> {
        self.states.iter().map(|s| &s.position)
    }
}

/// Integrates `spec` over `cfg.sample_grid`, whose first time must be `spec.t0()`.
pub fn integrate(spec: &DynamicsSpec, cfg: &IntegratorConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let grid = &cfg.sample_grid;
    if (grid[0] - spec.t0()).abs() > 1e-12 * spec.t0() {
        return Err(Error::InvalidParameter(format!(
            "sample grid starts at {} but t0 = {}",
            grid[0],
            spec.t0()
        )));
    }
    let nonsmooth = spec.kind() == DynamicsKind::CoupledVXNonsmooth;
    if nonsmooth != (cfg.method == Method::ProximalSemiImplicit) {
        return Err(Error::InvalidParameter(format!(
            "method {} is incompatible with dynamics {}",
            cfg.method.name(),
            spec.kind().name()
        )));
    }
    let mut stats = StepStats::default();
    let phases = match cfg.method {
        Method::AdaptiveRk => dopri5(spec, cfg, &mut stats)?,
        Method::FixedRk4 => rk4(spec, cfg, &mut stats)?,
        Method::ProximalSemiImplicit => proximal(spec, cfg, &mut stats)?,
    };
    let position_rates = if nonsmooth {
        None
    } else {
        let mut rates = Vec::with_capacity(grid.len());
        for (&t, y) in grid.iter().zip(&phases) {
            rates.push(position_rate(spec, t, y)?);
        }
        Some(rates)
    };
    let states: Vec<State> = grid
        .iter()
        .zip(&phases)
        .map(|(&t, y)| spec.split_phase(t, y))
        .collect();
    let eps = grid
        .iter()
        .map(|&t| spec.tikhonov_coefficient(t))
        .collect::<Result<Vec<_>>>()?;
    let (diagnostics, gap_reference) = diagnose(spec.problem(), grid, &states, &eps)?;
    Ok(TrajectoryRecord {
        kind: spec.kind(),
        method: cfg.method,
        times: grid.clone(),
        states,
        position_rates,
        diagnostics,
        gap_reference,
        stats,
    })
}

fn position_rate(spec: &DynamicsSpec, t: f64, y: &Point) -> Result<Point> {
    let d = spec.problem().dim();
    let dy = spec.phase_rhs(t, y)?;
    Ok(match spec.kind() {
        DynamicsKind::SdTikhonov | DynamicsKind::RescaledFirstOrder => dy,
        k if k.is_second_order() => dy.rows(0, d).into_owned(),
        _ => dy.rows(d, d).into_owned(),
    })
}

/// Per-sample diagnostics of positions `states` with regularization `eps`.
pub(crate) fn diagnose(
    p: &ObjectiveProblem,
    times: &[f64],
    states: &[State],
    eps: &[f64],
) -> Result<(Vec<Diagnostics>, GapReference)> {
    let mut values = Vec::with_capacity(states.len());
    for (t, s) in times.iter().zip(states) {
        let v = p.value(&s.position)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { t: *t });
        }
        values.push(v);
    }
    let reference = match p.min_value() {
        Some(m) => GapReference::KnownMinimum(m),
        None => GapReference::BestSeen(values.iter().copied().fold(f64::INFINITY, f64::min)),
    };
    let mut out = Vec::with_capacity(states.len());
    for (((&t, s), v), &e) in times.iter().zip(states).zip(values).zip(eps) {
        let grad_norm = if p.is_smooth() {
            Some(p.gradient(&s.position)?.norm())
        } else {
            None
        };
        let dist_to_min_norm = p.min_norm_solution().map(|xs| (&s.position - xs).norm());
        let d = Diagnostics {
            f_gap: v - reference.value(),
            grad_norm,
            dist_to_min_norm,
            eps_value: e,
            energy: None,
        };
        let finite = d.f_gap.is_finite()
            && d.grad_norm.is_none_or(f64::is_finite)
            && d.dist_to_min_norm.is_none_or(f64::is_finite)
            && d.eps_value.is_finite();
        if !finite {
            return Err(Error::NonFinite { t });
        }
        out.push(d);
    }
    Ok((out, reference))
}

fn all_finite(y: &Point) -> bool {
    y.iter().all(|v| v.is_finite())
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

enum Attempt {
    Done { y: Point, f: Point, err: f64 },
    Domain,
    NonFinite,
}

fn dopri_attempt(
    spec: &DynamicsSpec,
    cfg: &IntegratorConfig,
    t: f64,
    y: &Point,
    f0: &Point,
    h: f64,
    stats: &mut StepStats,
) -> Result<Attempt> {
    let mut k: Vec<Point> = Vec::with_capacity(7);
    k.push(f0.clone());
    let mut y_new = y.clone();
    for (i, row) in A.iter().enumerate() {
        let mut yi = y.clone();
        for (j, a) in row.iter().enumerate().take(i + 1) {
            if *a != 0.0 {
                yi.axpy(h * a, &k[j], 1.0);
            }
        }
        if !all_finite(&yi) {
            return Ok(Attempt::NonFinite);
        }
        stats.rhs_evals += 1;
        match spec.phase_rhs(t + C[i] * h, &yi) {
            Ok(ki) if all_finite(&ki) => k.push(ki),
            Ok(_) => return Ok(Attempt::NonFinite),
            Err(Error::Domain(_)) => return Ok(Attempt::Domain),
            Err(e) => return Err(e),
        }
        // The last stage sits at the 5th-order solution (FSAL).
        if i == 5 {
            y_new = yi;
        }
    }
    let n = y.len() as f64;
    let mut acc = 0.0;
    for idx in 0..y.len() {
        let e: f64 = E.iter().zip(&k).map(|(ej, kj)| ej * kj[idx]).sum();
        let sc = cfg.abs_tol + cfg.rel_tol * y[idx].abs().max(y_new[idx].abs());
        acc += (h * e / sc).powi(2);
    }
    let err = (acc / n).sqrt();
    if !err.is_finite() {
        return Ok(Attempt::NonFinite);
    }
    Ok(Attempt::Done {
        f: k.pop().expect("seven stages"),
        y: y_new,
        err,
    })
}

fn dopri5(spec: &DynamicsSpec, cfg: &IntegratorConfig, stats: &mut StepStats) -> Result<Vec<Point>> {
    let grid = &cfg.sample_grid;
    let t_end = cfg.t_end();
    let mut t = grid[0];
    let mut y = spec.initial_phase();
    stats.rhs_evals += 1;
    let mut f = spec.phase_rhs(t, &y)?;
    let mut out = Vec::with_capacity(grid.len());
    out.push(y.clone());
    let mut next = 1;
    let mut h = initial_step(cfg, t, &y, &f, t_end);
    let mut retries = 0;
    let mut saw_non_finite = false;
    while next < grid.len() {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::StepBudget { t, steps: cfg.max_steps });
        }
        h = h.min(grid[next] - grid[next - 1]);
        let last = t + h >= t_end;
        let h_try = if last { t_end - t } else { h };
        if !(h_try > 1e-14 * t.abs().max(1.0)) {
            return Err(if saw_non_finite {
                Error::NonFinite { t }
            } else {
                Error::Convergence(format!("step size underflow at t = {t}"))
            });
        }
        match dopri_attempt(spec, cfg, t, &y, &f, h_try, stats)? {
            Attempt::Domain => {
                retries += 1;
                stats.domain_retries += 1;
                if retries > cfg.max_retries {
                    return Err(Error::DomainExit { t, retries: cfg.max_retries });
                }
                h = 0.5 * h_try;
            }
            Attempt::NonFinite => {
                saw_non_finite = true;
                stats.rejected += 1;
                h = 0.2 * h_try;
            }
            Attempt::Done { y: y_new, f: f_new, err } => {
                let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                if err > 1.0 {
                    stats.rejected += 1;
                    h = h_try * factor.max(0.2);
                    continue;
                }
                retries = 0;
                stats.accepted += 1;
                let t_new = if last { t_end } else { t + h_try };
                while next < grid.len() && grid[next] <= t_new {
                    let s = grid[next];
                    out.push(if s == t_new {
                        y_new.clone()
                    } else {
                        hermite(t, h_try, &y, &f, &y_new, &f_new, s)
                    });
                    next += 1;
                }
                t = t_new;
                y = y_new;
                f = f_new;
                h = h_try * factor.clamp(0.2, 5.0);
            }
        }
    }
    Ok(out)
}

fn initial_step(cfg: &IntegratorConfig, t: f64, y: &Point, f: &Point, t_end: f64) -> f64 {
    let n = y.len() as f64;
    let sc = |v: f64| cfg.abs_tol + cfg.rel_tol * v.abs();
    let d0 = (y.iter().map(|v| (v / sc(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (y.iter().zip(f.iter()).map(|(v, g)| (g / sc(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * t.max(1.0) } else { 0.01 * d0 / d1 };
    h.min(t_end - t).max(1e-10 * t.max(1.0))
}

/// Cubic Hermite interpolant on `[t, t + h]` evaluated at `s`.
pub fn hermite(t: f64, h: f64, y0: &Point, f0: &Point, y1: &Point, f1: &Point, s: f64) -> Point {
    let th = (s - t) / h;
    let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
    let h10 = th * (1.0 - th) * (1.0 - th);
    let h01 = th * th * (3.0 - 2.0 * th);
    let h11 = th * th * (th - 1.0);
    y0 * h00 + f0 * (h * h10) + y1 * h01 + f1 * (h * h11)
}

fn rk4_step(spec: &DynamicsSpec, t: f64, y: &Point, h: f64, stats: &mut StepStats) -> Result<Point> {
    stats.rhs_evals += 4;
    let k1 = spec.phase_rhs(t, y)?;
    let k2 = spec.phase_rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = spec.phase_rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = spec.phase_rhs(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn rk4(spec: &DynamicsSpec, cfg: &IntegratorConfig, stats: &mut StepStats) -> Result<Vec<Point>> {
    let h = cfg.step.ok_or_else(|| {
        Error::InvalidParameter("fixed_rk4 needs integrator.step".into())
    })?;
    let grid = &cfg.sample_grid;
    let mut y = spec.initial_phase();
    let mut out = vec![y.clone()];
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut n = ((b - a) / h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let mut retries = 0;
        let y_end = loop {
            if stats.accepted + n > cfg.max_steps {
                return Err(Error::StepBudget { t: a, steps: cfg.max_steps });
            }
            match rk4_interval(spec, a, b, &y, n, stats) {
                Err(Error::Domain(_)) if retries < cfg.max_retries => {
                    retries += 1;
                    stats.domain_retries += 1;
                    n *= 2;
                }
                Err(Error::Domain(_)) => {
                    return Err(Error::DomainExit { t: a, retries });
                }
                other => break other?,
            }
        };
        if !all_finite(&y_end) {
            return Err(Error::NonFinite { t: b });
        }
        y = y_end;
        out.push(y.clone());
    }
    Ok(out)
}

fn rk4_interval(spec: &DynamicsSpec, a: f64, b: f64, y: &Point, n: usize, stats: &mut StepStats) -> Result<Point> {
    let h = (b - a) / n as f64;
    let mut y = y.clone();
    for i in 0..n {
        y = rk4_step(spec, a + i as f64 * h, &y, h, stats)?;
        stats.accepted += 1;
    }
    Ok(y)
}

fn proximal(spec: &DynamicsSpec, cfg: &IntegratorConfig, stats: &mut StepStats) -> Result<Vec<Point>> {
    let d = spec.problem().dim();
    let grid = &cfg.sample_grid;
    let y0 = spec.initial_phase();
    let mut v = y0.rows(0, d).into_owned();
    let mut x = y0.rows(d, d).into_owned();
    let mut out = vec![y0];
    let mut t = grid[0];
    for &s in &grid[1..] {
        while t < s {
            if stats.accepted >= cfg.max_steps {
                return Err(Error::StepBudget { t, steps: cfg.max_steps });
            }
            let cap = cfg.step.map_or(spec.h_max(t), |h| h.min(spec.h_max(t)));
            let (h, t_new) = if s - t <= cap { (s - t, s) } else { (cap, t + cap) };
            let (v_new, x_new) = spec.nonsmooth_step(t, &v, &x, h)?;
            if !all_finite(&v_new) || !all_finite(&x_new) {
                return Err(Error::NonFinite { t: t_new });
            }
            stats.accepted += 1;
            v = v_new;
            x = x_new;
            t = t_new;
        }
        let mut y = Point::zeros(2 * d);
        y.rows_mut(0, d).copy_from(&v);
        y.rows_mut(d, d).copy_from(&x);
        out.push(y);
    }
    Ok(out)
}
