//! Evolution rules for every dynamical system of the laboratory.
//!
//! Second-order systems are written in phase space `(x, ẋ)`; the coupled
//! systems in `(v, x)`. Each rule is a pure function of `(t, state)`.

use crate::error::{Error, Result};
use crate::problems::{ObjectiveProblem, Point};
use crate::schedules::{time_scale_rate, ScheduleFamily, TikhonovSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DynamicsKind {
    /// `ẋ + ∇f(x) + ε(t)x = 0`
    SdTikhonov,
    /// `v̇ + τ̇(t)[∇f(v) + ε(τ(t))v] = 0`
    RescaledFirstOrder,
    /// `ẍ + (α/t)ẋ + ∇f(w) + ε(τ(t))w = 0`, `w = x + t/(α−1)·ẋ`
    InertialImplicitHessian,
    /// `ẍ + δ√ε(t)·ẋ + β∇²f(x)ẋ + ∇f(x) + ε(t)x = 0`
    InertialExplicitHessian,
    /// `ẍ + (α/t)ẋ + ∇f(x) + ε(t)x = 0`
    AvdBaseline,
    /// First-order system in `(v, x)` equivalent to the implicit-Hessian one.
    CoupledVX,
    /// Same, with `∂f` in place of `∇f`; stepped by proximal steps only.
    CoupledVXNonsmooth,
}

impl DynamicsKind {
    pub const ALL: [DynamicsKind; 7] = [
        DynamicsKind::SdTikhonov,
        DynamicsKind::RescaledFirstOrder,
        DynamicsKind::InertialImplicitHessian,
        DynamicsKind::InertialExplicitHessian,
        DynamicsKind::AvdBaseline,
        DynamicsKind::CoupledVX,
        DynamicsKind::CoupledVXNonsmooth,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DynamicsKind::SdTikhonov => "sd_tikhonov",
            DynamicsKind::RescaledFirstOrder => "rescaled_first_order",
            DynamicsKind::InertialImplicitHessian => "inertial_implicit_hessian",
            DynamicsKind::InertialExplicitHessian => "inertial_explicit_hessian",
            DynamicsKind::AvdBaseline => "avd_baseline",
            DynamicsKind::CoupledVX => "coupled_vx",
            DynamicsKind::CoupledVXNonsmooth => "coupled_vx_nonsmooth",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown dynamics kind `{s}`")))
    }

    pub fn is_second_order(&self) -> bool {
        matches!(
            self,
            DynamicsKind::InertialImplicitHessian
                | DynamicsKind::InertialExplicitHessian
                | DynamicsKind::AvdBaseline
        )
    }

    pub fn is_coupled(&self) -> bool {
        matches!(self, DynamicsKind::CoupledVX | DynamicsKind::CoupledVXNonsmooth)
    }

    /// Whether the system sees `ε(τ(t))` rather than `ε(t)`.
    pub fn uses_time_scale(&self) -> bool {
        matches!(
            self,
            DynamicsKind::RescaledFirstOrder
                | DynamicsKind::InertialImplicitHessian
                | DynamicsKind::CoupledVX
                | DynamicsKind::CoupledVXNonsmooth
        )
    }
}

/// A sampled point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub position: Point,
    pub velocity: Option<Point>,
    pub companion: Option<Point>,
}

/// One fully parametrized dynamical system with its Cauchy data.
#[derive(Debug, Clone)]
pub struct DynamicsSpec {
    kind: DynamicsKind,
    problem: ObjectiveProblem,
    schedule: TikhonovSchedule,
    alpha: f64,
    beta: f64,
    delta_visc: f64,
    t0: f64,
    x0: Point,
    v0: Option<Point>,
}

/// Builder for [`DynamicsSpec`]; everything is validated in [`build`](Self::build).
#[derive(Debug, Clone)]
pub struct DynamicsBuilder {
    spec: DynamicsSpec,
}

impl DynamicsBuilder {
    pub fn schedule(mut self, s: TikhonovSchedule) -> Self {
        self.spec.schedule = s;
        self
    }
    pub fn alpha(mut self, alpha: f64) -> Self {
        self.spec.alpha = alpha;
        self
    }
    pub fn beta(mut self, beta: f64) -> Self {
        self.spec.beta = beta;
        self
    }
    pub fn delta_visc(mut self, d: f64) -> Self {
        self.spec.delta_visc = d;
        self
    }
    pub fn t0(mut self, t0: f64) -> Self {
        self.spec.t0 = t0;
        self
    }
    pub fn x0(mut self, x0: Point) -> Self {
        self.spec.x0 = x0;
        self
    }
    /// Initial velocity `ẋ(t₀)`.
    pub fn v0(mut self, v0: Option<Point>) -> Self {
        self.spec.v0 = v0;
        self
    }

    pub fn build(self) -> Result<DynamicsSpec> {
        self.spec.validate()?;
        Ok(self.spec)
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl DynamicsSpec {
    /// Starts a builder with defaults `α = 3`, `β = 1`, `δ_visc = 3`,
    /// `t₀ = 1`, `x₀ = 0`, zero schedule.
    pub fn builder(kind: DynamicsKind, problem: ObjectiveProblem) -> DynamicsBuilder {
        let dim = problem.dim();
        DynamicsBuilder {
            spec: DynamicsSpec {
                kind,
                problem,
                schedule: TikhonovSchedule::zero(1.0).expect("t_ref = 1 is valid"),
                alpha: 3.0,
                beta: 1.0,
                delta_visc: 3.0,
                t0: 1.0,
                x0: Point::zeros(dim),
                v0: None,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.kind;
        let p = &self.problem;
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(invalid(format!("t0 must be positive, got {}", self.t0)));
        }
        if k.uses_time_scale() && !(self.alpha > 1.0) {
            return Err(invalid(format!("{} needs alpha > 1, got {}", k.name(), self.alpha)));
        }
        if k == DynamicsKind::AvdBaseline && !(self.alpha > 0.0) {
            return Err(invalid(format!("avd_baseline needs alpha > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) || !(self.delta_visc >= 0.0) {
            return Err(invalid("beta and delta_visc must be nonnegative".into()));
        }
        if self.x0.len() != p.dim() {
            return Err(invalid(format!(
                "x0 has dimension {}, problem has {}",
                self.x0.len(),
                p.dim()
            )));
        }
        if !p.in_domain(&self.x0) {
            return Err(Error::Domain(format!(
                "x0 = {:?} is outside the domain of {}",
                self.x0.as_slice(),
                p.name()
            )));
        }
        if let Some(v0) = &self.v0 {
            if v0.len() != p.dim() {
                return Err(invalid(format!(
                    "v0 has dimension {}, problem has {}",
                    v0.len(),
                    p.dim()
                )));
            }
        }
        match k {
            DynamicsKind::CoupledVXNonsmooth => {
                if !p.has_prox() {
                    return Err(Error::Unsupported(format!("{} has no prox", p.name())));
                }
                if self.v0.as_ref().is_some_and(|v| v.iter().any(|c| *c != 0.0)) {
                    return Err(invalid(
                        "coupled_vx_nonsmooth requires zero initial velocity".into(),
                    ));
                }
            }
            _ if !p.is_smooth() => {
                return Err(Error::Unsupported(format!(
                    "{} needs a gradient, {} is nonsmooth",
                    k.name(),
                    p.name()
                )))
            }
            DynamicsKind::InertialExplicitHessian if !p.has_hess_vec() => {
                return Err(Error::Unsupported(format!(
                    "{} has no Hessian-vector product",
                    p.name()
                )))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn kind(&self) -> DynamicsKind {
        self.kind
    }
    pub fn problem(&self) -> &ObjectiveProblem {
        &self.problem
    }
    pub fn schedule(&self) -> &TikhonovSchedule {
        &self.schedule
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn delta_visc(&self) -> f64 {
        self.delta_visc
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn x0(&self) -> &Point {
        &self.x0
    }
    pub fn v0(&self) -> Option<&Point> {
        self.v0.as_ref()
    }

    /// Copy of this spec with another kind, revalidated.
    pub fn with_kind(&self, kind: DynamicsKind) -> Result<Self> {
        let mut s = self.clone();
        s.kind = kind;
        s.validate()?;
        Ok(s)
    }

    /// Whether the parameters fall in the range covered by the convergence
    /// theorems for this kind.
    pub fn theorem_grade(&self) -> bool {
        let fam = self.schedule.family();
        let sd_rates = matches!(fam, ScheduleFamily::DeltaOverT { delta } if delta > 1.0)
            || matches!(fam, ScheduleFamily::InversePower { .. });
        let inertial = match fam {
            ScheduleFamily::DeltaOverT { delta } => self.alpha > 3.0 && delta > 1.0,
            ScheduleFamily::InversePower { .. } => self.alpha > 1.0,
            _ => false,
        };
        match self.kind {
            DynamicsKind::SdTikhonov | DynamicsKind::RescaledFirstOrder => sd_rates,
            DynamicsKind::InertialImplicitHessian | DynamicsKind::CoupledVX => inertial,
            DynamicsKind::CoupledVXNonsmooth => {
                inertial && self.v0.as_ref().is_none_or(|v| v.iter().all(|c| *c == 0.0))
            }
            DynamicsKind::InertialExplicitHessian => {
                let r_ok = matches!(fam, ScheduleFamily::InversePower { .. })
                    || matches!(fam, ScheduleFamily::DeltaOverT { delta } if delta == 1.0);
                r_ok && self.delta_visc > 2.0 && self.beta > 0.0
            }
            DynamicsKind::AvdBaseline => false,
        }
    }

    /// Regularization coefficient acting on the system at time `t`.
    pub fn tikhonov_coefficient(&self, t: f64) -> Result<f64> {
        if self.kind.uses_time_scale() {
            self.schedule.composed(self.alpha)?.epsilon(t)
        } else {
            self.schedule.epsilon(t)
        }
    }

    fn scaled_eps(&self, t: f64) -> Result<f64> {
        self.schedule.composed(self.alpha)?.epsilon(t)
    }

    /// Initial velocity `ẋ(t₀)`, zero when absent.
    pub fn initial_velocity(&self) -> Point {
        self.v0.clone().unwrap_or_else(|| Point::zeros(self.problem.dim()))
    }

    /// Companion `v(t₀) = x₀ + τ̇(t₀)·ẋ(t₀)` of the coupled formulation.
    pub fn initial_companion(&self) -> Point {
        &self.x0 + self.initial_velocity() * time_scale_rate(self.alpha, self.t0)
    }

    pub fn phase_dim(&self) -> usize {
        match self.kind {
            DynamicsKind::SdTikhonov | DynamicsKind::RescaledFirstOrder => self.problem.dim(),
            _ => 2 * self.problem.dim(),
        }
    }

    pub fn initial_phase(&self) -> Point {
        let d = self.problem.dim();
        match self.kind {
            DynamicsKind::SdTikhonov | DynamicsKind::RescaledFirstOrder => self.x0.clone(),
            k if k.is_second_order() => stack(&self.x0, &self.initial_velocity()),
            _ => {
                let mut y = Point::zeros(2 * d);
                y.rows_mut(0, d).copy_from(&self.initial_companion());
                y.rows_mut(d, d).copy_from(&self.x0);
                y
            }
        }
    }

    /// Interprets a phase-space vector at time `t`.
    pub fn split_phase(&self, t: f64, y: &Point) -> State {
        let d = self.problem.dim();
        match self.kind {
            DynamicsKind::SdTikhonov | DynamicsKind::RescaledFirstOrder => State {
                position: y.clone(),
                velocity: None,
                companion: None,
            },
            k if k.is_second_order() => State {
                position: y.rows(0, d).into_owned(),
                velocity: Some(y.rows(d, d).into_owned()),
                companion: None,
            },
            _ => {
                let v = y.rows(0, d).into_owned();
                let x = y.rows(d, d).into_owned();
                let xdot = (&v - &x) * ((self.alpha - 1.0) / t);
                State {
                    position: x,
                    velocity: Some(xdot),
                    companion: Some(v),
                }
            }
        }
    }

    /// Right-hand side of the phase-space ODE.
    pub fn phase_rhs(&self, t: f64, y: &Point) -> Result<Point> {
        let d = self.problem.dim();
        match self.kind {
            DynamicsKind::SdTikhonov => self.rhs_sd_tikhonov(t, y),
            DynamicsKind::RescaledFirstOrder => self.rhs_rescaled_first_order(t, y),
            DynamicsKind::InertialImplicitHessian
            | DynamicsKind::InertialExplicitHessian
            | DynamicsKind::AvdBaseline => {
                let x = y.rows(0, d).into_owned();
                let xd = y.rows(d, d).into_owned();
                let acc = match self.kind {
                    DynamicsKind::InertialImplicitHessian => {
                        self.rhs_inertial_implicit_hessian(t, &x, &xd)?
                    }
                    DynamicsKind::InertialExplicitHessian => {
                        self.rhs_inertial_explicit_hessian(t, &x, &xd)?
                    }
                    _ => self.rhs_avd_baseline(t, &x, &xd)?,
                };
                Ok(stack(&xd, &acc))
            }
            DynamicsKind::CoupledVX => {
                let v = y.rows(0, d).into_owned();
                let x = y.rows(d, d).into_owned();
                let (vd, xd) = self.rhs_coupled_vx(t, &v, &x)?;
                Ok(stack(&vd, &xd))
            }
            DynamicsKind::CoupledVXNonsmooth => Err(Error::Unsupported(
                "coupled_vx_nonsmooth has no vector field; use the proximal stepper".into(),
            )),
        }
    }

    /// `−∇f(x) − ε(t)x`.
    pub fn rhs_sd_tikhonov(&self, t: f64, x: &Point) -> Result<Point> {
        let eps = self.schedule.epsilon(t)?;
        let g = self.problem.gradient(x)?;
        Ok(-(g + x * eps))
    }

    /// `−(t/(α−1))·[∇f(v) + ε(τ(t))v]`.
    pub fn rhs_rescaled_first_order(&self, t: f64, v: &Point) -> Result<Point> {
        let eps = self.scaled_eps(t)?;
        let g = self.problem.gradient(v)?;
        Ok(-(g + v * eps) * time_scale_rate(self.alpha, t))
    }

    /// Acceleration of the implicit-Hessian system.
    pub fn rhs_inertial_implicit_hessian(&self, t: f64, x: &Point, xdot: &Point) -> Result<Point> {
        let eps = self.scaled_eps(t)?;
        let w = x + xdot * time_scale_rate(self.alpha, t);
        if !self.problem.in_domain(&w) {
            return Err(Error::Domain(format!(
                "lookahead point {:?} left the domain at t = {t}",
                w.as_slice()
            )));
        }
        let g = self.problem.gradient(&w)?;
        Ok(-(xdot * (self.alpha / t)) - g - w * eps)
    }

    /// Acceleration of the explicit-Hessian comparison system.
    pub fn rhs_inertial_explicit_hessian(&self, t: f64, x: &Point, xdot: &Point) -> Result<Point> {
        let eps = self.schedule.epsilon(t)?;
        let hv = self.problem.hess_vec(x, xdot)?;
        let g = self.problem.gradient(x)?;
        Ok(-(xdot * (self.delta_visc * eps.sqrt())) - hv * self.beta - g - x * eps)
    }

    /// Acceleration of `(AVD)_{α,ε}`.
    pub fn rhs_avd_baseline(&self, t: f64, x: &Point, xdot: &Point) -> Result<Point> {
        let eps = self.schedule.epsilon(t)?;
        let g = self.problem.gradient(x)?;
        Ok(-(xdot * (self.alpha / t)) - g - x * eps)
    }

    /// `(v̇, ẋ)` of the coupled first-order system.
    pub fn rhs_coupled_vx(&self, t: f64, v: &Point, x: &Point) -> Result<(Point, Point)> {
        let vd = self.rhs_rescaled_first_order(t, v)?;
        let xd = (x - v) * (-(self.alpha - 1.0) / t);
        Ok((vd, xd))
    }

    /// Largest admissible proximal step at time `t`.
    pub fn h_max(&self, t: f64) -> f64 {
        0.1 * t / (self.alpha - 1.0)
    }

    /// One semi-implicit step of the coupled system with `∂f`: backward
    /// (proximal) in `f`, linearly implicit in the Tikhonov term, implicit in
    /// the averaging equation. Coefficients are frozen at `t`.
    pub fn nonsmooth_step(&self, t: f64, v: &Point, x: &Point, h: f64) -> Result<(Point, Point)> {
        if !(h > 0.0) {
            return Err(invalid(format!("step must be positive, got {h}")));
        }
        let hmax = self.h_max(t);
        if h > hmax * (1.0 + 1e-12) {
            return Err(invalid(format!("step {h} exceeds h_max({t}) = {hmax}")));
        }
        let c = time_scale_rate(self.alpha, t);
        let eps = self.scaled_eps(t)?;
        let damp = 1.0 + h * c * eps;
        let lambda = h * c / damp;
        let v_next = self.problem.prox_warm(lambda, &(v / damp), Some(v))?;
        let k = h * (self.alpha - 1.0) / t;
        let x_next = (x + &v_next * k) / (1.0 + k);
        Ok((v_next, x_next))
    }
}

fn stack(a: &Point, b: &Point) -> Point {
    let d = a.len();
    let mut y = Point::zeros(d + b.len());
    y.rows_mut(0, d).copy_from(a);
    y.rows_mut(d, b.len()).copy_from(b);
    y
}
