//! The energy `E = φ(x) − φ(x_ε) + (ε/2)‖x − x_ε‖²` with `φ = f + (ε/2)‖·‖²`,
//! and the check of its decay bound along first-order runs.

use super::viscosity::viscosity_point_warm;
use crate::error::{Error, Result};
use crate::integrators::TrajectoryRecord;
use crate::problems::{ObjectiveProblem, Point};
use crate::schedules::{ScheduleFamily, TikhonovSchedule};

pub const BOUND_SLACK: f64 = 1e-6;
const ABS_SLACK: f64 = 1e-15;

/// Energy at regularization `eps` together with the viscosity point used.
pub fn energy_at(p: &ObjectiveProblem, eps: f64, x: &Point, warm: Option<&Point>) -> Result<(f64, Point)> {
    let xe = viscosity_point_warm(p, eps, warm)?.point;
    let phi_gap = p.value(x)? - p.value(&xe)? + 0.5 * eps * (x.norm_squared() - xe.norm_squared());
    let e = phi_gap + 0.5 * eps * (x - &xe).norm_squared();
    Ok((e.max(0.0), xe))
}

pub fn lyapunov_energy(p: &ObjectiveProblem, schedule: &TikhonovSchedule, t: f64, x: &Point) -> Result<f64> {
    let eps = schedule.epsilon(t)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("energy needs eps(t) > 0, got {eps} at t = {t}")));
    }
    Ok(energy_at(p, eps, x, None)?.0)
}

/// Fills `diagnostics[i].energy` at each sample's own `eps_value`; samples
/// with `eps = 0` and problems without prox are left empty.
pub fn fill_energy(record: &mut TrajectoryRecord, p: &ObjectiveProblem) -> Result<()> {
    if !p.has_prox() {
        return Ok(());
    }
    let mut warm: Option<Point> = None;
    for (s, d) in record.states.iter().zip(record.diagnostics.iter_mut()) {
        if d.eps_value > 0.0 {
            let (e, xe) = energy_at(p, d.eps_value, &s.position, warm.as_ref())?;
            d.energy = Some(e);
            warm = Some(xe);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSample {
    pub t: f64,
    pub energy: f64,
    pub bound: f64,
    pub dist_sq: f64,
    pub eps: f64,
    pub f_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub t1: f64,
    pub samples: Vec<BoundSample>,
    /// Times where `E(t)` exceeds its bound.
    pub energy_violations: Vec<f64>,
    /// Times where `‖x − x_ε‖² > E/ε`.
    pub distance_violations: Vec<f64>,
    /// Times where `f(x) − min f > E + (ε/2)‖x*‖²`.
    pub sandwich_violations: Vec<f64>,
}

impl LyapunovReport {
    pub fn violations(&self) -> usize {
        self.energy_violations.len() + self.distance_violations.len() + self.sandwich_violations.len()
    }
}

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + BOUND_SLACK * rhs.abs() + ABS_SLACK
}

/// `J(a, b) = ∫_a^b ε̇(s) γ(s)/γ(b) ds`, in closed form for `δ/t`.
fn weighted_rate_integral(schedule: &TikhonovSchedule, a: f64, b: f64) -> Result<f64> {
    match schedule.family() {
        ScheduleFamily::Zero | ScheduleFamily::Constant { .. } => Ok(0.0),
        ScheduleFamily::DeltaOverT { delta } => {
            if (delta - 1.0).abs() < 1e-12 {
                Ok(-(b / a).ln() / b)
            } else {
                Ok(-delta / (delta - 1.0) * (1.0 / b - a.powf(delta - 1.0) * b.powf(-delta)))
            }
        }
        ScheduleFamily::InversePower { .. } => {
            let lg_b = schedule.log_gamma(b)?;
            let integrand = |s: f64| {
                let ed = schedule.epsilon_dot(s).unwrap_or(f64::NAN);
                let lg = schedule.log_gamma(s).unwrap_or(f64::NAN);
                ed * (lg - lg_b).exp()
            };
            let out = quadrature::double_exponential::integrate(integrand, a, b, 1e-14);
            if !out.integral.is_finite() {
                return Err(Error::Convergence(format!("quadrature failed on [{a}, {b}]")));
            }
            Ok(out.integral)
        }
    }
}

/// Evaluates both sides of the energy bound on the samples of a first-order
/// run, anchored at its first sample `t₁`.
pub fn check_lyapunov_bound(
    record: &TrajectoryRecord,
    schedule: &TikhonovSchedule,
    p: &ObjectiveProblem,
) -> Result<LyapunovReport> {
    let xs = p
        .min_norm_solution()
        .ok_or_else(|| Error::Unsupported(format!("{} has no known minimum-norm solution", p.name())))?;
    if !p.is_smooth() {
        return Err(Error::Unsupported("the bound check needs a smooth problem".into()));
    }
    let min = p
        .min_value()
        .ok_or_else(|| Error::Unsupported(format!("{} has no known minimum", p.name())))?;
    let xs2 = xs.norm_squared();
    let t1 = record.times[0];
    let lg1 = schedule.log_gamma(t1)?;
    let mut samples = Vec::with_capacity(record.len());
    let mut warm: Option<Point> = None;
    let mut e1 = 0.0;
    // J(t₁, t) accumulated interval by interval, rescaled by γ(tₖ)/γ(tₖ₊₁).
    let mut j = 0.0;
    let mut prev = (t1, lg1);
    for (i, (&t, s)) in record.times.iter().zip(&record.states).enumerate() {
        let eps = schedule.epsilon(t)?;
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps({t}) = {eps} is not positive")));
        }
        let x = &s.position;
        let (e, xe) = energy_at(p, eps, x, warm.as_ref())?;
        let lg = schedule.log_gamma(t)?;
        if i == 0 {
            e1 = e;
        } else {
            j = j * (prev.1 - lg).exp() + weighted_rate_integral(schedule, prev.0, t)?;
        }
        prev = (t, lg);
        samples.push(BoundSample {
            t,
            energy: e,
            bound: (lg1 - lg).exp() * e1 - xs2 * j,
            dist_sq: (x - &xe).norm_squared(),
            eps,
            f_gap: p.value(x)? - min,
        });
        warm = Some(xe);
    }
    let pick = |f: &dyn Fn(&BoundSample) -> bool| samples.iter().filter(|s| f(s)).map(|s| s.t).collect();
    let energy_violations = pick(&|s| exceeds(s.energy, s.bound));
    let distance_violations = pick(&|s| exceeds(s.dist_sq, s.energy / s.eps));
    let sandwich_violations = pick(&|s| exceeds(s.f_gap, s.energy + 0.5 * s.eps * xs2));
    Ok(LyapunovReport {
        t1,
        samples,
        energy_violations,
        distance_violations,
        sandwich_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::catalog;

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    #[test]
    fn energy_examples() {
        let f2 = catalog::f2();
        // φ(0) = 1/2, x_ε = (1/4, 1/4), φ(x_ε) = 1/8 + 1/8, (ε/2)‖x_ε‖² = 1/8.
        let (e, xe) = energy_at(&f2, 2.0, &p(&[0.0, 0.0]), None).unwrap();
        let phi = |x: &Point| f2.value(x).unwrap() + x.norm_squared();
        let direct = phi(&p(&[0.0, 0.0])) - phi(&xe) + xe.norm_squared();
        assert!((e - 0.375).abs() < 1e-14 && (e - direct).abs() < 1e-15, "{e}");
        let xe = viscosity_point_warm(&f2, 0.3, None).unwrap().point;
        assert!(energy_at(&f2, 0.3, &xe, None).unwrap().0 < 1e-15);
    }

    #[test]
    fn energy_dominates_distance_term() {
        let f1 = catalog::f1();
        for (i, eps) in [0.01, 0.3, 2.0].iter().enumerate() {
            let x = p(&[0.4 * i as f64 - 0.3, 1.0 - 0.5 * i as f64]);
            let (e, xe) = energy_at(&f1, *eps, &x, None).unwrap();
            assert!(e >= 0.5 * eps * (&x - xe).norm_squared() - 1e-14);
        }
    }

    #[test]
    fn closed_form_integral_matches_quadrature() {
        for delta in [1.0, 2.0, 3.5] {
            let s = TikhonovSchedule::delta_over_t(delta, 1.0).unwrap();
            let (a, b) = (2.0, 37.0);
            let closed = weighted_rate_integral(&s, a, b).unwrap();
            let lg_b = s.log_gamma(b).unwrap();
            let q = quadrature::double_exponential::integrate(
                |u| s.epsilon_dot(u).unwrap() * (s.log_gamma(u).unwrap() - lg_b).exp(),
                a,
                b,
                1e-14,
            )
            .integral;
            assert!((closed - q).abs() < 1e-12 * q.abs().max(1.0), "{delta}");
        }
    }

    #[test]
    fn rejects_zero_schedule() {
        let z = TikhonovSchedule::zero(1.0).unwrap();
        assert!(lyapunov_energy(&catalog::f2(), &z, 1.0, &p(&[0.0, 0.0])).is_err());
    }
}
