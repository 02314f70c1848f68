//! Tikhonov regularization schedules `ε(t)` and the quantities derived from
//! them: the derivative `ε̇`, the integrating factor `γ(t) = exp ∫ ε`, and the
//! schedule seen by the second-order systems after the time change
//! `τ(t) = t² / (2(α − 1))`.

use crate::error::{Error, Result};

/// Parametrized family of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleFamily {
    /// `ε(t) = δ / t`
    DeltaOverT { delta: f64 },
    /// `ε(t) = t^{-r}` with `0 < r < 1`
    InversePower { r: f64 },
    /// `ε(t) = c`
    Constant { c: f64 },
    /// `ε ≡ 0`
    Zero,
}

/// A nonincreasing, nonnegative regularization coefficient `ε(·)`.
///
/// `t_ref` is the lower bound `t₁` of the integral in `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TikhonovSchedule {
    family: ScheduleFamily,
    t_ref: f64,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("schedule evaluated at t = {t}, need t > 0")))
    }
}

impl TikhonovSchedule {
    pub fn new(family: ScheduleFamily, t_ref: f64) -> Result<Self> {
        if !(t_ref > 0.0 && t_ref.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_ref must be positive, got {t_ref}"
            )));
        }
        match family {
            ScheduleFamily::DeltaOverT { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "delta must be positive, got {delta}"
                )))
            }
            ScheduleFamily::InversePower { r } if !(r > 0.0 && r < 1.0) => {
                return Err(Error::InvalidParameter(format!(
                    "r must lie in (0, 1), got {r}"
                )))
            }
            ScheduleFamily::Constant { c } if !(c >= 0.0 && c.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "constant schedule needs c >= 0, got {c}"
                )))
            }
            _ => {}
        }
        Ok(Self { family, t_ref })
    }

    pub fn delta_over_t(delta: f64, t_ref: f64) -> Result<Self> {
        Self::new(ScheduleFamily::DeltaOverT { delta }, t_ref)
    }

    pub fn inverse_power(r: f64, t_ref: f64) -> Result<Self> {
        Self::new(ScheduleFamily::InversePower { r }, t_ref)
    }

    pub fn constant(c: f64, t_ref: f64) -> Result<Self> {
        Self::new(ScheduleFamily::Constant { c }, t_ref)
    }

    pub fn zero(t_ref: f64) -> Result<Self> {
        Self::new(ScheduleFamily::Zero, t_ref)
    }

    pub fn family(&self) -> ScheduleFamily {
        self.family
    }

    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    /// Same family anchored at a different `t₁`.
    pub fn with_t_ref(&self, t_ref: f64) -> Result<Self> {
        Self::new(self.family, t_ref)
    }

    /// True when `ε(t) → 0` as `t → ∞`.
    pub fn vanishes(&self) -> bool {
        !matches!(self.family, ScheduleFamily::Constant { c } if c > 0.0)
    }

    /// True when `ε` is identically zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.family, ScheduleFamily::Zero)
            || matches!(self.family, ScheduleFamily::Constant { c } if c == 0.0)
    }

    pub fn epsilon(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self.family {
            ScheduleFamily::DeltaOverT { delta } => delta / t,
            ScheduleFamily::InversePower { r } => t.powf(-r),
            ScheduleFamily::Constant { c } => c,
            ScheduleFamily::Zero => 0.0,
        })
    }

    pub fn epsilon_dot(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self.family {
            ScheduleFamily::DeltaOverT { delta } => -delta / (t * t),
            ScheduleFamily::InversePower { r } => -r * t.powf(-r - 1.0),
            ScheduleFamily::Constant { .. } | ScheduleFamily::Zero => 0.0,
        })
    }

    /// `∫_{t_ref}^{t} ε(s) ds`, i.e. `log γ(t)`.
    pub fn log_gamma(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if t < self.t_ref {
            return Err(Error::Domain(format!(
                "gamma needs t >= t_ref = {}, got {t}",
                self.t_ref
            )));
        }
        let t1 = self.t_ref;
        Ok(match self.family {
            ScheduleFamily::DeltaOverT { delta } => delta * (t / t1).ln(),
            ScheduleFamily::InversePower { r } => {
                (t.powf(1.0 - r) - t1.powf(1.0 - r)) / (1.0 - r)
            }
            ScheduleFamily::Constant { c } => c * (t - t1),
            ScheduleFamily::Zero => 0.0,
        })
    }

    /// `γ(t) = exp ∫_{t_ref}^{t} ε`. May overflow for long horizons with the
    /// inverse-power family; use [`log_gamma`](Self::log_gamma) there.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        self.log_gamma(t).map(f64::exp)
    }

    /// Schedule composed with the time scale `τ(t) = t²/(2(α−1))`.
    pub fn composed(&self, alpha: f64) -> Result<ComposedSchedule> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!(
                "time scaling needs alpha > 1, got {alpha}"
            )));
        }
        Ok(ComposedSchedule {
            base: *self,
            alpha,
        })
    }
}

/// `τ(t) = t² / (2(α − 1))`.
pub fn time_scale(alpha: f64, t: f64) -> f64 {
    t * t / (2.0 * (alpha - 1.0))
}

/// `τ̇(t) = t / (α − 1)`.
pub fn time_scale_rate(alpha: f64, t: f64) -> f64 {
    t / (alpha - 1.0)
}

/// Evaluator for `t ↦ ε(τ(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposedSchedule {
    base: TikhonovSchedule,
    alpha: f64,
}

impl ComposedSchedule {
    pub fn base(&self) -> &TikhonovSchedule {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        self.base.epsilon(time_scale(self.alpha, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<TikhonovSchedule> {
        vec![
            TikhonovSchedule::delta_over_t(2.0, 1.0).unwrap(),
            TikhonovSchedule::delta_over_t(0.7, 2.5).unwrap(),
            TikhonovSchedule::inverse_power(0.5, 1.0).unwrap(),
            TikhonovSchedule::inverse_power(0.9, 3.0).unwrap(),
            TikhonovSchedule::constant(0.3, 1.0).unwrap(),
            TikhonovSchedule::zero(1.0).unwrap(),
        ]
    }

    #[test]
    fn epsilon_examples() {
        let d = TikhonovSchedule::delta_over_t(2.0, 1.0).unwrap();
        assert_eq!(d.epsilon(4.0).unwrap(), 0.5);
        let p = TikhonovSchedule::inverse_power(0.5, 1.0).unwrap();
        assert_eq!(p.epsilon(4.0).unwrap(), 0.5);
        let z = TikhonovSchedule::zero(1.0).unwrap();
        assert_eq!(z.epsilon(123.0).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_dot_examples() {
        let d = TikhonovSchedule::delta_over_t(2.0, 1.0).unwrap();
        assert_eq!(d.epsilon_dot(4.0).unwrap(), -0.125);
        let c = TikhonovSchedule::constant(3.0, 1.0).unwrap();
        assert_eq!(c.epsilon_dot(7.0).unwrap(), 0.0);
        let p = TikhonovSchedule::inverse_power(0.5, 1.0).unwrap();
        assert_eq!(p.epsilon_dot(1.0).unwrap(), -0.5);
    }

    #[test]
    fn nonpositive_time_is_a_domain_error() {
        for s in all_families() {
            assert!(matches!(s.epsilon(0.0), Err(Error::Domain(_))));
            assert!(matches!(s.epsilon(-1.0), Err(Error::Domain(_))));
            assert!(matches!(s.epsilon_dot(0.0), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn gamma_examples() {
        let d = TikhonovSchedule::delta_over_t(2.0, 1.0).unwrap();
        assert!((d.gamma(3.0).unwrap() - 9.0).abs() < 1e-12);
        let p = TikhonovSchedule::inverse_power(0.5, 1.0).unwrap();
        assert!((p.gamma(4.0).unwrap() - 2f64.exp()).abs() < 1e-12);
        for s in all_families() {
            assert_eq!(s.gamma(s.t_ref()).unwrap(), 1.0);
        }
    }

    #[test]
    fn gamma_before_t_ref_is_rejected() {
        let d = TikhonovSchedule::delta_over_t(2.0, 5.0).unwrap();
        assert!(matches!(d.gamma(4.0), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(TikhonovSchedule::delta_over_t(0.0, 1.0).is_err());
        assert!(TikhonovSchedule::inverse_power(1.0, 1.0).is_err());
        assert!(TikhonovSchedule::inverse_power(0.0, 1.0).is_err());
        assert!(TikhonovSchedule::constant(-1.0, 1.0).is_err());
        assert!(TikhonovSchedule::zero(0.0).is_err());
    }

    #[test]
    fn composed_examples() {
        let d = TikhonovSchedule::delta_over_t(1.0, 1.0).unwrap();
        assert!((d.composed(3.0).unwrap().epsilon(2.0).unwrap() - 1.0).abs() < 1e-15);
        let p = TikhonovSchedule::inverse_power(0.5, 1.0).unwrap();
        assert!((p.composed(3.0).unwrap().epsilon(2.0).unwrap() - 1.0).abs() < 1e-15);
        let z = TikhonovSchedule::zero(1.0).unwrap();
        assert_eq!(z.composed(1.5).unwrap().epsilon(0.3).unwrap(), 0.0);
        assert!(matches!(d.composed(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn composed_matches_printed_coefficients() {
        for &(alpha, t) in &[(3.0, 2.0), (3.5, 17.0), (1.2, 0.4), (5.0, 1e3)] {
            let delta: f64 = 2.0;
            let d = TikhonovSchedule::delta_over_t(delta, 1.0).unwrap();
            let got = d.composed(alpha).unwrap().epsilon(t).unwrap();
            let printed = 2.0 * delta * (alpha - 1.0) / (t * t);
            assert!((got - printed).abs() <= 1e-14 * printed.abs().max(1.0));

            let r: f64 = 0.7;
            let p = TikhonovSchedule::inverse_power(r, 1.0).unwrap();
            let got = p.composed(alpha).unwrap().epsilon(t).unwrap();
            let printed = (2.0 * (alpha - 1.0)).powf(r) / t.powf(2.0 * r);
            assert!((got - printed).abs() <= 1e-13 * printed.abs().max(1.0));
        }
    }

    #[test]
    fn vanishing_families_vanish() {
        for s in all_families() {
            if matches!(
                s.family(),
                ScheduleFamily::DeltaOverT { .. } | ScheduleFamily::InversePower { .. }
            ) {
                let near = s.epsilon(s.t_ref()).unwrap();
                let far = s.epsilon(1e6 * s.t_ref()).unwrap();
                let farther = s.epsilon(1e12 * s.t_ref()).unwrap();
                assert!(far < near && farther < far && farther < 1e-2 * near);
            }
        }
    }
}
