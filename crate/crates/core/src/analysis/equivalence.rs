//! Three-way comparison of the implicit-Hessian system, the coupled `(v, x)`
//! system and the averaged rescaled first-order flow.

use super::averaging::average_trajectory;
use crate::dynamics::{DynamicsKind, DynamicsSpec};
use crate::error::{Error, Result};
use crate::integrators::{integrate, IntegratorConfig, TrajectoryRecord};

pub const EQUIVALENCE_FACTOR: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub second_order: TrajectoryRecord,
    pub coupled: TrajectoryRecord,
    pub averaged: TrajectoryRecord,
    /// Largest pairwise sup-norm gap over all samples.
    pub max_discrepancy: f64,
    /// Time of the largest gap.
    pub worst_time: f64,
    /// First sample where the gap exceeds `50·rel_tol·(1 + ‖x‖)`.
    pub first_divergence: Option<f64>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.first_divergence.is_none()
    }
}

fn ensure(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("equivalence check: {msg}")))
    }
}

/// `second` must be `InertialImplicitHessian` with velocity `ẋ(t₀)`;
/// `coupled` must be `CoupledVX` with the same data.
pub fn equivalence_check(
    second: &DynamicsSpec,
    coupled: &DynamicsSpec,
    cfg: &IntegratorConfig,
) -> Result<EquivalenceReport> {
    ensure(second.kind() == DynamicsKind::InertialImplicitHessian, "first spec must be implicit-Hessian")?;
    ensure(coupled.kind() == DynamicsKind::CoupledVX, "second spec must be coupled_vx")?;
    ensure(second.problem().name() == coupled.problem().name(), "problems differ")?;
    ensure(second.alpha() == coupled.alpha(), "alpha differs")?;
    ensure(second.schedule() == coupled.schedule(), "schedules differ")?;
    ensure(second.x0() == coupled.x0(), "x0 differs")?;
    ensure(second.t0() == coupled.t0(), "t0 differs")?;
    ensure(
        (second.initial_companion() - coupled.initial_companion()).amax() == 0.0,
        "initial velocities differ",
    )?;
    let alpha = second.alpha();
    let rescaled = DynamicsSpec::builder(DynamicsKind::RescaledFirstOrder, second.problem().clone())
        .schedule(*second.schedule())
        .alpha(alpha)
        .t0(second.t0())
        .x0(second.initial_companion())
        .build()?;

    let rec_second = integrate(second, cfg)?;
    let rec_coupled = integrate(coupled, cfg)?;
    let rec_v = integrate(&rescaled, cfg)?;
    let rec_avg = average_trajectory(&rec_v, second.problem(), alpha, Some(second.x0()))?;

    let mut max_discrepancy = 0.0;
    let mut worst_time = rec_second.times[0];
    let mut first_divergence = None;
    for (i, &t) in rec_second.times.iter().enumerate() {
        let a = &rec_second.states[i].position;
        let b = &rec_coupled.states[i].position;
        let c = &rec_avg.states[i].position;
        let gap = (a - b).amax().max((a - c).amax()).max((b - c).amax());
        if gap > max_discrepancy {
            max_discrepancy = gap;
            worst_time = t;
        }
        let tol = EQUIVALENCE_FACTOR * cfg.rel_tol * (1.0 + a.norm());
        if first_divergence.is_none() && gap > tol {
            first_divergence = Some(t);
        }
    }
    Ok(EquivalenceReport {
        second_order: rec_second,
        coupled: rec_coupled,
        averaged: rec_avg,
        max_discrepancy,
        worst_time,
        first_divergence,
    })
}
