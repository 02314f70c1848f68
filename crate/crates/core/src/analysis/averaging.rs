//! Averaging `x(t) = (t₀/t)^{α−1} x₀ + ((α−1)/t^{α−1}) ∫_{t₀}^t θ^{α−2} v(θ) dθ`
//! of a sampled first-order path `v`.
//!
//! Both the averaged path and the Jensen gap are evaluated on the cubic
//! Hermite interpolant of `v` with 4-point Gauss–Legendre nodes per sample
//! interval, so the discrete measure is a genuine probability measure.

use crate::dynamics::{DynamicsKind, State};
use crate::error::{Error, Result};
use crate::integrators::{diagnose, hermite, TrajectoryRecord};
use crate::problems::{ObjectiveProblem, Point};

pub const MASS_TOL: f64 = 1e-10;
/// Largest ratio `t_{k+1}/t_k` accepted between consecutive samples.
pub const MAX_SAMPLE_RATIO: f64 = 1.5;

const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Quadrature nodes of `θ^{α−2} dθ` on each sample interval, with `v` interpolated there.
struct Nodes {
    /// `(weight, v(θ))` per sample interval.
    intervals: Vec<Vec<(f64, Point)>>,
}

fn build_nodes(v_record: &TrajectoryRecord, alpha: f64) -> Result<Nodes> {
    let times = &v_record.times;
    if times.len() < 2 {
        return Err(Error::InsufficientSamples("averaging needs at least two samples".into()));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] / w[0] > MAX_SAMPLE_RATIO) {
        return Err(Error::InsufficientSamples(format!(
            "sample gap [{}, {}] is too wide for the averaging quadrature",
            w[0], w[1]
        )));
    }
    let vs: Vec<&Point> = v_record.states.iter().map(|s| &s.position).collect();
    let rates = v_record.position_rates.as_ref();
    let mut intervals = Vec::with_capacity(times.len() - 1);
    for k in 0..times.len() - 1 {
        let (a, b) = (times[k], times[k + 1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let nodes = GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(&z, w)| {
                let th = mid + half * z;
                let v = match rates {
                    Some(r) => hermite(a, b - a, vs[k], &r[k], vs[k + 1], &r[k + 1], th),
                    None => vs[k] + (vs[k + 1] - vs[k]) * ((th - a) / (b - a)),
                };
                (w * half * th.powf(alpha - 2.0), v)
            })
            .collect();
        intervals.push(nodes);
    }
    Ok(Nodes { intervals })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("averaging needs alpha > 1, got {alpha}")))
    }
}

/// Running weights of the measure `μ_t`: the point mass on `x₀` and the
/// running integral of `θ^{α−2}`, checked for unit mass at each sample.
fn masses(times: &[f64], nodes: &Nodes, alpha: f64) -> Result<Vec<(f64, f64, f64)>> {
    let t0 = times[0];
    let mut m = 0.0;
    let mut out = vec![(1.0, 0.0, 1.0)];
    for (k, iv) in nodes.intervals.iter().enumerate() {
        m += iv.iter().map(|(w, _)| w).sum::<f64>();
        let t = times[k + 1];
        let scale = (alpha - 1.0) / t.powf(alpha - 1.0);
        let point = (t0 / t).powf(alpha - 1.0);
        let mass = point + scale * m;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InsufficientSamples(format!(
                "averaging measure has mass {mass} at t = {t}"
            )));
        }
        out.push((point, scale, mass));
    }
    Ok(out)
}

/// Averaged path of `v_record` starting from `x0` (default `v(t₀)`).
pub fn average_trajectory(
    v_record: &TrajectoryRecord,
    p: &ObjectiveProblem,
    alpha: f64,
    x0: Option<&Point>,
) -> Result<TrajectoryRecord> {
    check_alpha(alpha)?;
    let nodes = build_nodes(v_record, alpha)?;
    let times = &v_record.times;
    let w = masses(times, &nodes, alpha)?;
    let x0 = x0.cloned().unwrap_or_else(|| v_record.states[0].position.clone());
    let mut acc = Point::zeros(x0.len());
    let mut xs = vec![x0.clone()];
    for (k, iv) in nodes.intervals.iter().enumerate() {
        for (wt, v) in iv {
            acc.axpy(*wt, v, 1.0);
        }
        let (point, scale, mass) = w[k + 1];
        xs.push((&x0 * point + &acc * scale) / mass);
    }
    let states: Vec<State> = times
        .iter()
        .zip(xs)
        .zip(&v_record.states)
        .map(|((&t, x), vs)| {
            let v = vs.position.clone();
            State {
                velocity: Some((&v - &x) * ((alpha - 1.0) / t)),
                position: x,
                companion: Some(v),
            }
        })
        .collect();
    let rates = states.iter().map(|s| s.velocity.clone().expect("set above")).collect();
    let eps: Vec<f64> = v_record.diagnostics.iter().map(|d| d.eps_value).collect();
    let (diagnostics, gap_reference) = diagnose(p, times, &states, &eps)?;
    Ok(TrajectoryRecord {
        kind: DynamicsKind::InertialImplicitHessian,
        method: v_record.method,
        times: times.clone(),
        states,
        position_rates: Some(rates),
        diagnostics,
        gap_reference,
        stats: v_record.stats,
    })
}

/// `∫ (f∘v − min f) dμ_t − (f(x(t)) − min f)` at every sample, where the
/// point mass of `μ_t` sits on `x₀` (default `v(t₀)`).
pub fn jensen_gap(
    v_record: &TrajectoryRecord,
    p: &ObjectiveProblem,
    alpha: f64,
    x0: Option<&Point>,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let nodes = build_nodes(v_record, alpha)?;
    let times = &v_record.times;
    let w = masses(times, &nodes, alpha)?;
    let x0 = x0.cloned().unwrap_or_else(|| v_record.states[0].position.clone());
    let reference = p.min_value().unwrap_or(0.0);
    let f_x0 = p.value(&x0)? - reference;
    let mut acc = Point::zeros(x0.len());
    let mut f_acc = 0.0;
    let mut gaps = vec![0.0];
    for (k, iv) in nodes.intervals.iter().enumerate() {
        for (wt, v) in iv {
            acc.axpy(*wt, v, 1.0);
            f_acc += wt * (p.value(v)? - reference);
        }
        let (point, scale, mass) = w[k + 1];
        let x = (&x0 * point + &acc * scale) / mass;
        let mean_f = (f_x0 * point + f_acc * scale) / mass;
        gaps.push(mean_f - (p.value(&x)? - reference));
    }
    Ok(gaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{log_grid, Diagnostics, GapReference, Method, StepStats};
    use crate::problems::catalog;

    fn synthetic(times: Vec<f64>, path: impl Fn(f64) -> (Point, Point)) -> TrajectoryRecord {
        let (states, rates): (Vec<State>, Vec<Point>) = times
            .iter()
            .map(|&t| {
                let (v, vd) = path(t);
                (State { position: v, velocity: None, companion: None }, vd)
            })
            .unzip();
        let diagnostics = vec![
            Diagnostics { f_gap: 0.0, grad_norm: None, dist_to_min_norm: None, eps_value: 0.0, energy: None };
            times.len()
        ];
        TrajectoryRecord {
            kind: DynamicsKind::RescaledFirstOrder,
            method: Method::AdaptiveRk,
            times,
            states,
            position_rates: Some(rates),
            diagnostics,
            gap_reference: GapReference::KnownMinimum(0.0),
            stats: StepStats::default(),
        }
    }

    #[test]
    fn constant_path_is_reproduced() {
        let c = Point::from_vec(vec![0.3, -2.0]);
        let rec = synthetic(log_grid(1.0, 1e3, 50).unwrap(), |_| (c.clone(), Point::zeros(2)));
        let x = average_trajectory(&rec, &catalog::f2(), 3.0, None).unwrap();
        for s in &x.states {
            assert!((&s.position - &c).norm() < 1e-12);
        }
        let gaps = jensen_gap(&rec, &catalog::f2(), 3.0, None).unwrap();
        assert!(gaps.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn linear_path_alpha_three() {
        // v(θ) = θ from t₀: x(t) = (t₀/t)²t₀ + (2/3)(t³ − t₀³)/t².
        let t0 = 1e-3;
        let rec = synthetic(log_grid(t0, 10.0, 100).unwrap(), |t| {
            (Point::from_element(1, t), Point::from_element(1, 1.0))
        });
        let x = average_trajectory(&rec, &catalog::half_norm_squared(1), 3.0, None).unwrap();
        for (t, s) in x.times.iter().zip(&x.states) {
            let exact = (t0 / t).powi(2) * t0 + 2.0 / 3.0 * (t.powi(3) - t0.powi(3)) / (t * t);
            assert!((s.position[0] - exact).abs() <= 1e-12 * (1.0 + exact));
        }
        let last = x.states.last().unwrap().position[0];
        assert!((last - 20.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn alpha_two_matches_trapezoid() {
        let path = |t: f64| (Point::from_element(1, t.sin()), Point::from_element(1, t.cos()));
        let times = log_grid(1.0, 10.0, 400).unwrap();
        let rec = synthetic(times.clone(), path);
        let x = average_trajectory(&rec, &catalog::half_norm_squared(1), 2.0, None).unwrap();
        let n = 200_000;
        let h = 9.0 / n as f64;
        let trap: f64 = (0..n)
            .map(|i| 0.5 * h * ((1.0 + i as f64 * h).sin() + (1.0 + (i + 1) as f64 * h).sin()))
            .sum();
        let exact = (1.0f64.sin() + trap) / 10.0;
        let got = x.states.last().unwrap().position[0];
        assert!((got - exact).abs() < 2e-9, "{got} {exact}");
    }

    #[test]
    fn affine_jensen_gap_vanishes_and_convex_is_nonnegative() {
        let rec = synthetic(log_grid(1.0, 100.0, 100).unwrap(), |t| {
            (Point::from_vec(vec![t.ln(), 1.0 / t]), Point::from_vec(vec![1.0 / t, -1.0 / (t * t)]))
        });
        let q = catalog::quadratic(Point::from_vec(vec![0.0, 0.0]), Point::from_vec(vec![0.0, 0.0])).unwrap();
        assert!(jensen_gap(&rec, &q, 3.0, None).unwrap().iter().all(|g| g.abs() < 1e-12));
        assert!(jensen_gap(&rec, &catalog::f2(), 3.0, None).unwrap().iter().all(|g| *g >= -1e-8));
    }

    #[test]
    fn sparse_grid_is_rejected() {
        let rec = synthetic(vec![1.0, 10.0, 100.0], |_| (Point::zeros(1), Point::zeros(1)));
        assert!(matches!(
            average_trajectory(&rec, &catalog::half_norm_squared(1), 3.0, None),
            Err(Error::InsufficientSamples(_))
        ));
    }
}
