//! The viscosity curve `ε ↦ x_ε = argmin f + (ε/2)‖·‖²`.

use crate::error::{Error, Result};
use crate::problems::{ObjectiveProblem, Point};

pub const VISCOSITY_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityPoint {
    pub eps: f64,
    pub point: Point,
    /// `‖∇f(x_ε) + ε x_ε‖` for smooth problems, else `‖x_ε − prox_f((1−ε)x_ε)‖`.
    pub residual: f64,
}

pub fn viscosity_point(p: &ObjectiveProblem, eps: f64) -> Result<ViscosityPoint> {
    viscosity_point_warm(p, eps, None)
}

/// `x_ε = prox_{f/ε}(0)`, warm-started from `warm`.
pub fn viscosity_point_warm(p: &ObjectiveProblem, eps: f64, warm: Option<&Point>) -> Result<ViscosityPoint> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !p.has_prox() {
        return Err(Error::Unsupported(format!("{} has no prox", p.name())));
    }
    let origin = Point::zeros(p.dim());
    let point = p.prox_warm(1.0 / eps, &origin, warm)?;
    let residual = if p.is_smooth() {
        (p.gradient(&point)? + &point * eps).norm()
    } else {
        (&point - p.prox_warm(1.0, &(&point * (1.0 - eps)), Some(&point))?).norm()
    };
    if !(residual <= VISCOSITY_RESIDUAL_TOL) {
        return Err(Error::Convergence(format!(
            "viscosity point of {} at eps = {eps} has residual {residual:e}",
            p.name()
        )));
    }
    Ok(ViscosityPoint { eps, point, residual })
}

/// Viscosity points along `eps_grid`, each row warm-started from the previous one.
pub fn viscosity_curve(p: &ObjectiveProblem, eps_grid: &[f64]) -> Vec<Result<ViscosityPoint>> {
    let mut warm: Option<Point> = None;
    eps_grid
        .iter()
        .map(|&eps| {
            let r = viscosity_point_warm(p, eps, warm.as_ref());
            if let Ok(vp) = &r {
                warm = Some(vp.point.clone());
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::catalog;
    use nalgebra::DMatrix;

    #[test]
    fn f2_closed_form_and_dense_solve() {
        let f2 = catalog::f2();
        for eps in [1e-3, 0.1, 2.0, 10.0] {
            let vp = viscosity_point(&f2, eps).unwrap();
            let c = 1.0 / (2.0 + eps);
            assert!((vp.point[0] - c).abs() < 1e-12 && (vp.point[1] - c).abs() < 1e-12);
            let m = DMatrix::from_element(2, 2, 1.0) + DMatrix::identity(2, 2) * eps;
            let dense = m.lu().solve(&Point::from_element(2, 1.0)).unwrap();
            assert!((vp.point - dense).norm() < 1e-12);
        }
        let tiny = viscosity_point(&f2, 1e-9).unwrap();
        assert!((tiny.point - Point::from_element(2, 0.5)).norm() < 1e-8);
    }

    #[test]
    fn half_norm_squared_stays_at_origin() {
        let p = catalog::half_norm_squared(3);
        for eps in [1e-4, 1.0, 7.0] {
            assert_eq!(viscosity_point(&p, eps).unwrap().point.norm(), 0.0);
        }
    }

    #[test]
    fn nonsmooth_points_are_fixed_points() {
        let p = catalog::abs_affine(Point::from_vec(vec![1.0, 1.0]), 1.0).unwrap();
        for eps in [1e-3, 0.5, 1.9] {
            let vp = viscosity_point(&p, eps).unwrap();
            assert!((vp.point.clone() - Point::from_element(2, 0.5)).norm() < 1e-12, "{eps}");
        }
        let vp = viscosity_point(&p, 4.0).unwrap();
        assert!((vp.point[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn f1_bound_and_warm_curve() {
        let f1 = catalog::f1();
        let xs = f1.min_norm_solution().unwrap().norm();
        let grid: Vec<f64> = (0..=20).map(|i| 10f64.powf(1.0 - 0.25 * i as f64)).collect();
        for vp in viscosity_curve(&f1, &grid) {
            let vp = vp.unwrap();
            assert!(vp.point.norm() <= xs + 1e-8);
        }
    }

    #[test]
    fn rejects_nonpositive_eps() {
        assert!(viscosity_point(&catalog::f2(), 0.0).is_err());
    }
}
