//! Objective-function oracles and the built-in test problems.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

/// Points with a coordinate at or below `lower + DOMAIN_MARGIN` are outside
/// an open-box domain.
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// Residual target of iterative prox solves.
pub const PROX_RESIDUAL_TOL: f64 = 1e-10;

const PROX_MAX_ITER: usize = 200;

/// First- and zeroth-order information about a convex function.
///
/// Implementations only see points that already passed the domain check of
/// the owning [`ObjectiveProblem`].
pub trait Oracle: Send + Sync + fmt::Debug {
    fn capabilities(&self) -> Capabilities;

    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, _x: &Point) -> Option<Point> {
        None
    }

    fn hess_vec(&self, _x: &Point, _d: &Point) -> Option<Point> {
        None
    }

    /// `argmin_u f(u) + |u − x|² / (2λ)`, optionally warm-started.
    fn prox(&self, _lambda: f64, _x: &Point, _warm: Option<&Point>) -> Option<Result<Point>> {
        None
    }
}

/// Which optional oracles an implementation provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub gradient: bool,
    pub hess_vec: bool,
    pub prox: bool,
}

/// Oracle bundle for an objective plus whatever is known about its minimizers.
#[derive(Clone)]
pub struct ObjectiveProblem {
    name: String,
    dim: usize,
    oracle: Arc<dyn Oracle>,
    lipschitz_grad: Option<f64>,
    min_value: Option<f64>,
    min_norm_solution: Option<Point>,
    domain_lower: Option<Point>,
}

impl fmt::Debug for ObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("oracle", &self.oracle)
            .field("min_value", &self.min_value)
            .finish()
    }
}

impl ObjectiveProblem {
    pub fn new(name: impl Into<String>, dim: usize, oracle: Arc<dyn Oracle>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            oracle,
            lipschitz_grad: None,
            min_value: None,
            min_norm_solution: None,
            domain_lower: None,
        })
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_grad = Some(l);
        self
    }

    pub fn with_min_value(mut self, v: f64) -> Self {
        self.min_value = Some(v);
        self
    }

    pub fn with_min_norm_solution(mut self, x: Point) -> Self {
        self.min_norm_solution = Some(x);
        self
    }

    pub fn with_domain_lower(mut self, lower: Point) -> Self {
        self.domain_lower = Some(lower);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_grad(&self) -> Option<f64> {
        self.lipschitz_grad
    }

    pub fn min_value(&self) -> Option<f64> {
        self.min_value
    }

    pub fn min_norm_solution(&self) -> Option<&Point> {
        self.min_norm_solution.as_ref()
    }

    pub fn domain_lower(&self) -> Option<&Point> {
        self.domain_lower.as_ref()
    }

    pub fn is_smooth(&self) -> bool {
        self.oracle.capabilities().gradient
    }

    pub fn has_prox(&self) -> bool {
        self.oracle.capabilities().prox
    }

    pub fn has_hess_vec(&self) -> bool {
        self.oracle.capabilities().hess_vec
    }

    pub fn in_domain(&self, x: &Point) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.domain_lower {
            Some(lo) => x.iter().zip(lo.iter()).all(|(xi, li)| *xi > li + DOMAIN_MARGIN),
            None => true,
        }
    }

    fn check(&self, x: &Point) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "{}: point has dimension {}, expected {}",
                self.name,
                x.len(),
                self.dim
            )));
        }
        if !self.in_domain(x) {
            return Err(Error::Domain(format!(
                "{}: point {:?} outside the domain",
                self.name,
                x.as_slice()
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(self.oracle.value(x))
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.check(x)?;
        self.oracle
            .gradient(x)
            .ok_or_else(|| Error::Unsupported(format!("{} has no gradient", self.name)))
    }

    pub fn hess_vec(&self, x: &Point, d: &Point) -> Result<Point> {
        self.check(x)?;
        self.oracle.hess_vec(x, d).ok_or_else(|| {
            Error::Unsupported(format!("{} has no Hessian-vector product", self.name))
        })
    }

    pub fn prox(&self, lambda: f64, x: &Point) -> Result<Point> {
        self.prox_warm(lambda, x, None)
    }

    pub fn prox_warm(&self, lambda: f64, x: &Point, warm: Option<&Point>) -> Result<Point> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prox parameter must be positive, got {lambda}"
            )));
        }
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "{}: prox input has dimension {}, expected {}",
                self.name,
                x.len(),
                self.dim
            )));
        }
        let warm = warm.filter(|w| self.in_domain(w));
        self.oracle
            .prox(lambda, x, warm)
            .ok_or_else(|| Error::Unsupported(format!("{} has no prox", self.name)))?
    }

    /// `f(x) − min f` when the minimum is known.
    pub fn value_gap(&self, x: &Point) -> Result<Option<f64>> {
        let v = self.value(x)?;
        Ok(self.min_value.map(|m| v - m))
    }
}

/// `½(⟨a, x⟩ − c)²`; `f₂` is the instance `a = (1, 1)`, `c = 1`.
#[derive(Debug, Clone)]
pub struct AffineLeastSquares {
    a: Point,
    c: f64,
}

impl AffineLeastSquares {
    fn residual(&self, x: &Point) -> f64 {
        self.a.dot(x) - self.c
    }
}

impl Oracle for AffineLeastSquares {
    fn capabilities(&self) -> Capabilities {
        Capabilities { gradient: true, hess_vec: true, prox: true }
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * self.residual(x).powi(2)
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        Some(&self.a * self.residual(x))
    }

    fn hess_vec(&self, _x: &Point, d: &Point) -> Option<Point> {
        Some(&self.a * self.a.dot(d))
    }

    fn prox(&self, lambda: f64, x: &Point, _warm: Option<&Point>) -> Option<Result<Point>> {
        let shrink = self.residual(x) / (1.0 + lambda * self.a.norm_squared());
        Some(Ok(x - &self.a * (lambda * shrink)))
    }
}

/// `½⟨A x, x⟩ − ⟨b, x⟩` with `A` diagonal and positive semidefinite.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    diag: Point,
    b: Point,
}

impl Oracle for DiagonalQuadratic {
    fn capabilities(&self) -> Capabilities {
        Capabilities { gradient: true, hess_vec: true, prox: true }
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * self.diag.component_mul(x).dot(x) - self.b.dot(x)
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        Some(self.diag.component_mul(x) - &self.b)
    }

    fn hess_vec(&self, _x: &Point, d: &Point) -> Option<Point> {
        Some(self.diag.component_mul(d))
    }

    fn prox(&self, lambda: f64, x: &Point, _warm: Option<&Point>) -> Option<Result<Point>> {
        Some(Ok(Point::from_fn(x.len(), |i, _| {
            (x[i] + lambda * self.b[i]) / (1.0 + lambda * self.diag[i])
        })))
    }
}

/// `|⟨a, x⟩ − c|`: nonsmooth, exposes value and prox only.
#[derive(Debug, Clone)]
pub struct AbsAffine {
    a: Point,
    c: f64,
}

impl Oracle for AbsAffine {
    fn capabilities(&self) -> Capabilities {
        Capabilities { gradient: false, hess_vec: false, prox: true }
    }

    fn value(&self, x: &Point) -> f64 {
        (self.a.dot(x) - self.c).abs()
    }

    fn prox(&self, lambda: f64, x: &Point, _warm: Option<&Point>) -> Option<Result<Point>> {
        let na2 = self.a.norm_squared();
        let s = ((self.a.dot(x) - self.c) / (lambda * na2)).clamp(-1.0, 1.0);
        Some(Ok(x - &self.a * (lambda * s)))
    }
}

/// `f₁(x, y) = ln(1 + e^{−(x+y)}) + (x − y)² + y` on `(−1, ∞)²`.
#[derive(Debug, Clone, Copy)]
pub struct SoftplusCoupled;

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl SoftplusCoupled {
    fn hessian(x: &Point) -> DMatrix<f64> {
        let s = sigmoid(-(x[0] + x[1]));
        let w = s * (1.0 - s);
        DMatrix::from_row_slice(2, 2, &[w + 2.0, w - 2.0, w - 2.0, w + 2.0])
    }

    fn grad(x: &Point) -> Point {
        let s = sigmoid(-(x[0] + x[1]));
        let d = 2.0 * (x[0] - x[1]);
        Point::from_vec(vec![-s + d, -s - d + 1.0])
    }

    fn in_open_domain(u: &Point) -> bool {
        u.iter().all(|v| *v > -1.0 + DOMAIN_MARGIN && v.is_finite())
    }

    /// Damped Newton on the strongly convex prox subproblem.
    fn newton_prox(lambda: f64, x: &Point, warm: Option<&Point>) -> Result<Point> {
        let inv = 1.0 / lambda;
        let objective = |u: &Point| Self::value_at(u) + 0.5 * inv * (u - x).norm_squared();
        let mut u = match warm {
            Some(w) => w.clone(),
            None if Self::in_open_domain(x) => x.clone(),
            None => x.map(|v| v.max(0.0)),
        };
        for _ in 0..PROX_MAX_ITER {
            let g = Self::grad(&u) + (&u - x) * inv;
            if g.norm() <= PROX_RESIDUAL_TOL {
                return Ok(u);
            }
            let h = Self::hessian(&u) + DMatrix::identity(2, 2) * inv;
            let step = h
                .cholesky()
                .ok_or_else(|| Error::Convergence("prox Hessian not positive definite".into()))?
                .solve(&g);
            let f0 = objective(&u);
            let slope = g.dot(&step);
            if slope <= 1e3 * f64::EPSILON * (1.0 + f0.abs()) {
                // Decrease is below round-off in f0; the line search cannot see it.
                let cand = &u - &step;
                if Self::in_open_domain(&cand) {
                    u = cand;
                    continue;
                }
            }
            let mut t = 1.0;
            loop {
                let cand = &u - &step * t;
                if Self::in_open_domain(&cand) && objective(&cand) <= f0 - 1e-4 * t * slope {
                    u = cand;
                    break;
                }
                t *= 0.5;
                if t < 1e-14 {
                    // Round-off floor: accept the full Newton step if it stays feasible.
                    let cand = &u - &step;
                    if Self::in_open_domain(&cand) {
                        u = cand;
                    }
                    break;
                }
            }
        }
        let g = Self::grad(&u) + (&u - x) * inv;
        if g.norm() <= PROX_RESIDUAL_TOL {
            Ok(u)
        } else {
            Err(Error::Convergence(format!(
                "f1 prox: residual {:.3e} after {PROX_MAX_ITER} Newton steps",
                g.norm()
            )))
        }
    }

    fn value_at(x: &Point) -> f64 {
        softplus(-(x[0] + x[1])) + (x[0] - x[1]).powi(2) + x[1]
    }
}

impl Oracle for SoftplusCoupled {
    fn capabilities(&self) -> Capabilities {
        Capabilities { gradient: true, hess_vec: true, prox: true }
    }

    fn value(&self, x: &Point) -> f64 {
        Self::value_at(x)
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        Some(Self::grad(x))
    }

    fn hess_vec(&self, x: &Point, d: &Point) -> Option<Point> {
        Some(Self::hessian(x) * d)
    }

    fn prox(&self, lambda: f64, x: &Point, warm: Option<&Point>) -> Option<Result<Point>> {
        Some(Self::newton_prox(lambda, x, warm))
    }
}

/// Named constructors for the built-in problems.
pub mod catalog {
    use super::*;

    /// `f₁`, strictly convex on `(−1, ∞)²` with unique minimizer `(1/8, −1/8)`.
    pub fn f1() -> ObjectiveProblem {
        let xstar = Point::from_vec(vec![0.125, -0.125]);
        let min = SoftplusCoupled::value_at(&xstar);
        // Hessian ≤ ¼·11ᵀ + 2·(1,−1)(1,−1)ᵀ, whose eigenvalues are ½ and 4.
        ObjectiveProblem::new("f1", 2, Arc::new(SoftplusCoupled))
            .expect("dimension is positive")
            .with_lipschitz(4.0)
            .with_min_value(min)
            .with_min_norm_solution(xstar)
            .with_domain_lower(Point::from_element(2, -1.0))
    }

    /// `f₂(x) = ½(x₁ + x₂ − 1)²`, argmin is the line `x₁ + x₂ = 1`.
    pub fn f2() -> ObjectiveProblem {
        affine_least_squares(Point::from_vec(vec![1.0, 1.0]), 1.0)
            .expect("valid f2 data")
            .renamed("f2")
    }

    /// `½(⟨a, x⟩ − c)²`.
    pub fn affine_least_squares(a: Point, c: f64) -> Result<ObjectiveProblem> {
        let na2 = a.norm_squared();
        if na2 == 0.0 || !na2.is_finite() {
            return Err(Error::InvalidParameter("a must be a nonzero vector".into()));
        }
        let xstar = &a * (c / na2);
        Ok(
            ObjectiveProblem::new("affine_least_squares", a.len(), Arc::new(AffineLeastSquares { a, c }))?
                .with_lipschitz(na2)
                .with_min_value(0.0)
                .with_min_norm_solution(xstar),
        )
    }

    /// `½⟨diag(A) x, x⟩ − ⟨b, x⟩`; requires `b_i = 0` wherever `A_i = 0`.
    pub fn quadratic(diag: Point, b: Point) -> Result<ObjectiveProblem> {
        if diag.len() != b.len() || diag.is_empty() {
            return Err(Error::InvalidParameter(
                "A_diag and b must have the same positive length".into(),
            ));
        }
        if diag.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(
                "A_diag must be finite and nonnegative".into(),
            ));
        }
        if diag.iter().zip(b.iter()).any(|(a, bi)| *a == 0.0 && *bi != 0.0) {
            return Err(Error::InvalidParameter(
                "quadratic is unbounded below: b has a component in the kernel of A".into(),
            ));
        }
        let xstar = Point::from_fn(diag.len(), |i, _| {
            if diag[i] > 0.0 {
                b[i] / diag[i]
            } else {
                0.0
            }
        });
        let min = -0.5 * xstar.dot(&b);
        let lip = diag.max();
        let mut p = ObjectiveProblem::new("quadratic", diag.len(), Arc::new(DiagonalQuadratic { diag, b }))?
            .with_min_value(min)
            .with_min_norm_solution(xstar);
        if lip > 0.0 {
            p = p.with_lipschitz(lip);
        }
        Ok(p)
    }

    /// `½|x|²` in dimension `dim`.
    pub fn half_norm_squared(dim: usize) -> ObjectiveProblem {
        quadratic(Point::from_element(dim, 1.0), Point::zeros(dim)).expect("valid quadratic")
    }

    /// `|⟨a, x⟩ − c|`, minimum-norm solution `(c/|a|²)·a`.
    pub fn abs_affine(a: Point, c: f64) -> Result<ObjectiveProblem> {
        let na2 = a.norm_squared();
        if na2 == 0.0 || !na2.is_finite() {
            return Err(Error::InvalidParameter("a must be a nonzero vector".into()));
        }
        let xstar = &a * (c / na2);
        Ok(ObjectiveProblem::new("abs_affine", a.len(), Arc::new(AbsAffine { a, c }))?
            .with_min_value(0.0)
            .with_min_norm_solution(xstar))
    }
}

impl ObjectiveProblem {
    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    #[test]
    fn f2_values() {
        let f = f2();
        assert_eq!(f.value(&p(&[0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(f.value(&p(&[0.0, 0.0])).unwrap(), 0.5);
        assert_eq!(f.gradient(&p(&[0.0, 0.0])).unwrap(), p(&[-1.0, -1.0]));
        assert_eq!(f.gradient(&p(&[0.5, 0.5])).unwrap(), p(&[0.0, 0.0]));
        assert_eq!(f.min_norm_solution().unwrap(), &p(&[0.5, 0.5]));
        assert_eq!(f.min_value(), Some(0.0));
    }

    #[test]
    fn zero_quadratic_at_origin() {
        let q = half_norm_squared(3);
        assert_eq!(q.value(&Point::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn f1_is_stationary_at_its_minimizer() {
        let f = f1();
        let xs = f.min_norm_solution().unwrap().clone();
        assert!(f.gradient(&xs).unwrap().norm() <= 1e-12);
        assert_eq!(f.min_value().unwrap(), f.value(&xs).unwrap());
    }

    #[test]
    fn f1_rejects_points_outside_open_domain() {
        let f = f1();
        assert!(matches!(f.value(&p(&[-1.0, 0.0])), Err(Error::Domain(_))));
        assert!(matches!(f.value(&p(&[0.0, -2.0])), Err(Error::Domain(_))));
        assert!(matches!(f.gradient(&p(&[-1.0 + 1e-10, 0.0])), Err(Error::Domain(_))));
        assert!(f.value(&p(&[-0.999, 0.0])).is_ok());
    }

    #[test]
    fn abs_prox_examples() {
        let f = abs_affine(p(&[1.0]), 0.0).unwrap();
        assert_eq!(f.prox(1.0, &p(&[0.0])).unwrap(), p(&[0.0]));
        assert!((f.prox(1.0, &p(&[3.0])).unwrap()[0] - 2.0).abs() < 1e-15);
        // grid oracle for u ↦ |u| + ½(u − 3)²
        let best = (0..=600_000)
            .map(|k| -1.0 + k as f64 * 1e-5)
            .min_by(|a, b| {
                let fa = a.abs() + 0.5 * (a - 3.0) * (a - 3.0);
                let fb = b.abs() + 0.5 * (b - 3.0) * (b - 3.0);
                fa.partial_cmp(&fb).unwrap()
            })
            .unwrap();
        assert!((best - 2.0).abs() < 1e-4);
    }

    #[test]
    fn f2_prox_example_matches_dense_solve() {
        let f = f2();
        let u = f.prox(1.0, &p(&[0.0, 0.0])).unwrap();
        // (A + I/λ) u = b + x/λ with A = 11ᵀ, b = 1
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let rhs = p(&[1.0, 1.0]);
        let dense = a.lu().solve(&rhs).unwrap();
        assert!((&u - &dense).norm() < 1e-14);
        assert!((u[0] - 1.0 / 3.0).abs() < 1e-15 && (u[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nonsmooth_problem_has_no_gradient() {
        let f = abs_affine(p(&[1.0, 1.0]), 1.0).unwrap();
        assert!(!f.is_smooth());
        assert!(f.has_prox());
        assert!(matches!(f.gradient(&p(&[0.0, 0.0])), Err(Error::Unsupported(_))));
        assert_eq!(f.min_norm_solution().unwrap(), &p(&[0.5, 0.5]));
    }

    #[test]
    fn capability_probes() {
        assert!(f1().is_smooth() && f1().has_prox() && f1().has_hess_vec());
        assert!(f2().is_smooth() && f2().has_hess_vec());
    }

    #[test]
    fn unbounded_quadratic_is_rejected() {
        assert!(quadratic(p(&[1.0, 0.0]), p(&[0.0, 1.0])).is_err());
        assert!(quadratic(p(&[1.0, -1.0]), p(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn f1_prox_with_large_lambda_still_converges() {
        let f = f1();
        let u = f.prox(1e4, &Point::zeros(2)).unwrap();
        let res = f.gradient(&u).unwrap() + &u * 1e-4;
        assert!(res.norm() < 1e-9);
    }

    #[test]
    fn f1_prox_finishes_below_line_search_resolution() {
        let f = f1();
        let x = p(&[-0.15200938262588037, 1.1660965142296247]);
        let lambda = 5.298908990115228;
        let u = f.prox(lambda, &x).unwrap();
        let res = &u - &x + f.gradient(&u).unwrap() * lambda;
        assert!(res.norm() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_invalid() {
        assert!(matches!(f2().value(&Point::zeros(3)), Err(Error::InvalidParameter(_))));
    }
}
