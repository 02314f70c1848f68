//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # Example 2
//! problem.name = f2
//! schedule.family = delta_over_t
//! schedule.delta = 2
//! dynamics.kind = inertial_implicit_hessian
//! dynamics.alpha = 3.5
//! dynamics.x0 = 0, 0
//! integrator.t_end = 1000
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dynamics::{DynamicsKind, DynamicsSpec};
use crate::error::{Error, Result};
use crate::integrators::{log_grid, IntegratorConfig, Method, DEFAULT_SAMPLES_PER_DECADE};
use crate::problems::{catalog, ObjectiveProblem, Point};
use crate::schedules::{ScheduleFamily, TikhonovSchedule};

pub const KNOWN_KEYS: &[&str] = &[
    "problem.name",
    "problem.A_diag",
    "problem.b",
    "problem.a",
    "problem.c",
    "problem.dim",
    "schedule.family",
    "schedule.delta",
    "schedule.r",
    "schedule.c",
    "schedule.t_ref",
    "dynamics.kind",
    "dynamics.alpha",
    "dynamics.beta",
    "dynamics.delta_visc",
    "dynamics.t0",
    "dynamics.x0",
    "dynamics.v0",
    "integrator.method",
    "integrator.rel_tol",
    "integrator.abs_tol",
    "integrator.t_end",
    "integrator.samples",
    "integrator.step",
    "integrator.max_steps",
    "output.path",
    "seed",
];

/// Unvalidated key/value pairs, kept so sweeps can rebuild variants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn config_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(i + 1, format!("expected `key = value`, got `{line}`")))?;
            raw.set(k.trim(), v.trim()).map_err(|e| config_err(i + 1, e))?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| parse_real(key, v)).transpose()
    }

    fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    fn point(&self, key: &str) -> Result<Option<Point>> {
        self.get(key).map(|v| parse_point(key, v)).transpose()
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn integer(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("`{key}` must be a nonnegative integer, got `{v}`")))
            })
            .transpose()
    }

    pub fn build(&self) -> Result<RunConfig> {
        let problem = self.build_problem()?;
        let t0 = self.real_or("dynamics.t0", 1.0)?;
        let schedule = self.build_schedule(t0)?;
        let kind = DynamicsKind::parse(self.require("dynamics.kind")?)?;
        let seed = self.integer("seed")?.unwrap_or(0);
        let x0 = match self.get("dynamics.x0") {
            Some("random") => random_start(&problem, seed),
            Some(v) => parse_point("dynamics.x0", v)?,
            None => Point::zeros(problem.dim()),
        };
        let mut b = DynamicsSpec::builder(kind, problem.clone())
            .schedule(schedule)
            .t0(t0)
            .x0(x0)
            .v0(self.point("dynamics.v0")?);
        if let Some(a) = self.real("dynamics.alpha")? {
            b = b.alpha(a);
        }
        if let Some(v) = self.real("dynamics.beta")? {
            b = b.beta(v);
        }
        if let Some(v) = self.real("dynamics.delta_visc")? {
            b = b.delta_visc(v);
        }
        let dynamics = b.build()?;
        let integrator = self.build_integrator(kind, t0)?;
        Ok(RunConfig {
            problem,
            schedule,
            dynamics,
            integrator,
            output_path: self.get("output.path").map(PathBuf::from),
            seed,
            raw: self.clone(),
        })
    }

    /// Builds only the `problem` section.
    pub fn build_problem(&self) -> Result<ObjectiveProblem> {
        let name = self.require("problem.name")?;
        let need = |k: &str| {
            self.point(k)?
                .ok_or_else(|| Error::Config(format!("problem `{name}` needs `{k}`")))
        };
        let allowed: &[&str] = match name {
            "f1" | "f2" => &[],
            "quadratic" => &["problem.A_diag", "problem.b"],
            "abs_affine" | "affine_least_squares" => &["problem.a", "problem.c"],
            "half_norm_squared" => &["problem.dim"],
            _ => return Err(Error::Config(format!("unknown problem `{name}`"))),
        };
        for (k, _) in self.entries() {
            if k.starts_with("problem.") && k != "problem.name" && !allowed.contains(&k) {
                return Err(Error::Config(format!("`{k}` does not apply to problem `{name}`")));
            }
        }
        match name {
            "f1" => Ok(catalog::f1()),
            "f2" => Ok(catalog::f2()),
            "quadratic" => catalog::quadratic(need("problem.A_diag")?, need("problem.b")?),
            "abs_affine" | "affine_least_squares" => {
                let a = need("problem.a")?;
                let c = self.real_or("problem.c", 0.0)?;
                if name == "abs_affine" {
                    catalog::abs_affine(a, c)
                } else {
                    catalog::affine_least_squares(a, c)
                }
            }
            _ => {
                let dim = self.integer("problem.dim")?.unwrap_or(2) as usize;
                if dim == 0 {
                    return Err(Error::Config("`problem.dim` must be positive".into()));
                }
                Ok(catalog::half_norm_squared(dim))
            }
        }
    }

    fn build_schedule(&self, t0: f64) -> Result<TikhonovSchedule> {
        let family = self.get("schedule.family").unwrap_or("zero");
        let param = match family {
            "delta_over_t" => Some("schedule.delta"),
            "inverse_power" => Some("schedule.r"),
            "constant" => Some("schedule.c"),
            "zero" => None,
            _ => return Err(Error::Config(format!("unknown schedule family `{family}`"))),
        };
        for k in ["schedule.delta", "schedule.r", "schedule.c"] {
            if self.get(k).is_some() && Some(k) != param {
                return Err(Error::Config(format!("`{k}` does not apply to schedule `{family}`")));
            }
        }
        let value = |k: &str| {
            self.real(k)?
                .ok_or_else(|| Error::Config(format!("schedule `{family}` needs `{k}`")))
        };
        let fam = match family {
            "delta_over_t" => ScheduleFamily::DeltaOverT { delta: value("schedule.delta")? },
            "inverse_power" => ScheduleFamily::InversePower { r: value("schedule.r")? },
            "constant" => ScheduleFamily::Constant { c: value("schedule.c")? },
            _ => ScheduleFamily::Zero,
        };
        TikhonovSchedule::new(fam, self.real_or("schedule.t_ref", t0)?)
    }

    fn build_integrator(&self, kind: DynamicsKind, t0: f64) -> Result<IntegratorConfig> {
        let method = match self.get("integrator.method") {
            Some(m) => Method::parse(m)?,
            None => Method::default_for(kind),
        };
        let horizon = if kind == DynamicsKind::CoupledVXNonsmooth { 1e2 } else { 1e3 };
        let t_end = self.real_or("integrator.t_end", horizon * t0)?;
        let per_decade = self
            .integer("integrator.samples")?
            .map_or(DEFAULT_SAMPLES_PER_DECADE, |n| n as usize);
        let mut cfg = IntegratorConfig::new(method, log_grid(t0, t_end, per_decade)?)?;
        if let Some(n) = self.integer("integrator.max_steps")? {
            cfg = cfg.with_max_steps(n as usize);
        }
        let rel = self.real_or("integrator.rel_tol", cfg.rel_tol)?;
        let abs = self.real_or("integrator.abs_tol", cfg.abs_tol)?;
        cfg = cfg.with_tolerances(rel, abs)?;
        if let Some(h) = self.real("integrator.step")? {
            cfg = cfg.with_step(h)?;
        }
        if method == Method::FixedRk4 && cfg.step.is_none() {
            return Err(Error::Config("integrator.method = fixed_rk4 needs integrator.step".into()));
        }
        Ok(cfg)
    }
}

fn parse_real(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{key}` must be a real number, got `{v}`")))
}

fn parse_point(key: &str, v: &str) -> Result<Point> {
    let xs = v
        .split(',')
        .map(|s| parse_real(key, s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Point::from_vec(xs))
}

/// Uniform start in `[−½, ½]^d`, shifted inside the domain when it has a lower bound.
fn random_start(p: &ObjectiveProblem, seed: u64) -> Point {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut x = Point::from_fn(p.dim(), |_, _| rng.random_range(-0.5..=0.5));
    if let Some(lo) = p.domain_lower() {
        for (xi, li) in x.iter_mut().zip(lo.iter()) {
            *xi = xi.max(li + 0.25);
        }
    }
    x
}

/// A validated run: every section checked before any computation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ObjectiveProblem,
    pub schedule: TikhonovSchedule,
    pub dynamics: DynamicsSpec,
    pub integrator: IntegratorConfig,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub raw: RawConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        RawConfig::parse(text)?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "
        # comment
        problem.name = f2
        schedule.family = delta_over_t
        schedule.delta = 2   # trailing comment
        dynamics.kind = inertial_implicit_hessian
        dynamics.alpha = 3.5
        dynamics.x0 = 0.25, -1
        integrator.t_end = 100
        integrator.samples = 50
    ";

    #[test]
    fn parses_full_example() {
        let cfg = RunConfig::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.problem.name(), "f2");
        assert_eq!(cfg.dynamics.alpha(), 3.5);
        assert_eq!(cfg.dynamics.x0(), &Point::from_vec(vec![0.25, -1.0]));
        assert_eq!(cfg.schedule.family(), ScheduleFamily::DeltaOverT { delta: 2.0 });
        assert_eq!(cfg.schedule.t_ref(), 1.0);
        assert_eq!(cfg.integrator.t_end(), 100.0);
        assert_eq!(cfg.integrator.sample_grid.len(), 101);
        assert_eq!(cfg.integrator.method, Method::AdaptiveRk);
    }

    #[test]
    fn defaults_follow_kind() {
        let cfg = RunConfig::parse(
            "problem.name = abs_affine\nproblem.a = 1, 1\nproblem.c = 1\ndynamics.kind = coupled_vx_nonsmooth\ndynamics.alpha = 3.5",
        )
        .unwrap();
        assert_eq!(cfg.integrator.method, Method::ProximalSemiImplicit);
        assert_eq!(cfg.integrator.t_end(), 100.0);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "problem.name = f2\ndynamics.kind = sd_tikhonov\nbogus.key = 1",
            "problem.name = f2\ndynamics.kind = sd_tikhonov\nschedule.family = zero\nschedule.r = 0.5",
            "problem.name = f9\ndynamics.kind = sd_tikhonov",
            "problem.name = f2\ndynamics.kind = sd_tikhonov\ndynamics.alpha = three",
            "problem.name = f2",
            "problem.name = f2\ndynamics.kind = sd_tikhonov\nno equals sign",
            "problem.name = quadratic\nproblem.A_diag = 1, 1\nproblem.b = 1, 1, 1\ndynamics.kind = sd_tikhonov",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
        let err = RunConfig::parse("problem.name = f2\ndynamics.kind = inertial_implicit_hessian\ndynamics.alpha = 0.5")
            .unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn random_start_is_seeded() {
        let text = "problem.name = f1\ndynamics.kind = sd_tikhonov\ndynamics.x0 = random\nseed = 7";
        let a = RunConfig::parse(text).unwrap();
        let b = RunConfig::parse(text).unwrap();
        assert_eq!(a.dynamics.x0(), b.dynamics.x0());
        let c = RunConfig::parse(&text.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.dynamics.x0(), c.dynamics.x0());
        assert!(a.problem.in_domain(a.dynamics.x0()));
    }
}
