//! Tikhonov-regularized gradient flows and their inertial variants.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod integrators;
pub mod problems;
pub mod schedules;
pub mod verify;

pub use config::{RawConfig, RunConfig};
pub use dynamics::{DynamicsKind, DynamicsSpec, State};
pub use error::{Error, Result};
pub use integrators::{integrate, IntegratorConfig, Method, TrajectoryRecord};
pub use problems::{catalog, ObjectiveProblem, Oracle, Point};
pub use schedules::{ScheduleFamily, TikhonovSchedule};
