//! Viscosity curve, Lyapunov diagnostics, averaging and rate fits.

pub mod averaging;
pub mod equivalence;
pub mod lyapunov;
pub mod rates;
pub mod viscosity;

pub use averaging::{average_trajectory, jensen_gap};
pub use equivalence::{equivalence_check, EquivalenceReport};
pub use lyapunov::{check_lyapunov_bound, fill_energy, lyapunov_energy, LyapunovReport};
pub use rates::{fit_power_law, fit_rate, Observable, RateFit, RateRow};
pub use viscosity::{viscosity_curve, viscosity_point, viscosity_point_warm, ViscosityPoint};
