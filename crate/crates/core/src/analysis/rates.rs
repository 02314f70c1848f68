//! Log-log least-squares fits of decay exponents.

use crate::error::{Error, Result};
use crate::integrators::TrajectoryRecord;

pub const MIN_FIT_SAMPLES: usize = 20;
/// Values at or below this are treated as having hit the noise floor.
pub const NOISE_FLOOR: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    FGap,
    GradNorm,
    DistMinNorm,
    Energy,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::FGap,
        Observable::GradNorm,
        Observable::DistMinNorm,
        Observable::Energy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::FGap => "f_gap",
            Observable::GradNorm => "grad_norm",
            Observable::DistMinNorm => "dist_min_norm",
            Observable::Energy => "energy_E",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown observable `{s}`")))
    }

    /// Observable values along a record, `None` where not recorded.
    pub fn values(&self, record: &TrajectoryRecord) -> Vec<Option<f64>> {
        record
            .diagnostics
            .iter()
            .map(|d| match self {
                Observable::FGap => Some(d.f_gap),
                Observable::GradNorm => d.grad_norm,
                Observable::DistMinNorm => d.dist_to_min_norm,
                Observable::Energy => d.energy,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Last decade `[T/10, T]` of a record.
pub fn default_window(record: &TrajectoryRecord) -> (f64, f64) {
    let t_end = *record.times.last().expect("records are never empty");
    (t_end / 10.0, t_end)
}

fn in_window(t: f64, (lo, hi): (f64, f64)) -> bool {
    let pad = 1e-12 * hi.abs();
    t >= lo - pad && t <= hi + pad
}

/// Fits `log y = intercept + slope·log t` over the samples inside `window`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    if !(window.0 > 0.0 && window.0 < window.1) {
        return Err(Error::InvalidParameter(format!("bad fit window {window:?}")));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| in_window(**t, window))
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{} samples in window {window:?}, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > NOISE_FLOOR)) {
        return Err(Error::DegenerateData {
            reason: format!("observable is {v:e} at t = {t}"),
            floor_time: Some(*t),
        });
    }
    let n = pts.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(t, v)| (t.ln(), v.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateData {
            reason: "window contains a single distinct time".into(),
            floor_time: None,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        window,
        r_squared,
        samples: pts.len(),
    })
}

pub fn fit_rate(record: &TrajectoryRecord, observable: Observable, window: Option<(f64, f64)>) -> Result<RateFit> {
    let window = window.unwrap_or_else(|| default_window(record));
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (t, v) in record.times.iter().zip(observable.values(record)) {
        if in_window(*t, window) {
            let v = v.ok_or_else(|| {
                Error::Unsupported(format!("{} is not recorded at t = {t}", observable.name()))
            })?;
            ts.push(*t);
            vs.push(v);
        }
    }
    fit_power_law(&ts, &vs, window)
}

/// One machine-readable line of a rate report.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub observable: String,
    pub window: (f64, f64),
    pub slope: Option<f64>,
    pub expected: Option<f64>,
    pub pass: Option<bool>,
    pub note: String,
}

impl RateRow {
    pub fn from_fit(observable: &str, window: (f64, f64), fit: &Result<RateFit>) -> Self {
        match fit {
            Ok(f) => RateRow {
                observable: observable.into(),
                window,
                slope: Some(f.slope),
                expected: None,
                pass: None,
                note: format!("r2={:.6}", f.r_squared),
            },
            Err(e) => RateRow {
                observable: observable.into(),
                window,
                slope: None,
                expected: None,
                pass: None,
                note: e.to_string(),
            },
        }
    }

    /// Marks the row as passing when `|slope − expected| ≤ tol`.
    pub fn expect_near(mut self, expected: f64, tol: f64) -> Self {
        self.expected = Some(expected);
        self.pass = Some(self.slope.is_some_and(|s| (s - expected).abs() <= tol));
        self
    }

    /// Marks the row as passing when `slope ≤ ceiling`.
    pub fn expect_at_most(mut self, ceiling: f64) -> Self {
        self.expected = Some(ceiling);
        self.pass = Some(self.slope.is_some_and(|s| s <= ceiling));
        self
    }

    pub fn csv_header() -> &'static str {
        "observable,t_lo,t_hi,slope,expected,pass,note"
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{:.16e},{:.16e},{},{},{},{}",
            self.observable,
            self.window.0,
            self.window.1,
            opt(self.slope),
            opt(self.expected),
            self.pass.map(|p| p.to_string()).unwrap_or_default(),
            self.note.replace(',', ";")
        )
    }
}

/// Candidate gradient exponents `−r/2` and `−min((1−r)/2, r)` for `ε = t^{−r}`.
pub fn gradient_rate_candidates(r: f64) -> (f64, f64) {
    (-r / 2.0, -((1.0 - r) / 2.0).min(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::log_grid;

    fn fit(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> RateFit {
        let ts = log_grid(lo, hi, 100).unwrap();
        let vs: Vec<f64> = ts.iter().map(|t| f(*t)).collect();
        fit_power_law(&ts, &vs, (lo, hi)).unwrap()
    }

    #[test]
    fn exact_power_law() {
        let f = fit(|t| 7.0 / (t * t), 1.0, 1e3);
        assert!((f.slope + 2.0).abs() < 1e-9);
        assert!(f.r_squared >= 1.0 - 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn dominant_term() {
        let f = fit(|t| 3.0 / t + 5.0 / (t * t), 1e3, 1e4);
        assert!((-1.05..=-0.95).contains(&f.slope));
    }

    #[test]
    fn constant_has_zero_slope() {
        let f = fit(|_| 0.25, 1.0, 10.0);
        assert!(f.slope.abs() < 1e-9);
    }

    #[test]
    fn noise_floor_and_sample_count() {
        let ts = log_grid(1.0, 10.0, 100).unwrap();
        let vs: Vec<f64> = ts.iter().map(|t| if *t > 5.0 { 0.0 } else { 1.0 / t }).collect();
        match fit_power_law(&ts, &vs, (1.0, 10.0)) {
            Err(Error::DegenerateData { floor_time: Some(t), .. }) => assert!(t > 5.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            fit_power_law(&ts[..10], &vs[..10], (1.0, 10.0)),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn gradient_candidates() {
        assert_eq!(gradient_rate_candidates(0.5), (-0.25, -0.25));
        assert_eq!(gradient_rate_candidates(0.2), (-0.1, -0.2));
    }
}
