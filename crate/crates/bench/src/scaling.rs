//! Wall-time sweeps of the FMBS selection loop.

use std::fmt::{self, Write as _};

use fmbs_core::placement::{fmbs_select_with, FmbsOptions};
use fmbs_core::{generate, Model, ModelSpec};

use crate::error::{BenchError, Result};
use crate::experiment::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    M,
    N,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::M => "m",
            Axis::N => "n",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalingPoint {
    pub n: usize,
    pub k: usize,
    pub m: usize,
}

impl ScalingPoint {
    fn x(&self, axis: Axis) -> usize {
        match axis {
            Axis::M => self.m,
            Axis::N => self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub axis: Axis,
    pub points: Vec<ScalingPoint>,
    pub model: Model,
    pub repeats: usize,
    pub mu: f64,
    pub seed: u64,
}

impl ScalingConfig {
    /// Fixed `n`, one point per budget. `k` defaults to the budget itself.
    pub fn over_m(n: usize, budgets: &[usize], k: Option<usize>) -> Self {
        let points = budgets
            .iter()
            .map(|&m| ScalingPoint {
                n,
                k: k.unwrap_or(m),
                m,
            })
            .collect();
        Self::with_points(Axis::M, points)
    }

    /// One point per `n`. The budget is `m` when given, otherwise
    /// `fraction·n` rounded; `k` defaults to the budget.
    pub fn over_n(sizes: &[usize], m: Option<usize>, k: Option<usize>, fraction: f64) -> Self {
        let points = sizes
            .iter()
            .map(|&n| {
                let m = m.unwrap_or_else(|| ((n as f64 * fraction).round() as usize).max(1));
                ScalingPoint {
                    n,
                    k: k.unwrap_or(m),
                    m,
                }
            })
            .collect();
        Self::with_points(Axis::N, points)
    }

    fn with_points(axis: Axis, points: Vec<ScalingPoint>) -> Self {
        Self {
            axis,
            points,
            model: Model::Gaussian,
            repeats: 5,
            mu: 1e-4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(BenchError::Usage("no sweep values".into()));
        }
        if self.repeats == 0 {
            return Err(BenchError::Usage("repeats must be at least 1".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(BenchError::Usage(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        for p in &self.points {
            ModelSpec::new(self.model, p.n, p.k, self.seed)?;
            if p.m < 1 || p.m > p.n {
                return Err(BenchError::Usage(format!(
                    "budget {} outside [1, {}]",
                    p.m, p.n
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub point: ScalingPoint,
    pub repeat: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub axis: Axis,
    pub records: Vec<ScalingRecord>,
    /// Fastest repeat per point, in sweep order.
    pub best: Vec<(ScalingPoint, f64)>,
    /// Least-squares slope of ln(best time) against ln(x).
    pub slope: Option<f64>,
}

impl ScalingReport {
    /// `best[j] / best[i]`.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.best[j].1 / self.best[i].1
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("axis,n,k,m,repeat,seconds\n");
        for r in &self.records {
            let p = r.point;
            writeln!(
                out,
                "{},{},{},{},{},{:.9}",
                self.axis, p.n, p.k, p.m, r.repeat, r.seconds
            )
            .unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (i, (p, t)) in self.best.iter().enumerate() {
            write!(out, "n={} k={} m={} best={:.6}s", p.n, p.k, p.m, t).unwrap();
            if i > 0 {
                write!(out, " ratio={:.3}", self.ratio(i - 1, i)).unwrap();
            }
            out.push('\n');
        }
        match self.slope {
            Some(s) => writeln!(out, "log-log slope of time vs {}: {s:.3}", self.axis).unwrap(),
            None => writeln!(out, "log-log slope of time vs {}: n/a", self.axis).unwrap(),
        }
        out
    }
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times serial FMBS at every point. Each point gets its own matrix, drawn
/// before the clock starts.
pub fn run_scaling(config: &ScalingConfig) -> Result<ScalingReport> {
    config.validate()?;
    let options = FmbsOptions::default();
    let mut records = Vec::new();
    let mut best = Vec::new();
    for p in &config.points {
        let seed = derive_seed(config.seed, p.n as u64, p.k as u64);
        let phi = generate(&ModelSpec::new(config.model, p.n, p.k, seed)?)?;
        let mut fastest = f64::INFINITY;
        for repeat in 0..config.repeats {
            let seconds = fmbs_select_with(&phi, p.m, config.mu, &options)?
                .total_time()
                .as_secs_f64();
            fastest = fastest.min(seconds);
            records.push(ScalingRecord {
                point: *p,
                repeat,
                seconds,
            });
        }
        best.push((*p, fastest));
    }
    let xs: Vec<f64> = best.iter().map(|(p, _)| p.x(config.axis) as f64).collect();
    let ys: Vec<f64> = best.iter().map(|b| b.1).collect();
    Ok(ScalingReport {
        axis: config.axis,
        slope: loglog_slope(&xs, &ys),
        records,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
        assert_eq!(loglog_slope(&[2.0, 2.0], &[1.0, 3.0]), None);
    }

    #[test]
    fn sweep_points() {
        let c = ScalingConfig::over_m(1000, &[50, 100], None);
        assert_eq!(
            c.points[1],
            ScalingPoint {
                n: 1000,
                k: 100,
                m: 100
            }
        );
        let c = ScalingConfig::over_n(&[2000, 4000], None, None, 0.1);
        assert_eq!(
            c.points[1],
            ScalingPoint {
                n: 4000,
                k: 400,
                m: 400
            }
        );
        let c = ScalingConfig::over_n(&[500, 1000], Some(50), Some(20), 0.1);
        assert_eq!(
            c.points[0],
            ScalingPoint {
                n: 500,
                k: 20,
                m: 50
            }
        );
        assert!(ScalingConfig::over_m(10, &[20], None).validate().is_err());
    }

    #[test]
    fn tiny_sweep_is_monotone() {
        let mut c = ScalingConfig::over_m(1000, &[2, 4], None);
        c.repeats = 15;
        let report = run_scaling(&c).unwrap();
        assert_eq!(report.records.len(), 30);
        assert!(report.best[0].1 <= report.best[1].1, "{}", report.summary());
        assert!(report
            .csv()
            .starts_with("axis,n,k,m,repeat,seconds\nm,1000,2,2,0,"));
    }
}
