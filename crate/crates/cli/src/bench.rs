//! Wall-clock cost of the naive and blocked solvers and log-log slope fits.
//!
//! Every timing is the median of `reps` repetitions after one untimed
//! warm-up run. Inputs are Brownian drivers on `[0, 1]` with `N` equal steps
//! and, for the inverse direction, the traces they generate.

use std::hint::black_box;
use std::time::Instant;

use loewner_core::driver::{brownian_driver, uniform_times};
use loewner_core::forward::{solve_blocked, solve_naive};
use loewner_core::inverse::{extract_blocked, extract_naive, CurveSource};
use loewner_core::{BlockParams, CurveInput, DrivingPath, ForwardPlan, SlitKind};
use serde::Serialize;

use crate::error::Result;

/// Least-squares line through `(log N, log seconds)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals in natural-log units.
    pub rms_residual: f64,
}

pub fn loglog_fit(sizes: &[usize], seconds: &[f64]) -> Fit {
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = seconds.iter().map(|s| s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Fit {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median wall time of `reps` runs of `f`, after one warm-up.
pub fn median_seconds<T>(reps: usize, mut f: impl FnMut() -> T) -> f64 {
    black_box(f());
    let runs = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            black_box(f());
            start.elapsed().as_secs_f64()
        })
        .collect();
    median(runs)
}

#[derive(Clone, Debug, Serialize)]
pub struct CostCurve {
    pub sizes: Vec<usize>,
    pub seconds: Vec<f64>,
    pub fit: Fit,
}

impl CostCurve {
    fn new(sizes: &[usize], seconds: Vec<f64>) -> Self {
        CostCurve {
            sizes: sizes.to_vec(),
            fit: loglog_fit(sizes, &seconds),
            seconds,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Speedup {
    pub steps: usize,
    pub naive_seconds: f64,
    pub blocked_seconds: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub kappa: f64,
    pub kind: SlitKind,
    pub seed: u64,
    pub reps: usize,
    pub params: BlockParams,
    pub naive_sizes: Vec<usize>,
    pub forward_sizes: Vec<usize>,
    pub inverse_sizes: Vec<usize>,
    pub speedup_steps: usize,
    /// Points timed per size for the per-point forward cost.
    pub samples: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            kappa: 8.0 / 3.0,
            kind: SlitKind::Vertical,
            seed: 1,
            reps: 5,
            params: BlockParams::default(),
            naive_sizes: vec![1000, 2000, 4000, 8000],
            forward_sizes: vec![1000, 10_000, 100_000],
            inverse_sizes: vec![2000, 10_000, 50_000],
            speedup_steps: 10_000,
            samples: 2000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub kind: String,
    pub kappa: f64,
    pub reps: usize,
    pub order: usize,
    pub gate: f64,
    pub naive_forward_total: CostCurve,
    pub naive_inverse_total: CostCurve,
    pub blocked_forward_per_point: CostCurve,
    pub blocked_inverse_total: CostCurve,
    pub forward_speedup: Speedup,
    pub inverse_speedup: Speedup,
}

impl BenchSpec {
    fn driver(&self, steps: usize) -> Result<DrivingPath> {
        Ok(brownian_driver(self.kappa, uniform_times(1.0, steps)?, self.seed)?)
    }

    fn curve(&self, steps: usize) -> Result<CurveInput> {
        let trace = solve_blocked(&self.driver(steps)?, self.kind, self.params)?;
        Ok(CurveInput::new(trace.points, CurveSource::Trace)?)
    }

    pub fn naive_forward_total(&self) -> Result<CostCurve> {
        let mut secs = Vec::new();
        for &n in &self.naive_sizes {
            let path = self.driver(n)?;
            secs.push(median_seconds(self.reps, || solve_naive(&path, self.kind)));
        }
        Ok(CostCurve::new(&self.naive_sizes, secs))
    }

    pub fn naive_inverse_total(&self) -> Result<CostCurve> {
        let mut secs = Vec::new();
        for &n in &self.naive_sizes {
            let curve = self.curve(n)?;
            secs.push(median_seconds(self.reps, || extract_naive(&curve, self.kind)));
        }
        Ok(CostCurve::new(&self.naive_sizes, secs))
    }

    /// Plan construction spread over all points plus the mean cost of
    /// `samples` evenly spaced points.
    pub fn blocked_forward_per_point(&self) -> Result<CostCurve> {
        let mut secs = Vec::new();
        for &n in &self.forward_sizes {
            let path = self.driver(n)?;
            let build = median_seconds(self.reps, || ForwardPlan::new(&path, self.kind, self.params));
            let plan = ForwardPlan::new(&path, self.kind, self.params)?;
            let m = self.samples.clamp(1, n);
            let picks: Vec<usize> = (0..m).map(|i| 1 + (2 * i + 1) * (n - 1) / (2 * m)).collect();
            let eval = median_seconds(self.reps, || {
                picks.iter().map(|&k| plan.point_at(k).map(|z| z.re)).sum::<loewner_core::Result<f64>>()
            });
            secs.push(build / n as f64 + eval / m as f64);
        }
        Ok(CostCurve::new(&self.forward_sizes, secs))
    }

    pub fn blocked_inverse_total(&self) -> Result<CostCurve> {
        let mut secs = Vec::new();
        for &n in &self.inverse_sizes {
            let curve = self.curve(n)?;
            secs.push(median_seconds(self.reps, || extract_blocked(&curve, self.kind, self.params)));
        }
        Ok(CostCurve::new(&self.inverse_sizes, secs))
    }

    pub fn forward_speedup(&self) -> Result<Speedup> {
        let n = self.speedup_steps;
        let path = self.driver(n)?;
        let naive = median_seconds(self.reps, || solve_naive(&path, self.kind));
        let blocked = median_seconds(self.reps, || solve_blocked(&path, self.kind, self.params));
        Ok(Speedup {
            steps: n,
            naive_seconds: naive,
            blocked_seconds: blocked,
            ratio: naive / blocked,
        })
    }

    pub fn inverse_speedup(&self) -> Result<Speedup> {
        let n = self.speedup_steps;
        let curve = self.curve(n)?;
        let naive = median_seconds(self.reps, || extract_naive(&curve, self.kind));
        let blocked = median_seconds(self.reps, || extract_blocked(&curve, self.kind, self.params));
        Ok(Speedup {
            steps: n,
            naive_seconds: naive,
            blocked_seconds: blocked,
            ratio: naive / blocked,
        })
    }

    pub fn run(&self) -> Result<BenchReport> {
        Ok(BenchReport {
            kind: self.kind.to_string(),
            kappa: self.kappa,
            reps: self.reps,
            order: self.params.order,
            gate: self.params.gate,
            naive_forward_total: self.naive_forward_total()?,
            naive_inverse_total: self.naive_inverse_total()?,
            blocked_forward_per_point: self.blocked_forward_per_point()?,
            blocked_inverse_total: self.blocked_inverse_total()?,
            forward_speedup: self.forward_speedup()?,
            inverse_speedup: self.inverse_speedup()?,
        })
    }
}
