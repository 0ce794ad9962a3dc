//! Ensemble statistics of driving functions: the diffusion constant and
//! checks that the increments look like those of Brownian motion.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::DrivingPath;
use crate::error::{check_positive, Error, Result};

pub const DEFAULT_RESAMPLES: usize = 200;
pub const DEFAULT_BOOTSTRAP_SEED: u64 = 0x5eed_b007;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BmDiagnostics {
    pub lag1_autocorr: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov-Smirnov distance to the standard normal.
    pub ks: f64,
    pub increments: usize,
    /// KS below its 1% critical value and lag-1 correlation within
    /// `3 / sqrt(increments)`.
    pub brownian_like: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaReport {
    pub kappa_hat: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Set when every sample variance is zero.
    pub degenerate: bool,
    pub n_paths: usize,
    pub n_times: usize,
    pub diagnostics: BmDiagnostics,
}

/// `n` equally spaced times `T/n, 2T/n, ..., T` with `T` the shortest final
/// time among `paths`.
pub fn common_grid(paths: &[DrivingPath], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let t_max = paths
        .iter()
        .map(DrivingPath::final_time)
        .fold(f64::INFINITY, f64::min);
    check_positive("t_max", t_max)?;
    Ok((1..=n).map(|i| t_max * i as f64 / n as f64).collect())
}

/// Paths sampled on the grid, one row per path.
struct Ensemble {
    grid: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl Ensemble {
    fn new(paths: &[DrivingPath], grid: &[f64]) -> Result<Self> {
        if paths.len() < 2 {
            return Err(Error::TooFew {
                needed: 2,
                got: paths.len(),
            });
        }
        // t = 0 carries no information
        let grid = grid.strip_prefix(&[0.0]).unwrap_or(grid);
        if grid.is_empty() {
            return Err(Error::TooFew { needed: 1, got: 0 });
        }
        let mut prev = 0.0;
        for (i, &t) in grid.iter().enumerate() {
            if !(t > prev) {
                return Err(Error::NonMonotoneTimes { index: i });
            }
            prev = t;
        }
        let rows = paths
            .iter()
            .enumerate()
            .map(|(k, p)| p.resample(grid).map_err(|e| e.at(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            grid: grid.to_vec(),
            rows,
        })
    }

    /// Unbiased sample variance at every grid time over the chosen rows.
    fn variances(&self, pick: &[usize]) -> Vec<f64> {
        let n = pick.len() as f64;
        (0..self.grid.len())
            .map(|j| {
                let mean = pick.iter().map(|&r| self.rows[r][j]).sum::<f64>() / n;
                pick.iter()
                    .map(|&r| {
                        let d = self.rows[r][j] - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / (n - 1.0)
            })
            .collect()
    }

    fn slope(&self, var: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&t, &v) in self.grid.iter().zip(var) {
            num += t * t * v;
            den += t * t * t;
        }
        (num / den).max(0.0)
    }
}

/// [`estimate_kappa_with`] using 200 resamples and a fixed seed.
pub fn estimate_kappa(paths: &[DrivingPath], grid: &[f64]) -> Result<KappaReport> {
    estimate_kappa_with(paths, grid, DEFAULT_RESAMPLES, DEFAULT_BOOTSTRAP_SEED)
}

/// Fits `Var(U_t) = kappa t` through the origin with weights `t`; the
/// standard error comes from resampling whole paths.
pub fn estimate_kappa_with(
    paths: &[DrivingPath],
    grid: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<KappaReport> {
    let ens = Ensemble::new(paths, grid)?;
    let all: Vec<usize> = (0..paths.len()).collect();
    let var = ens.variances(&all);
    let kappa_hat = ens.slope(&var);

    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&t, &v) in ens.grid.iter().zip(&var) {
        let r = v - kappa_hat * t;
        ss_res += t * r * r;
        ss_tot += t * v * v;
    }
    let degenerate = ss_tot == 0.0;
    let r_squared = if degenerate {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };

    let stderr = if resamples < 2 {
        f64::NAN
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = alloc::vec![0usize; paths.len()];
        let mut draws = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            for slot in pick.iter_mut() {
                *slot = rng.random_range(0..paths.len());
            }
            draws.push(ens.slope(&ens.variances(&pick)));
        }
        libm::sqrt(mean_var(&draws).1)
    };

    Ok(KappaReport {
        kappa_hat,
        stderr,
        r_squared,
        degenerate,
        n_paths: paths.len(),
        n_times: ens.grid.len(),
        diagnostics: diagnostics_for(&ens, kappa_hat),
    })
}

/// Increment statistics standardized by the fitted `kappa`.
pub fn bm_diagnostics(paths: &[DrivingPath], grid: &[f64]) -> Result<BmDiagnostics> {
    let ens = Ensemble::new(paths, grid)?;
    let all: Vec<usize> = (0..paths.len()).collect();
    let kappa_hat = ens.slope(&ens.variances(&all));
    Ok(diagnostics_for(&ens, kappa_hat))
}

fn diagnostics_for(ens: &Ensemble, kappa: f64) -> BmDiagnostics {
    let m = ens.rows.len() * ens.grid.len();
    let degenerate = BmDiagnostics {
        lag1_autocorr: 0.0,
        skewness: 0.0,
        excess_kurtosis: 0.0,
        ks: 1.0,
        increments: m,
        brownian_like: false,
    };
    if !(kappa > 0.0) {
        return degenerate;
    }
    let mut xs = Vec::with_capacity(m);
    for row in &ens.rows {
        let (mut t0, mut u0) = (0.0, 0.0);
        for (&t, &u) in ens.grid.iter().zip(row) {
            xs.push((u - u0) / libm::sqrt(kappa * (t - t0)));
            t0 = t;
            u0 = u;
        }
    }
    let (mean, var) = mean_var(&xs);
    if !(var > 0.0) {
        return degenerate;
    }
    let (mut m3, mut m4) = (0.0, 0.0);
    for &x in &xs {
        let d = x - mean;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let n = xs.len() as f64;
    let pop = var * (n - 1.0) / n;
    let skewness = m3 / n / (pop * libm::sqrt(pop));
    let excess_kurtosis = m4 / n / (pop * pop) - 3.0;

    let width = ens.grid.len();
    let (mut num, mut den) = (0.0, 0.0);
    for chunk in xs.chunks(width) {
        for pair in chunk.windows(2) {
            num += (pair[0] - mean) * (pair[1] - mean);
        }
    }
    for &x in &xs {
        den += (x - mean) * (x - mean);
    }
    let lag1_autocorr = num / den;

    let ks = ks_statistic(&mut xs, normal_cdf);
    let root = libm::sqrt(n);
    BmDiagnostics {
        lag1_autocorr,
        skewness,
        excess_kurtosis,
        ks,
        increments: m,
        brownian_like: ks < 1.63 / root && libm::fabs(lag1_autocorr) < 3.0 / root,
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// One-sample Kolmogorov-Smirnov distance; sorts `xs` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &mut [f64], cdf: F) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let p = cdf(x);
        d = d.max(p - i as f64 / n).max((i + 1) as f64 / n - p);
    }
    d
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
