//! Driving functions sampled on a capacity-time grid.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_positive, Error, Result};
use crate::slitmap::{SlitKind, SlitMap};

/// Samples `(t_k, U_k)` with `t_0 = 0`, `U_0 = 0` and strictly increasing
/// times. Times use the `C(t) = 2t` capacity convention.
#[derive(Clone, Debug, PartialEq)]
pub struct DrivingPath {
    times: Vec<f64>,
    values: Vec<f64>,
    kappa_hint: Option<f64>,
}

impl DrivingPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, kappa_hint: Option<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        check_times(&times)?;
        if values[0] != 0.0 {
            return Err(Error::BadOrigin);
        }
        if let Some(i) = values.iter().position(|u| !u.is_finite()) {
            return Err(Error::Domain {
                name: "driving value",
                value: values[i],
            });
        }
        Ok(DrivingPath {
            times,
            values,
            kappa_hint,
        })
    }

    /// Verbatim samples; the first pair must be `(0, 0)`.
    pub fn from_samples(pairs: &[(f64, f64)]) -> Result<Self> {
        let (times, values) = pairs.iter().copied().unzip();
        Self::new(times, values, None)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kappa_hint(&self) -> Option<f64> {
        self.kappa_hint
    }

    pub fn with_kappa_hint(mut self, kappa: Option<f64>) -> Self {
        self.kappa_hint = kappa;
        self
    }

    /// Number of samples, including `t_0`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of steps `N` (samples minus one).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `(dt_k, du_k)` for `k = 1..=N`.
    pub fn increments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, u)| (t[1] - t[0], u[1] - u[0]))
    }

    /// One elementary map per step.
    pub fn maps(&self, kind: SlitKind) -> Result<Vec<SlitMap>> {
        self.increments()
            .enumerate()
            .map(|(k, (dt, du))| SlitMap::new(kind, du, dt).map_err(|e| e.at(k + 1)))
            .collect()
    }

    /// Linear interpolation at `t` within `[0, final_time]`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.final_time()) {
            return Err(Error::Domain { name: "t", value: t });
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i >= self.times.len() {
            return Ok(self.values[self.values.len() - 1]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (u0, u1) = (self.values[i - 1], self.values[i]);
        Ok(u0 + (u1 - u0) * (t - t0) / (t1 - t0))
    }

    /// Values at every grid time by linear interpolation.
    pub fn resample(&self, grid: &[f64]) -> Result<Vec<f64>> {
        grid.iter().map(|&t| self.value_at(t)).collect()
    }

    /// `U_t -> lambda U_(t / lambda^2)`: the driver of the curve scaled by
    /// `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Self::new(
            self.times.iter().map(|t| t * lambda * lambda).collect(),
            self.values.iter().map(|u| u * lambda).collect(),
            self.kappa_hint,
        )
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    if times[0] != 0.0 {
        return Err(Error::BadOrigin);
    }
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::NonMonotoneTimes { index: i + 1 });
        }
    }
    Ok(())
}

/// `t_k = k T / N` for `k = 0..=N`.
pub fn uniform_times(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    check_positive("T", t_max)?;
    if steps == 0 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    Ok((0..=steps).map(|k| t_max * k as f64 / steps as f64).collect())
}

/// SplitMix64 finaliser.
#[inline]
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from a base seed and two keys.
///
/// `split_seed(s, a, b) = mix(mix(mix(s) ^ a) ^ b)` with the SplitMix64
/// finaliser. Bridge samples key on the bit patterns of the interval
/// endpoints, so a midpoint draw never depends on refinement order.
pub fn split_seed(seed: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ a) ^ b)
}

const STREAM_BASE: u64 = 0x6261_7365_5f70_6174;

/// `U` at the given times with independent `N(0, kappa dt_k)` increments.
pub fn brownian_driver(kappa: f64, times: Vec<f64>, seed: u64) -> Result<DrivingPath> {
    check_kappa(kappa)?;
    check_times(&times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_BASE, 0));
    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    let sk = libm::sqrt(kappa);
    let mut u = 0.0;
    for w in times.windows(2) {
        let xi: f64 = rng.sample(StandardNormal);
        u += sk * libm::sqrt(w[1] - w[0]) * xi;
        values.push(u);
    }
    DrivingPath::new(times, values, Some(kappa))
}

/// Simple random walk on `t_k = k dt` with steps `+-sqrt(kappa dt)`.
pub fn walk_driver(kappa: f64, steps: usize, dt: f64, seed: u64) -> Result<DrivingPath> {
    check_kappa(kappa)?;
    check_positive("dt", dt)?;
    if steps == 0 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_BASE, 1));
    let step = libm::sqrt(kappa * dt);
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    let mut u = 0.0;
    for _ in 0..steps {
        u += if rng.random::<bool>() { step } else { -step };
        values.push(u);
    }
    DrivingPath::new(times, values, Some(kappa))
}

/// A draw of `sqrt(kappa) B` at the midpoint of `[t_a, t_b]` conditioned on
/// its endpoint values: `N((u_a + u_b) / 2, kappa (t_b - t_a) / 4)`.
pub fn bridge_midpoint<R: Rng + ?Sized>(
    u_a: f64,
    u_b: f64,
    t_a: f64,
    t_b: f64,
    kappa: f64,
    rng: &mut R,
) -> f64 {
    debug_assert!(t_a < t_b);
    let mean = 0.5 * (u_a + u_b);
    if kappa == 0.0 {
        return mean;
    }
    let xi: f64 = rng.sample(StandardNormal);
    mean + 0.5 * libm::sqrt(kappa * (t_b - t_a)) * xi
}

/// [`bridge_midpoint`] with the stream keyed by `(seed, t_a, t_b)`.
pub fn bridge_midpoint_keyed(u_a: f64, u_b: f64, t_a: f64, t_b: f64, kappa: f64, seed: u64) -> f64 {
    let key = split_seed(seed, t_a.to_bits(), t_b.to_bits());
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    bridge_midpoint(u_a, u_b, t_a, t_b, kappa, &mut rng)
}

/// Bisects the chosen steps, drawing each new value from the bridge.
///
/// `split[k - 1]` refers to the step ending at sample `k`.
pub fn refine(path: &DrivingPath, split: &[bool], kappa: f64, seed: u64) -> Result<DrivingPath> {
    if split.len() != path.steps() {
        return Err(Error::LengthMismatch {
            left: split.len(),
            right: path.steps(),
        });
    }
    let extra = split.iter().filter(|&&s| s).count();
    let mut times = Vec::with_capacity(path.len() + extra);
    let mut values = Vec::with_capacity(path.len() + extra);
    times.push(path.times[0]);
    values.push(path.values[0]);
    for k in 1..path.len() {
        let (ta, tb) = (path.times[k - 1], path.times[k]);
        let (ua, ub) = (path.values[k - 1], path.values[k]);
        if split[k - 1] {
            let tm = 0.5 * (ta + tb);
            if !(tm > ta && tm < tb) {
                return Err(Error::NonMonotoneTimes { index: k });
            }
            times.push(tm);
            values.push(bridge_midpoint_keyed(ua, ub, ta, tb, kappa, seed));
        }
        times.push(tb);
        values.push(ub);
    }
    DrivingPath::new(times, values, path.kappa_hint)
}

/// `U_t = c sqrt(t)`: the driver of a straight tilted slit.
pub fn sqrt_driver(c: f64, times: Vec<f64>) -> Result<DrivingPath> {
    check_times(&times)?;
    let values = times.iter().map(|&t| c * libm::sqrt(t)).collect();
    DrivingPath::new(times, values, Some(c * c))
}

/// `U_t = du` for `t > 0`, with `U_0 = 0`.
pub fn constant_driver(du: f64, times: Vec<f64>) -> Result<DrivingPath> {
    check_times(&times)?;
    let values = times.iter().map(|&t| if t > 0.0 { du } else { 0.0 }).collect();
    DrivingPath::new(times, values, None)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "kappa",
            value: kappa,
        })
    }
}
