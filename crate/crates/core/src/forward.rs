//! Driving function to trace: `z_k = f_1 o f_2 o ... o f_k (0)`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::driver::{brownian_driver, refine, uniform_times, DrivingPath};
use crate::error::{check_positive, Error, Result};
use crate::series::{BlockPlan, DEFAULT_GATE, DEFAULT_ORDER};
use crate::slitmap::{SlitKind, SlitMap};

/// Provenance of a trace produced by [`sle_adaptive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceMeta {
    pub eps: f64,
    pub rounds: usize,
    pub kappa: f64,
    pub seed: u64,
    pub compliant: bool,
}

/// Points `z_k` at capacity times `t_k`; consecutive points are meant to be
/// joined by straight segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
    pub kind: SlitKind,
    pub meta: Option<TraceMeta>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|z_k - z_(k-1)|` for `k = 1..=N`.
    pub fn gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps().into_iter().fold(0.0, f64::max)
    }

    /// Largest distance between two trace points (bounding-box diagonal
    /// above 4096 points).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        let n = self.points.len();
        if n <= 4096 {
            for i in 0..n {
                for j in i + 1..n {
                    best = best.max((self.points[i] - self.points[j]).norm());
                }
            }
            return best;
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &self.points {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        libm::hypot(x1 - x0, y1 - y0)
    }
}

/// Default block size per `sqrt(N)`.
pub const BLOCK_SCALE: f64 = 0.2;

/// Block acceleration parameters: `b`, `n` and `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockParams {
    /// `None` resolves to `ceil(BLOCK_SCALE * sqrt(N))`.
    pub block_size: Option<usize>,
    pub order: usize,
    pub gate: f64,
}

impl Default for BlockParams {
    fn default() -> Self {
        BlockParams {
            block_size: None,
            order: DEFAULT_ORDER,
            gate: DEFAULT_GATE,
        }
    }
}

impl BlockParams {
    pub fn resolve_block_size(&self, steps: usize) -> usize {
        self.block_size
            .unwrap_or_else(|| (libm::ceil(BLOCK_SCALE * libm::sqrt(steps as f64)) as usize).max(1))
    }
}

/// O(N^2) evaluation of every point by full nested composition.
pub fn solve_naive(path: &DrivingPath, kind: SlitKind) -> Result<Trace> {
    let maps = path.maps(kind)?;
    let mut points = Vec::with_capacity(path.len());
    points.push(Complex64::new(0.0, 0.0));
    for k in 1..=maps.len() {
        let mut z = Complex64::new(0.0, 0.0);
        for m in maps[..k].iter().rev() {
            z = m.apply_f(z);
        }
        points.push(z);
    }
    Ok(Trace {
        times: path.times().to_vec(),
        points,
        kind,
        meta: None,
    })
}

/// Elementary maps of a path together with their block decomposition.
///
/// Immutable once built; [`ForwardPlan::point_at`] may be called from many
/// threads.
#[derive(Clone, Debug)]
pub struct ForwardPlan {
    maps: Vec<SlitMap>,
    plan: BlockPlan,
}

impl ForwardPlan {
    pub fn new(path: &DrivingPath, kind: SlitKind, params: BlockParams) -> Result<Self> {
        let maps = path.maps(kind)?;
        Self::from_maps(maps, params)
    }

    pub fn from_maps(maps: Vec<SlitMap>, params: BlockParams) -> Result<Self> {
        let b = params.resolve_block_size(maps.len());
        let plan = BlockPlan::forward(&maps, b, params.order, params.gate)?;
        Ok(ForwardPlan { maps, plan })
    }

    pub fn maps(&self) -> &[SlitMap] {
        &self.maps
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    pub fn steps(&self) -> usize {
        self.maps.len()
    }

    /// `z_k = F_1 o ... o F_m o f_(mb+1) o ... o f_k (0)`, using a block's
    /// series whenever its argument clears `|z - c_j| >= L R_j`.
    pub fn point_at(&self, k: usize) -> Result<Complex64> {
        if k > self.maps.len() {
            return Err(Error::Domain {
                name: "k",
                value: k as f64,
            });
        }
        let b = self.plan.block_size;
        let m = k / b;
        let mut z = Complex64::new(0.0, 0.0);
        for f in self.maps[m * b..k].iter().rev() {
            z = f.apply_f(z);
        }
        for block in self.plan.blocks[..m].iter().rev() {
            if self.plan.gated(block, z) {
                z = block.eval(z)?;
            } else {
                for f in self.maps[block.members.clone()].iter().rev() {
                    z = f.apply_f(z);
                }
            }
        }
        Ok(z)
    }
}

/// Every point via [`ForwardPlan::point_at`].
pub fn solve_blocked(path: &DrivingPath, kind: SlitKind, params: BlockParams) -> Result<Trace> {
    let plan = ForwardPlan::new(path, kind, params)?;
    let points = (0..=plan.steps())
        .map(|k| plan.point_at(k).map_err(|e| e.at(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trace {
        times: path.times().to_vec(),
        points,
        kind,
        meta: None,
    })
}

/// Naive when `params` is `None`, blocked otherwise.
pub fn solve(path: &DrivingPath, kind: SlitKind, params: Option<BlockParams>) -> Result<Trace> {
    match params {
        Some(p) => solve_blocked(path, kind, p),
        None => solve_naive(path, kind),
    }
}

/// Parameters of the adaptive SLE sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub kappa: f64,
    pub t_max: f64,
    /// Spatial tolerance on consecutive points.
    pub eps: f64,
    pub seed: u64,
    pub kind: SlitKind,
    pub initial_steps: usize,
    pub max_rounds: usize,
    pub max_points: usize,
    /// `None` runs the naive solver each round.
    pub blocks: Option<BlockParams>,
}

impl AdaptiveConfig {
    /// Defaults: `eps = 0.01 sqrt(2T)`, 64 initial steps, 64 rounds,
    /// `2 * 10^6` points, vertical slits, blocked solver.
    pub fn new(kappa: f64, t_max: f64, seed: u64) -> Self {
        AdaptiveConfig {
            kappa,
            t_max,
            eps: 0.01 * libm::sqrt(2.0 * t_max),
            seed,
            kind: SlitKind::Vertical,
            initial_steps: 64,
            max_rounds: 64,
            max_points: 2_000_000,
            blocks: Some(BlockParams::default()),
        }
    }
}

/// Result of [`sle_adaptive`]; `compliant` is false when a cap tripped.
#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub path: DrivingPath,
    pub trace: Trace,
    /// Refinement passes performed.
    pub rounds: usize,
    /// Point count after each trace computation.
    pub history: Vec<usize>,
    pub compliant: bool,
}

/// SLE(kappa) up to capacity time `T` with steps refined until consecutive
/// points are within `eps`.
///
/// Each round recomputes the whole trace and bisects every step whose gap
/// exceeds `eps`, drawing the new driver value from the Brownian bridge.
pub fn sle_adaptive(cfg: &AdaptiveConfig) -> Result<AdaptiveRun> {
    check_positive("eps", cfg.eps)?;
    if cfg.initial_steps < 2 {
        return Err(Error::Domain {
            name: "initial_steps",
            value: cfg.initial_steps as f64,
        });
    }
    let times = uniform_times(cfg.t_max, cfg.initial_steps)?;
    let path = brownian_driver(cfg.kappa, times, cfg.seed)?;
    refine_until(path, cfg)
}

/// The refinement loop of [`sle_adaptive`] starting from a given path.
pub fn refine_until(mut path: DrivingPath, cfg: &AdaptiveConfig) -> Result<AdaptiveRun> {
    check_positive("eps", cfg.eps)?;
    let mut rounds = 0;
    let mut history = Vec::new();
    loop {
        let mut trace = solve(&path, cfg.kind, cfg.blocks)?;
        history.push(trace.len());
        let wide: Vec<bool> = trace.gaps().iter().map(|&g| g > cfg.eps).collect();
        let extra = wide.iter().filter(|&&s| s).count();
        let done = extra == 0;
        // a step too short to halve in floating point cannot be refined
        let stuck = wide
            .iter()
            .zip(path.times().windows(2))
            .any(|(&w, t)| w && !(0.5 * (t[0] + t[1]) > t[0] && 0.5 * (t[0] + t[1]) < t[1]));
        let capped = !done && (stuck || rounds >= cfg.max_rounds || path.len() + extra > cfg.max_points);
        if done || capped {
            trace.meta = Some(TraceMeta {
                eps: cfg.eps,
                rounds,
                kappa: cfg.kappa,
                seed: cfg.seed,
                compliant: done,
            });
            return Ok(AdaptiveRun {
                path: path.with_kappa_hint(Some(cfg.kappa)),
                trace,
                rounds,
                history,
                compliant: done,
            });
        }
        path = refine(&path, &wide, cfg.kappa, cfg.seed)?;
        rounds += 1;
    }
}
