//! Curve to driving function by sequential unzipping.
//!
//! Points `z_1, z_2, ...` are processed in order. The image
//! `w_(k+1) = h_k o ... o h_1 (z_(k+1))` of the next point is computed, a
//! slit with tip `w_(k+1)` is fitted, and its `(dt, du)` are appended to the
//! driving function.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::driver::DrivingPath;
use crate::error::{Error, Result};
use crate::forward::BlockParams;
use crate::series::{inverse_footprint, Block, BlockPlan, Direction, HatSeries};
use crate::slitmap::{SlitKind, SlitMap};

/// Default relative lift applied to points that fall onto or below the real
/// axis.
pub const DEFAULT_LIFT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveSource {
    Lattice,
    Trace,
    Synthetic,
    File,
}

/// Points `z_0 = 0, z_1, ..., z_n` along a curve in the upper half-plane.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveInput {
    points: Vec<Complex64>,
    source: CurveSource,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Repair {
    /// Input index whose imaginary part was raised from `from`.
    Lifted { index: usize, from: f64 },
    /// Input index dropped as a duplicate of its predecessor.
    Dropped { index: usize },
}

impl CurveInput {
    /// Accepts points that already satisfy the invariants.
    pub fn new(points: Vec<Complex64>, source: CurveSource) -> Result<Self> {
        let (curve, report) = sanitize(points, DEFAULT_LIFT, source)?;
        if !report.is_empty() {
            return Err(Error::NotInUpperHalfPlane {
                point: curve.points[1],
            });
        }
        Ok(curve)
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn source(&self) -> CurveSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `max |z_k|`.
    pub fn scale(&self) -> f64 {
        scale_of(&self.points)
    }
}

fn scale_of(points: &[Complex64]) -> f64 {
    points.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Lifts points with `Im z <= 0` (after the first) to `Im z = lift * scale`
/// and drops points within `1e-14 * scale` of their predecessor.
pub fn sanitize(points: Vec<Complex64>, lift: f64, source: CurveSource) -> Result<(CurveInput, Vec<Repair>)> {
    if points.first() != Some(&Complex64::new(0.0, 0.0)) {
        return Err(Error::BadOrigin);
    }
    let scale = scale_of(&points);
    let mut report = Vec::new();
    let mut out: Vec<Complex64> = Vec::with_capacity(points.len());
    for (index, mut z) in points.into_iter().enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NotInUpperHalfPlane { point: z });
        }
        if index > 0 && z.im <= 0.0 {
            report.push(Repair::Lifted { index, from: z.im });
            z.im = lift * scale;
        }
        if let Some(prev) = out.last() {
            if (z - prev).norm() <= 1e-14 * scale {
                report.push(Repair::Dropped { index });
                continue;
            }
        }
        out.push(z);
    }
    if out.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: out.len(),
        });
    }
    Ok((CurveInput { points: out, source }, report))
}

/// Extracted driving function plus the steps whose image had to be lifted.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub path: DrivingPath,
    pub maps: Vec<SlitMap>,
    /// Step indices `k` whose `w_k` landed on or below the real axis.
    pub lifted: Vec<usize>,
    /// Step indices whose capacity increment vanished next to the elapsed
    /// time; their driving increment is folded into the previous sample.
    pub merged: Vec<usize>,
}

struct Unzipper {
    kind: SlitKind,
    lift: f64,
    maps: Vec<SlitMap>,
    times: Vec<f64>,
    values: Vec<f64>,
    lifted: Vec<usize>,
    merged: Vec<usize>,
}

impl Unzipper {
    fn new(kind: SlitKind, lift: f64, capacity: usize) -> Self {
        let mut times = Vec::with_capacity(capacity);
        let mut values = Vec::with_capacity(capacity);
        times.push(0.0);
        values.push(0.0);
        Unzipper {
            kind,
            lift,
            maps: Vec::with_capacity(capacity),
            times,
            values,
            lifted: Vec::new(),
            merged: Vec::new(),
        }
    }

    fn push(&mut self, mut w: Complex64, scale: f64) -> Result<()> {
        let k = self.maps.len() + 1;
        if !(w.im > 0.0) {
            w.im = self.lift * scale;
            self.lifted.push(k);
        }
        let map = SlitMap::fit(w, self.kind).map_err(|e| e.at(k))?;
        let last = self.times.len() - 1;
        let t = self.times[last] + map.dt();
        let u = self.values[last] + map.du();
        if t > self.times[last] {
            self.times.push(t);
            self.values.push(u);
        } else {
            self.values[last] = u;
            self.merged.push(k);
        }
        self.maps.push(map);
        Ok(())
    }

    fn finish(self) -> Result<Extraction> {
        Ok(Extraction {
            path: DrivingPath::new(self.times, self.values, None)?,
            maps: self.maps,
            lifted: self.lifted,
            merged: self.merged,
        })
    }
}

/// O(N^2) extraction by full nested unzipping of every point.
pub fn extract_naive(curve: &CurveInput, kind: SlitKind) -> Result<Extraction> {
    extract_naive_with_lift(curve, kind, DEFAULT_LIFT)
}

pub fn extract_naive_with_lift(curve: &CurveInput, kind: SlitKind, lift: f64) -> Result<Extraction> {
    let scale = curve.scale();
    let mut unz = Unzipper::new(kind, lift, curve.len());
    for (k, &z) in curve.points.iter().enumerate().skip(1) {
        let mut w = z;
        for h in &unz.maps {
            w = h.apply_h(w).map_err(|e| e.at(k))?;
        }
        unz.push(w, scale)?;
    }
    unz.finish()
}

/// Extraction with completed blocks `H_j = h_(jb) o ... o h_((j-1)b+1)`
/// collapsed into series; a block's series is used whenever its argument
/// clears `|z - c_j| >= L R_j`, where the disc about the real point `c_j`
/// of radius `R_j` holds the block's points as seen after the earlier
/// blocks.
pub fn extract_blocked(curve: &CurveInput, kind: SlitKind, params: BlockParams) -> Result<Extraction> {
    extract_blocked_with_lift(curve, kind, params, DEFAULT_LIFT)
}

pub fn extract_blocked_with_lift(
    curve: &CurveInput,
    kind: SlitKind,
    params: BlockParams,
    lift: f64,
) -> Result<Extraction> {
    let scale = curve.scale();
    let b = params.resolve_block_size(curve.len() - 1);
    let mut plan = BlockPlan::empty(b, params.order, params.gate)?;
    let mut unz = Unzipper::new(kind, lift, curve.len());
    // images of the open block's points under the completed blocks; the
    // block's first point maps to the origin
    let mut images: Vec<Complex64> = Vec::with_capacity(b + 1);
    images.push(Complex64::new(0.0, 0.0));
    for (k, &z) in curve.points.iter().enumerate().skip(1) {
        let mut w = z;
        for block in &plan.blocks {
            w = apply_block_h(&plan, block, &unz.maps, w).map_err(|e| e.at(k))?;
        }
        images.push(w);
        for h in &unz.maps[plan.covered()..] {
            w = h.apply_h(w).map_err(|e| e.at(k))?;
        }
        unz.push(w, scale)?;
        if unz.maps.len() - plan.covered() == b {
            let members = plan.covered()..unz.maps.len();
            let mut acc = HatSeries::of_map(&unz.maps[members.start], Direction::Inverse, plan.order);
            for h in &unz.maps[members.start + 1..members.end] {
                acc = HatSeries::of_map(h, Direction::Inverse, plan.order).compose(&acc);
            }
            let (center, radius) = inverse_footprint(&images)?;
            plan.blocks.push(Block::new(acc, members, center, radius));
            images.clear();
            images.push(Complex64::new(0.0, 0.0));
        }
    }
    unz.finish()
}

#[inline]
fn apply_block_h(plan: &BlockPlan, block: &Block, maps: &[SlitMap], mut w: Complex64) -> Result<Complex64> {
    if plan.gated(block, w) {
        return block.eval(w);
    }
    for h in &maps[block.members.clone()] {
        w = h.apply_h(w)?;
    }
    Ok(w)
}

/// Naive when `params` is `None`, blocked otherwise.
pub fn extract(curve: &CurveInput, kind: SlitKind, params: Option<BlockParams>) -> Result<Extraction> {
    match params {
        Some(p) => extract_blocked(curve, kind, p),
        None => extract_naive(curve, kind),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sanitize_rules() {
        let clean = vec![c(0.0, 0.0), c(0.1, 0.5), c(0.2, 0.9)];
        let (curve, report) = sanitize(clean.clone(), DEFAULT_LIFT, CurveSource::Synthetic).unwrap();
        assert_eq!(curve.points(), clean.as_slice());
        assert!(report.is_empty());

        let walk = vec![c(0.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(1.0, 2.0)];
        let (curve, report) = sanitize(walk.clone(), DEFAULT_LIFT, CurveSource::Lattice).unwrap();
        assert_eq!(curve.points(), walk.as_slice());
        assert!(report.is_empty());

        let low = vec![c(0.0, 0.0), c(1.0, 1.0), c(3.0, 0.0)];
        let (curve, report) = sanitize(low, 1e-9, CurveSource::Synthetic).unwrap();
        let scale = 3.0;
        assert_eq!(curve.points()[2], c(3.0, 1e-9 * scale));
        assert_eq!(report, vec![Repair::Lifted { index: 2, from: 0.0 }]);

        let dup = vec![c(0.0, 0.0), c(1.0, 1.0), c(1.0, 1.0), c(1.0, 2.0)];
        let (curve, report) = sanitize(dup, 1e-9, CurveSource::Synthetic).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(report, vec![Repair::Dropped { index: 2 }]);

        assert!(sanitize(vec![c(0.0, 0.0)], 1e-9, CurveSource::File).is_err());
        assert!(sanitize(vec![c(1.0, 0.0), c(1.0, 1.0)], 1e-9, CurveSource::File).is_err());
    }

    #[test]
    fn vertical_segment_has_zero_driver() {
        let dt = 0.01;
        let pts: Vec<_> = (0..=30).map(|k| c(0.0, 2.0 * (k as f64 * dt).sqrt())).collect();
        let curve = CurveInput::new(pts, CurveSource::Synthetic).unwrap();
        let ex = extract_naive(&curve, SlitKind::Vertical).unwrap();
        for (k, (&t, &u)) in ex.path.times().iter().zip(ex.path.values()).enumerate() {
            assert_eq!(u, 0.0);
            assert!((t - k as f64 * dt).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_blocks_match_naive_bitwise() {
        let pts: Vec<_> = (0..=40)
            .map(|k| {
                let s = k as f64 / 40.0;
                c(0.3 * libm::sin(6.0 * s), s + 0.2 * s * s)
            })
            .collect();
        let curve = CurveInput::new(pts, CurveSource::Synthetic).unwrap();
        for kind in [SlitKind::Vertical, SlitKind::Tilted] {
            let naive = extract_naive(&curve, kind).unwrap();
            let params = BlockParams {
                block_size: Some(1),
                order: 12,
                gate: f64::INFINITY,
            };
            let blocked = extract_blocked(&curve, kind, params).unwrap();
            assert_eq!(naive.path, blocked.path);
        }
    }
}
