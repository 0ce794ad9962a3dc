//! Truncated power series of `hat(f)(z) = 1 / f(1 / z)`.
//!
//! For maps normalised like `f(z) = z + O(1)` at infinity, `hat(f)` is
//! analytic near the origin with `hat(f)(0) = 0`, `hat(f)'(0) = 1`, and
//! composition commutes with the transform:
//! `hat(f1 o f2) = hat(f1) o hat(f2)`. A block of many elementary maps can
//! therefore be collapsed into a single truncated series, evaluated as
//! `f(z) ~ 1 / S(1 / z)` whenever `|z|` clears the block's gate.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::slitmap::{SlitKind, SlitMap};

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 12;
/// Default gate multiplier.
pub const DEFAULT_GATE: f64 = 4.0;

/// Which map of a slit pair to expand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `hat(f)` of the slit-opening map (forward solver).
    Forward,
    /// `hat(h)` of the slit-closing map (inverse solver).
    Inverse,
}

/// Coefficients `a_0 ..= a_n` of `hat(f)` plus the radius `R` such that the
/// series converges on `|z| < 1 / R`.
#[derive(Clone, Debug, PartialEq)]
pub struct HatSeries {
    coeffs: Vec<f64>,
    radius: f64,
}

impl HatSeries {
    pub fn identity(order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[1] = 1.0;
        HatSeries {
            coeffs,
            radius: 0.0,
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>, radius: f64) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::TooFew {
                needed: 3,
                got: coeffs.len(),
            });
        }
        if coeffs[0] != 0.0 || coeffs[1] != 1.0 {
            return Err(Error::Domain {
                name: "leading coefficients",
                value: coeffs[1],
            });
        }
        Ok(HatSeries { coeffs, radius })
    }

    pub fn of_map(map: &SlitMap, direction: Direction, order: usize) -> Self {
        assert!(order >= 2, "series order must be at least 2");
        let n = order;
        let dt = map.dt();
        let du = map.du();
        let body = match (map.kind(), direction) {
            (SlitKind::Vertical, Direction::Forward) => {
                // z / (du z + sqrt(1 - 4 dt z^2))
                let mut d = pow_unit(&[1.0, 0.0, -4.0 * dt], 0.5, n);
                d[1] += du;
                recip(&d, n)
            }
            (SlitKind::Vertical, Direction::Inverse) => {
                // z ((1 - du z)^2 + 4 dt z^2)^(-1/2)
                pow_unit(&[1.0, -2.0 * du, du * du + 4.0 * dt], -0.5, n)
            }
            (SlitKind::Tilted, Direction::Forward) => {
                // z (1 + x_r z)^(alpha - 1) (1 - x_l z)^(-alpha)
                let a = map.alpha();
                let left = pow_unit(&[1.0, map.x_right()], a - 1.0, n);
                let right = pow_unit(&[1.0, -map.x_left()], -a, n);
                mul_trunc(&left, &right, n)
            }
            (SlitKind::Tilted, Direction::Inverse) => {
                return HatSeries::of_map(map, Direction::Forward, order).revert();
            }
        };
        let mut coeffs = vec![0.0; n + 1];
        coeffs[1..].copy_from_slice(&body[..n]);
        coeffs[1] = 1.0;
        let radius = match direction {
            Direction::Forward => radius_forward(core::slice::from_ref(map)),
            Direction::Inverse => map.tip().norm(),
        };
        HatSeries { coeffs, radius }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `R`: the series converges on `|z| < 1 / R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// `self o inner`, truncated at the common order.
    ///
    /// The radius of the result is only provisional (the larger operand
    /// radius); block builders overwrite it with the block radius.
    pub fn compose(&self, inner: &HatSeries) -> HatSeries {
        assert_eq!(self.order(), inner.order(), "series orders differ");
        let n = self.order();
        let mut out = vec![0.0; n + 1];
        compose_into(&self.coeffs, &inner.coeffs, &mut out);
        HatSeries {
            coeffs: out,
            radius: self.radius.max(inner.radius),
        }
    }

    /// Series of `z -> f(z + shift)`: the same map expanded about `shift`.
    pub fn shifted(&self, shift: f64) -> HatSeries {
        if shift == 0.0 {
            return self.clone();
        }
        // hat of the translation is u / (1 + shift u)
        let n = self.order();
        let mut t = vec![0.0; n + 1];
        let mut p = 1.0;
        for tk in t[1..].iter_mut() {
            *tk = p;
            p *= -shift;
        }
        let mut out = vec![0.0; n + 1];
        compose_into(&self.coeffs, &t, &mut out);
        out[0] = 0.0;
        out[1] = 1.0;
        HatSeries {
            coeffs: out,
            radius: self.radius,
        }
    }

    /// Compositional inverse through the same order (Lagrange inversion).
    pub fn revert(&self) -> HatSeries {
        let n = self.order();
        // phi = z / S(z) as a series with phi(0) = 1
        let shifted: Vec<f64> = self.coeffs[1..].to_vec();
        let phi = recip(&shifted, n - 1);
        let mut out = vec![0.0; n + 1];
        out[1] = 1.0;
        // [z^k] S^-1 = (1/k) [w^(k-1)] phi^k
        let mut power = phi.clone();
        for k in 2..=n {
            power = mul_trunc(&power, &phi, n - 1);
            out[k] = power[k - 1] / k as f64;
        }
        HatSeries {
            coeffs: out,
            radius: 0.0,
        }
    }

    /// The truncated series itself at `w`.
    pub fn eval_hat(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(self.coeffs[self.order()], 0.0);
        for &a in self.coeffs[..self.order()].iter().rev() {
            acc = acc * w + a;
        }
        acc
    }

    /// `f(z) ~ [sum_j a_j z^-j]^-1`, valid when `|z|` is well outside `R`.
    ///
    /// The real polynomial `1 + a_2 u + ... + a_n u^(n-1)` at `u = 1 / z` is
    /// evaluated by remaindering against `(x - u)(x - conj u)`.
    #[inline]
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let c = &self.coeffs[1..];
        let m = c.len() - 1;
        let s = 1.0 / z.norm_sqr();
        let u = Complex64::new(z.re * s, -z.im * s);
        let r = 2.0 * u.re;
        let (mut b1, mut b2) = (c[m], 0.0);
        for &ck in c[1..m].iter().rev() {
            let b0 = ck + r * b1 - s * b2;
            b2 = b1;
            b1 = b0;
        }
        let den = Complex64::new(c[0] - s * b2 + u.re * b1, u.im * b1);
        if den.re.abs().max(den.im.abs()) < 1e-300 {
            return Err(Error::GateMisuse { modulus: z.norm() });
        }
        Ok(z * den.conj() * (1.0 / den.norm_sqr()))
    }
}

/// `a o b` for coefficient slices with `b[0] = 0`, truncated to `out.len()`.
fn compose_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = out.len() - 1;
    out.iter_mut().for_each(|x| *x = 0.0);
    out[0] = a[n];
    let mut tmp = vec![0.0; n + 1];
    for j in (0..n).rev() {
        // out = out * b + a_j; b has no constant term
        for k in (1..=n).rev() {
            let mut s = 0.0;
            for i in 0..k {
                s += out[i] * b[k - i];
            }
            tmp[k] = s;
        }
        tmp[0] = a[j];
        out.copy_from_slice(&tmp);
    }
}

/// Product of two series truncated at order `n`; missing coefficients are zero.
fn mul_trunc(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (i, &ai) in a.iter().enumerate().take(n + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `A^p` through order `n` for a series with `A(0) = 1`.
fn pow_unit(a: &[f64], p: f64, n: usize) -> Vec<f64> {
    debug_assert_eq!(a[0], 1.0);
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for k in 1..=n {
        let mut s = 0.0;
        for j in 1..=k.min(a.len() - 1) {
            s += ((p + 1.0) * j as f64 - k as f64) * a[j] * b[k - j];
        }
        b[k] = s / k as f64;
    }
    b
}

/// `1 / A` through order `n` for `A(0) != 0`.
fn recip(a: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    let inv0 = 1.0 / a[0];
    c[0] = inv0;
    for k in 1..=n {
        let mut s = 0.0;
        for j in 1..=k.min(a.len() - 1) {
            s += a[j] * c[k - j];
        }
        c[k] = -s * inv0;
    }
    c
}

/// Smallest real interval holding every real singularity of the hat series
/// of the forward block `maps[0] o maps[1] o ... o maps[last]`.
///
/// Each slit-opening map is real and increasing on the real axis outside
/// its preimage interval, so the real set where the composition fails to be
/// real can be pulled back endpoint by endpoint. The real preimage of `0`
/// is tracked too: where the composition vanishes, `hat(F)` has a pole.
pub fn forward_footprint(maps: &[SlitMap]) -> (f64, f64) {
    let Some(first) = maps.first() else {
        return (0.0, 0.0);
    };
    let (mut lo, mut hi) = first.preimage_interval();
    let mut zero = first.h_real(0.0);
    for m in &maps[1..] {
        let (p, q) = m.preimage_interval();
        lo = p.min(m.h_real(lo));
        hi = q.max(m.h_real(hi));
        zero = m.h_real(zero);
    }
    (lo.min(zero), hi.max(zero))
}

/// Radius of the forward block `maps[0] o maps[1] o ... o maps[last]`.
pub fn radius_forward(maps: &[SlitMap]) -> f64 {
    let (lo, hi) = forward_footprint(maps);
    (-lo).max(hi)
}

/// Radius by bisection on the realness of `F(x)` and `F(-x)`.
///
/// `eval` evaluates the block exactly; `scale` sets the bracket tolerance.
/// The indicator is only monotone when the real set where `F` is not real
/// is an interval, which holds for single slits and for blocks whose slits
/// are all attached to one another.
pub fn radius_forward_bisect<F>(eval: F, scale: f64) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    let tol = 1e-10 * scale;
    let is_real = |x: f64| eval(x).im.abs() <= tol && eval(-x).im.abs() <= tol;
    let limit = 1e6 * scale;
    let mut hi = 1e-3 * scale;
    while !is_real(hi) {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::BracketNotFound { limit });
        }
    }
    let mut lo = 0.5 * hi;
    if is_real(lo) {
        return Ok(lo);
    }
    while hi - lo > 1e-9 * scale {
        let mid = 0.5 * (lo + hi);
        if is_real(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Block radius for the inverse solver: the largest image modulus.
pub fn radius_inverse(images: &[Complex64]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    Ok(images.iter().map(|w| w.norm()).fold(0.0, f64::max))
}

/// Real center and radius of a disc around the inverse block's images.
pub fn inverse_footprint(images: &[Complex64]) -> Result<(f64, f64)> {
    if images.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let (lo, hi) = images
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| (lo.min(w.re), hi.max(w.re)));
    let center = 0.5 * (lo + hi);
    let radius = images.iter().map(|w| (w - center).norm()).fold(0.0, f64::max);
    Ok((center, radius))
}

/// One collapsed block: the member maps and their composition expanded
/// about the real point `center`, converging for `|z - center| > radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub series: HatSeries,
    pub members: Range<usize>,
    pub center: f64,
    pub radius: f64,
}

impl Block {
    /// `series` is the hat series of the block about the origin.
    pub fn new(series: HatSeries, members: Range<usize>, center: f64, radius: f64) -> Self {
        Block {
            series: series.shifted(center).with_radius(radius),
            members,
            center,
            radius,
        }
    }

    /// Series evaluation; only meaningful for gated arguments.
    #[inline]
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.series.eval(z - self.center)
    }
}

/// Grouping of elementary maps into blocks of `block_size` with series of
/// order `order` and gate multiplier `gate`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPlan {
    pub block_size: usize,
    pub order: usize,
    pub gate: f64,
    pub blocks: Vec<Block>,
}

impl BlockPlan {
    pub fn empty(block_size: usize, order: usize, gate: f64) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::Domain {
                name: "block_size",
                value: 0.0,
            });
        }
        if order < 2 {
            return Err(Error::Domain {
                name: "order",
                value: order as f64,
            });
        }
        if !(gate > 1.0) {
            return Err(Error::Domain {
                name: "gate",
                value: gate,
            });
        }
        Ok(BlockPlan {
            block_size,
            order,
            gate,
            blocks: Vec::new(),
        })
    }

    /// Blocks `F_j = f_(jb+1) o ... o f_((j+1)b)` over every full block of
    /// `maps`; a trailing partial block is left to direct evaluation.
    pub fn forward(maps: &[SlitMap], block_size: usize, order: usize, gate: f64) -> Result<Self> {
        let mut plan = Self::empty(block_size, order, gate)?;
        let full = maps.len() / block_size;
        plan.blocks.reserve(full);
        for j in 0..full {
            let members = j * block_size..(j + 1) * block_size;
            let chunk = &maps[members.clone()];
            let mut acc = HatSeries::of_map(&chunk[chunk.len() - 1], Direction::Forward, order);
            for m in chunk[..chunk.len() - 1].iter().rev() {
                acc = HatSeries::of_map(m, Direction::Forward, order).compose(&acc);
            }
            let (lo, hi) = forward_footprint(chunk);
            plan.blocks.push(Block::new(acc, members, 0.5 * (lo + hi), 0.5 * (hi - lo)));
        }
        Ok(plan)
    }

    /// Maps covered by full blocks.
    pub fn covered(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.members.end)
    }

    #[inline]
    pub fn gated(&self, block: &Block, z: Complex64) -> bool {
        let r = self.gate * block.radius;
        (z - block.center).norm_sqr() >= r * r
    }
}
