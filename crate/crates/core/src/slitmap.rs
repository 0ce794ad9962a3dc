//! Exactly solvable single-step Loewner maps.
//!
//! Every step of either solver is one of two explicit conformal maps. In the
//! normalisation used throughout the crate a map comes in a pair:
//!
//! * `h` sends `H` minus a short slit onto `H`, sends the tip of the slit to
//!   the origin, and behaves like `h(z) = z - du + 2 dt / z + O(z^-2)`;
//! * `f = h^-1` opens the slit and sends the origin to its tip.
//!
//! `dt` is the Loewner time of the step (the slit has half-plane capacity
//! `2 dt`) and `du` is the change of the driving function over the step.
//!
//! The vertical slit uses a driver that jumps to `du` at once, so the slit
//! rises from the real point `du`. The tilted slit is the self-similar
//! solution for `U_s = c_alpha sqrt(s)` and rises from the origin at angle
//! `alpha * pi`.

use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_positive, Error, Result};

/// Smallest slit angle (in units of `pi`) produced by [`SlitMap::fit`].
pub const ALPHA_MIN: f64 = 1e-4;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlitKind {
    Vertical,
    Tilted,
}

impl core::str::FromStr for SlitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertical" | "v" => Ok(SlitKind::Vertical),
            "tilted" | "t" => Ok(SlitKind::Tilted),
            _ => Err(Error::Domain {
                name: "kind",
                value: f64::NAN,
            }),
        }
    }
}

impl core::fmt::Display for SlitKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            SlitKind::Vertical => "vertical",
            SlitKind::Tilted => "tilted",
        })
    }
}

/// Which of the two angles shares a given `kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleBranch {
    /// `alpha < 1/2`: the slit leans right and the driver increases.
    BelowHalf,
    /// `alpha > 1/2`: the slit leans left and the driver decreases.
    AboveHalf,
}

/// Driving coefficient of the tilted slit: `U_t = c_alpha sqrt(t)`.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(2.0 * (1.0 - 2.0 * alpha) / libm::sqrt(alpha * (1.0 - alpha)))
}

/// `kappa = 4 (2 alpha - 1)^2 / (alpha (1 - alpha))`, which is `c_alpha^2`.
pub fn kappa_from_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let d = 2.0 * alpha - 1.0;
    Ok(4.0 * d * d / (alpha * (1.0 - alpha)))
}

pub fn alpha_from_kappa(kappa: f64, branch: AngleBranch) -> Result<f64> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::Domain {
            name: "kappa",
            value: kappa,
        });
    }
    let u = libm::sqrt(kappa / (kappa + 16.0));
    Ok(match branch {
        AngleBranch::BelowHalf => 0.5 * (1.0 - u),
        AngleBranch::AboveHalf => 0.5 * (1.0 + u),
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "alpha",
            value: alpha,
        })
    }
}

/// Angle solving `du = c_alpha sqrt(dt)` in closed form.
fn alpha_for_ratio(c: f64) -> f64 {
    let u = c / libm::sqrt(c * c + 16.0);
    0.5 * (1.0 - u)
}

/// Square root of `a` in the closed upper half-plane; on the real axis the
/// sign follows `hint`.
#[inline]
fn sqrt_upper(a: Complex64, hint: f64) -> Complex64 {
    let (x, y) = (a.re, a.im);
    let r = libm::sqrt(x * x + y * y);
    let r = if r.is_finite() { r } else { libm::hypot(x, y) };
    let t = libm::sqrt(0.5 * (r + libm::fabs(x)));
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if x < 0.0 {
        Complex64::new(0.5 * y / t, t)
    } else if y == 0.0 {
        Complex64::new(if hint < 0.0 { -t } else { t }, 0.0)
    } else {
        Complex64::new(libm::copysign(t, y), 0.5 * libm::fabs(y) / t)
    }
}

/// Logarithm with the argument taken in `[0, pi]`, continued from the upper
/// half-plane onto the real axis.
#[inline]
fn log_upper(u: Complex64) -> Complex64 {
    let im = if u.im > 0.0 { u.im } else { 0.0 };
    Complex64::new(libm::log(u.norm()), libm::atan2(im, u.re))
}

/// One step of the discretised Loewner chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitMap {
    kind: SlitKind,
    dt: f64,
    du: f64,
    alpha: f64,
    x_left: f64,
    x_right: f64,
}

impl SlitMap {
    pub fn new(kind: SlitKind, du: f64, dt: f64) -> Result<Self> {
        match kind {
            SlitKind::Vertical => Self::vertical(du, dt),
            SlitKind::Tilted => Self::tilted(du, dt),
        }
    }

    /// Vertical slit from `du` to `du + 2i sqrt(dt)`.
    pub fn vertical(du: f64, dt: f64) -> Result<Self> {
        check_positive("dt", dt)?;
        if !du.is_finite() {
            return Err(Error::Domain {
                name: "du",
                value: du,
            });
        }
        let r = 2.0 * libm::sqrt(dt);
        Ok(SlitMap {
            kind: SlitKind::Vertical,
            dt,
            du,
            alpha: 0.5,
            x_left: r,
            x_right: r,
        })
    }

    /// Tilted slit whose driver moves by `du` over Loewner time `dt`.
    pub fn tilted(du: f64, dt: f64) -> Result<Self> {
        check_positive("dt", dt)?;
        if !du.is_finite() {
            return Err(Error::Domain {
                name: "du",
                value: du,
            });
        }
        let alpha = alpha_for_ratio(du / libm::sqrt(dt));
        let mut map = Self::tilted_with_angle(alpha, dt)?;
        // keep the caller's increment bit-for-bit; the closed form agrees to rounding
        map.du = du;
        Ok(map)
    }

    /// Tilted slit at angle `alpha * pi` with capacity `2 dt`.
    pub fn tilted_with_angle(alpha: f64, dt: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("dt", dt)?;
        let s = 2.0 * libm::sqrt(dt);
        Ok(SlitMap {
            kind: SlitKind::Tilted,
            dt,
            du: c_alpha(alpha)? * libm::sqrt(dt),
            alpha,
            x_left: s * libm::sqrt(alpha / (1.0 - alpha)),
            x_right: s * libm::sqrt((1.0 - alpha) / alpha),
        })
    }

    /// The map whose tip is `w`.
    ///
    /// Tilted fits clamp the angle to `[ALPHA_MIN, 1 - ALPHA_MIN]`, so for
    /// nearly real `w` the tip is only approximately matched.
    pub fn fit(w: Complex64, kind: SlitKind) -> Result<Self> {
        if !(w.im > 0.0) || !w.re.is_finite() || !w.im.is_finite() {
            return Err(Error::NotInUpperHalfPlane { point: w });
        }
        match kind {
            SlitKind::Vertical => Self::vertical(w.re, 0.25 * w.im * w.im),
            SlitKind::Tilted => {
                let alpha = (libm::atan2(w.im, w.re) / PI).clamp(ALPHA_MIN, 1.0 - ALPHA_MIN);
                let unit = unit_tip_modulus(alpha);
                let scale = w.norm() / unit;
                Self::tilted_with_angle(alpha, scale * scale)
            }
        }
    }

    pub fn kind(&self) -> SlitKind {
        self.kind
    }

    /// Loewner time of the step; the slit has capacity `2 * dt`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Driving increment over the step.
    pub fn du(&self) -> f64 {
        self.du
    }

    /// Slit angle in units of `pi` (`1/2` for vertical slits).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    /// Real point the slit rises from.
    pub fn base(&self) -> f64 {
        match self.kind {
            SlitKind::Vertical => self.du,
            SlitKind::Tilted => 0.0,
        }
    }

    /// Real interval that `f` folds onto the slit.
    pub fn preimage_interval(&self) -> (f64, f64) {
        match self.kind {
            SlitKind::Vertical => (-self.x_left, self.x_right),
            // the tilted interval [-x_l, x_r] shifted by -du is [-x_r, x_l]
            SlitKind::Tilted => (-self.x_right, self.x_left),
        }
    }

    /// Radius of the disc outside which `f` is analytic.
    pub fn radius(&self) -> f64 {
        self.x_left.max(self.x_right)
    }

    pub fn tip(&self) -> Complex64 {
        match self.kind {
            SlitKind::Vertical => Complex64::new(self.du, 2.0 * libm::sqrt(self.dt)),
            SlitKind::Tilted => {
                let a = self.alpha;
                let rho = libm::pow(self.x_right, 1.0 - a) * libm::pow(self.x_left, a);
                Complex64::from_polar(rho, PI * a)
            }
        }
    }

    /// Member of the same one-parameter family at Loewner time `s`.
    pub fn family_member(&self, s: f64) -> Result<Self> {
        match self.kind {
            SlitKind::Vertical => Self::vertical(self.du, s),
            SlitKind::Tilted => Self::tilted_with_angle(self.alpha, s),
        }
    }

    /// `f(z)`: opens the slit, sends `0` to the tip.
    #[inline]
    pub fn apply_f(&self, z: Complex64) -> Complex64 {
        match self.kind {
            SlitKind::Vertical => {
                sqrt_upper(z * z - 4.0 * self.dt, z.re) + self.du
            }
            SlitKind::Tilted => {
                // p^(1 - a) q^a = p (q / p)^a, and q / p stays in the upper
                // half-plane
                let zeta = z + self.du;
                let p = zeta + self.x_left;
                let q = zeta - self.x_right;
                p * (log_upper(q / p) * self.alpha).exp()
            }
        }
    }

    /// `h(z)`: closes the slit, sends the tip to `0`.
    #[inline]
    pub fn apply_h(&self, z: Complex64) -> Result<Complex64> {
        match self.kind {
            SlitKind::Vertical => Ok(self.vertical_h(z)),
            SlitKind::Tilted => self.tilted_h(z),
        }
    }

    #[inline]
    fn vertical_h(&self, z: Complex64) -> Complex64 {
        let u = z - self.du;
        sqrt_upper(u * u + 4.0 * self.dt, u.re)
    }

    fn tilted_h(&self, w: Complex64) -> Result<Complex64> {
        let target = log_upper(w);
        // start from the vertical slit that shares this tip
        let tip = self.tip();
        let u = w - tip.re;
        let guess = sqrt_upper(u * u + tip.im * tip.im, u.re) + self.du;
        let (mut zeta, mut ok) = self.tilted_newton(guess, target);
        if !ok {
            // the guess can start on the wrong side of a leaning slit; retry
            // from its mirror image about the preimage of the tip
            let crit = (1.0 - self.alpha) * self.x_right - self.alpha * self.x_left;
            let mirrored = Complex64::new(2.0 * crit - guess.re, guess.im);
            // near the real axis, start above the real preimage
            let grounded = Complex64::new(self.tilted_real_preimage(w.re), w.im);
            for start in [mirrored, grounded] {
                let (z2, ok2) = self.tilted_newton(start, target);
                if ok2 {
                    zeta = z2;
                    ok = true;
                    break;
                }
            }
        }
        if !ok {
            (zeta, ok) = self.tilted_h_along_ray(w);
        }
        let g = zeta - self.du;
        if ok {
            Ok(g)
        } else {
            Err(Error::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                last: g,
            })
        }
    }

    /// Continuation along the ray from the slit base through `w`, which
    /// never meets the slit; far out the preimage is close to `w`.
    fn tilted_h_along_ray(&self, w: Complex64) -> (Complex64, bool) {
        let far = 8.0 * self.tip().norm().max(w.norm());
        let mut s = far / w.norm();
        let mut zeta = w * s;
        let mut ok = false;
        while s > 1.0 {
            s = (s * 0.7).max(1.0);
            (zeta, ok) = self.tilted_newton(zeta, log_upper(w * s));
        }
        (zeta, ok)
    }

    /// Damped Newton on the log form in the chart `xi = log(zeta - e)`,
    /// `e` the interval end nearer `start`; returns the last iterate and
    /// whether it converged.
    ///
    /// In that chart the equation is close to linear both near `e` and far
    /// away, and roots far closer to `e` than one ulp stay representable.
    fn tilted_newton(&self, start: Complex64, target: Complex64) -> (Complex64, bool) {
        let a = self.alpha;
        let width = self.x_left + self.x_right;
        let left = (start + self.x_left).norm() <= (start - self.x_right).norm();
        let (anchor, near, far, gap) = if left {
            (-self.x_left, 1.0 - a, a, -width)
        } else {
            (self.x_right, a, 1.0 - a, width)
        };
        // log F = near xi + far log(e^xi + gap)
        let eval = |xi: Complex64| {
            let e = xi.exp();
            let value = xi * near + log_upper(e + gap) * far;
            let slope = near + far * e / (e + gap);
            (value, slope)
        };
        let offset = start - anchor;
        let mut xi = if offset.norm() > 0.0 {
            log_upper(offset)
        } else {
            Complex64::new(libm::log(width) - 30.0, 0.5 * core::f64::consts::PI)
        };
        let (mut value, mut slope) = eval(xi);
        let mut resid = (value - target).norm();
        for _ in 0..NEWTON_MAX_ITER {
            if resid <= 1e-15 {
                break;
            }
            let step = (value - target) / slope;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = xi - step * lambda;
                if trial.im >= 0.0 && trial.im <= core::f64::consts::PI {
                    let (v, s) = eval(trial);
                    let r = (v - target).norm();
                    if r < resid {
                        xi = trial;
                        value = v;
                        slope = s;
                        resid = r;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted || (step * lambda).norm() <= 1e-16 * xi.norm().max(1.0) {
                break;
            }
        }
        (xi.exp() + anchor, resid <= NEWTON_TOL)
    }

    /// `h` restricted to the real axis away from the slit base.
    ///
    /// Returns the real preimage under `f`: values left of [`Self::base`]
    /// land at or left of the interval start, values right of it at or right
    /// of the interval end.
    pub fn h_real(&self, y: f64) -> f64 {
        match self.kind {
            SlitKind::Vertical => {
                let u = y - self.du;
                let s = libm::sqrt(u * u + 4.0 * self.dt);
                if u < 0.0 {
                    -s
                } else {
                    s
                }
            }
            SlitKind::Tilted => self.tilted_real_preimage(y) - self.du,
        }
    }

    fn tilted_real_preimage(&self, y: f64) -> f64 {
        // |F| on the outer rays, written in terms of the distance s past the
        // near interval end: right ray s = zeta - x_r, left ray s = -x_l - zeta
        let a = self.alpha;
        let (near, far, w_near, w_far, target, sign) = if y >= 0.0 {
            (self.x_right, self.x_left, a, 1.0 - a, y, 1.0)
        } else {
            (self.x_left, self.x_right, 1.0 - a, a, -y, -1.0)
        };
        if target == 0.0 {
            return sign * near;
        }
        let width = near + far;
        // |F|(s) = s^w_near (s + width)^w_far, increasing, between s and s + width
        let log_mod = |s: f64| w_near * libm::log(s) + w_far * libm::log(s + width);
        let lt = libm::log(target);
        let mut lo = (target - width).max(0.0);
        let mut hi = target;
        let mut s = 0.5 * (lo + hi).max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            let v = log_mod(s) - lt;
            if v > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = w_near / s + w_far / (s + width);
            let mut next = s - v / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * s.max(1e-300) || hi - lo <= 1e-15 * hi {
                s = next;
                break;
            }
            s = next;
        }
        sign * (near + s)
    }
}

/// `|tip|` of the tilted slit with angle `alpha` and `dt = 1`.
pub fn unit_tip_modulus(alpha: f64) -> f64 {
    let r = (1.0 - alpha) / alpha;
    2.0 * libm::pow(r, 0.5 * (1.0 - 2.0 * alpha))
}

/// Central-difference residual of the Loewner equation along the map's
/// one-parameter family at interior time `t`.
///
/// `g_s = h_s + U_s` with `U_s` the driver of the family member at time `s`.
pub fn loewner_residual(map: &SlitMap, z: Complex64, t: f64, dt: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("dt", dt)?;
    if dt >= t {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
        });
    }
    let g = |s: f64| -> Result<(Complex64, f64)> {
        let m = map.family_member(s)?;
        Ok((m.apply_h(z)? + m.du(), m.du()))
    };
    let (plus, _) = g(t + dt)?;
    let (minus, _) = g(t - dt)?;
    let (mid, drive) = g(t)?;
    let lhs = (plus - minus) / (2.0 * dt);
    let rhs = 2.0 / (mid - drive);
    Ok((lhs - rhs).norm())
}
