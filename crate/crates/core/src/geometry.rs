//! Geometry of the convergence domain `Γ = {θ : spr(A(e^θ1, e^θ2)) < 1}` of
//! the interior kernel.
//!
//! `f(θ) = log spr(A(e^θ1, e^θ2))` is convex, vanishes at the origin, and `Γ`
//! is bounded for irreducible models, so every slice of `Γ` is an interval
//! found by bracketing the minimum of `f` along the slice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{QbdModel, Region, Step};
use crate::optimize::{bisect_boundary, convex_min, golden_min};
use crate::perron::perron_root;
use crate::scalar::Real;

/// Beyond this magnitude of θ the domain is treated as unbounded.
const THETA_LIMIT: f64 = 60.0;

/// The interior kernel `θ ↦ A(e^θ1, e^θ2)` with the zero blocks dropped.
#[derive(Clone, Debug)]
pub struct Kernel<T> {
    s0: usize,
    terms: Vec<(i8, i8, Matrix<T>)>,
}

impl<T: Real> Kernel<T> {
    pub fn new(model: &QbdModel<T>) -> Self {
        let terms = Step::ALL
            .into_iter()
            .map(|s| (s.i1, s.i2, model.block(Region::Interior, s).clone()))
            .filter(|(_, _, m)| !m.is_zero())
            .collect();
        Self {
            s0: model.s0(),
            terms,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            s0: self.s0,
            terms: self
                .terms
                .iter()
                .map(|(a, b, m)| (*b, *a, m.clone()))
                .collect(),
        }
    }

    pub fn matrix(&self, t1: T, t2: T) -> Matrix<T> {
        let mut out = Matrix::zeros(self.s0, self.s0);
        for (i1, i2, m) in &self.terms {
            out.add_scaled((t1 * T::lit(*i1 as f64) + t2 * T::lit(*i2 as f64)).exp(), m);
        }
        out
    }

    pub fn spr(&self, t1: T, t2: T) -> Result<T> {
        perron_root(&self.matrix(t1, t2))
    }

    /// `log spr`, or NaN when the Perron root fails to converge. Search
    /// routines propagate NaN and public entry points reject it.
    pub fn log_spr(&self, t1: T, t2: T) -> T {
        self.spr(t1, t2)
            .map(|r| r.ln())
            .unwrap_or_else(|_| T::nan())
    }

    /// `(argmin, min)` of `θ2 ↦ f(t1, θ2)`.
    pub fn inner_min(&self, t1: T) -> Result<(T, T)> {
        let tol = T::tol(1e-11);
        let found = convex_min(
            |t2| self.log_spr(t1, t2),
            T::zero(),
            T::lit(0.5),
            T::lit(THETA_LIMIT),
            tol,
        );
        match found {
            Some((x, v)) if v.is_finite() => Ok((x, v)),
            Some(_) => Err(Error::NonConvergence { what: "kernel Perron root", iterations: 0, residual: f64::NAN }),
            None => Err(Error::UnboundedDomain(format!(
                "log spr keeps decreasing in θ2 at θ1 = {t1}; the interior kernel is not irreducible"
            ))),
        }
    }

    /// `[θ1_min, θ1_max]`: the projection of `Γ` on the first axis.
    pub fn first_extremes(&self) -> Result<(T, T)> {
        // resolved to rounding so that the slice at the extreme is tangent
        let tol = T::epsilon();
        let inside = |t: T| self.inner_min(t).map(|(_, v)| v <= T::zero());
        let mut out = [T::zero(); 2];
        for (slot, sign) in out.iter_mut().zip([-T::one(), T::one()]) {
            let mut lo = T::zero();
            let mut hi = sign * T::lit(0.5);
            while inside(hi)? {
                lo = hi;
                hi *= T::lit(2.0);
                if hi.abs() > T::lit(THETA_LIMIT) {
                    return Err(Error::UnboundedDomain(format!(
                        "no extreme value of θ1 found within |θ1| ≤ {THETA_LIMIT}"
                    )));
                }
            }
            let mut err = None;
            *slot = bisect_boundary(
                |t| match inside(t) {
                    Ok(b) => b,
                    Err(e) => {
                        err.get_or_insert(e);
                        false
                    }
                },
                lo,
                hi,
                tol,
            );
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok((out[0], out[1]))
    }

    /// `(η_2(t1), η̄_2(t1))`: lower and upper solutions of `f(t1, ·) = 0`.
    pub fn eta(&self, t1: T) -> Result<(T, T)> {
        let (x, v) = self.inner_min(t1)?;
        if v > T::tol(1e-10) {
            return Err(Error::OutOfDomain {
                value: t1.as_f64(),
                lower: f64::NAN,
                upper: f64::NAN,
            });
        }
        self.roots_around(x, v, |t2| self.log_spr(t1, t2))
    }

    /// Both zeros of a convex function `g` with minimum `v ≤ 0` at `x`.
    fn roots_around(&self, x: T, v: T, g: impl Fn(T) -> T) -> Result<(T, T)> {
        if v >= T::zero() {
            return Ok((x, x));
        }
        let tol = T::tol(1e-13);
        let mut roots = [T::zero(); 2];
        for (slot, sign) in roots.iter_mut().zip([-T::one(), T::one()]) {
            let mut step = T::lit(0.25);
            let mut far = x + sign * step;
            while g(far) <= T::zero() {
                step *= T::lit(2.0);
                far = x + sign * step;
                if step > T::lit(THETA_LIMIT) {
                    return Err(Error::UnboundedDomain("level set does not close".into()));
                }
            }
            // boundary between {g ≤ 0} (towards x) and {g > 0}
            let inner = bisect_boundary(|t| g(t) <= T::zero(), x, far, tol);
            *slot = inner;
        }
        let (lo, hi) = (roots[0], roots[1]);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NonConvergence {
                what: "level-set root",
                iterations: 0,
                residual: f64::NAN,
            });
        }
        if hi - lo <= T::tol(1e-6) {
            let mid = (lo + hi) / T::lit(2.0);
            return Ok((mid, mid));
        }
        Ok((lo, hi))
    }
}

/// A point of the `(θ1, θ2)` plane.
pub type Point<T> = (T, T);

/// Extreme values and a sampled outline of `Γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaGeometry<T> {
    pub theta1_min: T,
    pub theta1_max: T,
    pub theta2_min: T,
    pub theta2_max: T,
    /// Rightmost point, `(θ1_max, ·)`.
    pub right: Point<T>,
    /// Topmost point, `(·, θ2_max)`.
    pub top: Point<T>,
    pub left: Point<T>,
    pub bottom: Point<T>,
    /// Counter-clockwise samples of the level set `spr = 1`.
    pub boundary_samples: Vec<Point<T>>,
}

/// Default number of outline samples.
pub const DEFAULT_SAMPLES: usize = 512;

/// Curve evaluations for one model and its coordinate mirror.
#[derive(Clone, Debug)]
pub struct Geometry<T> {
    pub kernel: Kernel<T>,
    pub mirror: Kernel<T>,
    pub gamma: GammaGeometry<T>,
}

impl<T: Real> Geometry<T> {
    pub fn new(model: &QbdModel<T>) -> Result<Self> {
        Self::with_samples(model, DEFAULT_SAMPLES)
    }

    pub fn with_samples(model: &QbdModel<T>, samples: usize) -> Result<Self> {
        let kernel = Kernel::new(model);
        let mirror = kernel.swapped();
        let (theta1_min, theta1_max) = kernel.first_extremes()?;
        let (theta2_min, theta2_max) = mirror.first_extremes()?;
        let at = |k: &Kernel<T>, t: T| k.inner_min(t).map(|(x, _)| x);
        let right = (theta1_max, at(&kernel, theta1_max)?);
        let left = (theta1_min, at(&kernel, theta1_min)?);
        let top = (at(&mirror, theta2_max)?, theta2_max);
        let bottom = (at(&mirror, theta2_min)?, theta2_min);
        let mut gamma = GammaGeometry {
            theta1_min,
            theta1_max,
            theta2_min,
            theta2_max,
            right,
            top,
            left,
            bottom,
            boundary_samples: Vec::new(),
        };
        gamma.boundary_samples = sample_outline(&kernel, &gamma, samples)?;
        Ok(Self {
            kernel,
            mirror,
            gamma,
        })
    }

    /// The same geometry with the coordinates exchanged.
    pub fn mirrored(&self) -> Self {
        let g = &self.gamma;
        let flip = |p: Point<T>| (p.1, p.0);
        Self {
            kernel: self.mirror.clone(),
            mirror: self.kernel.clone(),
            gamma: GammaGeometry {
                theta1_min: g.theta2_min,
                theta1_max: g.theta2_max,
                theta2_min: g.theta1_min,
                theta2_max: g.theta1_max,
                right: flip(g.top),
                top: flip(g.right),
                left: flip(g.bottom),
                bottom: flip(g.left),
                boundary_samples: g.boundary_samples.iter().rev().map(|&p| flip(p)).collect(),
            },
        }
    }

    /// `(η_2(θ1), η̄_2(θ1))`.
    pub fn eta2(&self, t1: T) -> Result<(T, T)> {
        self.check_range(t1, self.gamma.theta1_min, self.gamma.theta1_max)?;
        self.kernel
            .eta(clamp(t1, self.gamma.theta1_min, self.gamma.theta1_max))
    }

    /// `(η_1(θ2), η̄_1(θ2))`.
    pub fn eta1(&self, t2: T) -> Result<(T, T)> {
        self.check_range(t2, self.gamma.theta2_min, self.gamma.theta2_max)?;
        self.mirror
            .eta(clamp(t2, self.gamma.theta2_min, self.gamma.theta2_max))
    }

    fn check_range(&self, t: T, lo: T, hi: T) -> Result<()> {
        let slack = T::tol(1e-9);
        if t < lo - slack || t > hi + slack || !t.is_finite() {
            return Err(Error::OutOfDomain {
                value: t.as_f64(),
                lower: lo.as_f64(),
                upper: hi.as_f64(),
            });
        }
        Ok(())
    }

    /// `(θ_c^min, θ_c^max)` together with the minimizing and maximizing points.
    pub fn directional_extremes(&self, c: (u32, u32)) -> Result<DirectionalExtremes<T>> {
        let g = &self.gamma;
        let (c1, c2) = (T::lit(c.0 as f64), T::lit(c.1 as f64));
        if c.0 == 0 && c.1 == 0 {
            return Err(Error::InvalidParameter("direction must be nonzero".into()));
        }
        if c.1 == 0 {
            return Ok(DirectionalExtremes {
                min: c1 * g.theta1_min,
                max: c1 * g.theta1_max,
                argmin: g.left,
                argmax: g.right,
            });
        }
        if c.0 == 0 {
            return Ok(DirectionalExtremes {
                min: c2 * g.theta2_min,
                max: c2 * g.theta2_max,
                argmin: g.bottom,
                argmax: g.top,
            });
        }
        let tol = T::tol(1e-11);
        let mut err = None;
        let mut eval = |t: T, upper: bool| match self.eta2(t) {
            Ok((lo, hi)) => c1 * t + c2 * if upper { hi } else { lo },
            Err(e) => {
                err.get_or_insert(e);
                T::nan()
            }
        };
        let (x_max, neg_max) = golden_min(|t| -eval(t, true), g.theta1_min, g.theta1_max, tol);
        let (x_min, v_min) = golden_min(|t| eval(t, false), g.theta1_min, g.theta1_max, tol);
        if let Some(e) = err {
            return Err(e);
        }
        let (_, hi_max) = self.eta2(x_max)?;
        let (lo_min, _) = self.eta2(x_min)?;
        // the endpoints of the range are candidates that golden search may miss
        let mut out = DirectionalExtremes {
            min: v_min,
            max: -neg_max,
            argmin: (x_min, lo_min),
            argmax: (x_max, hi_max),
        };
        for p in [g.left, g.right, g.top, g.bottom] {
            let v = c1 * p.0 + c2 * p.1;
            if v > out.max {
                out.max = v;
                out.argmax = p;
            }
            if v < out.min {
                out.min = v;
                out.argmin = p;
            }
        }
        Ok(out)
    }

    /// Intersections of the line `c1 θ1 + c2 θ2 = theta` with the level set:
    /// `(L, R)` with `L1 ≤ R1` and `L2 ≥ R2`. Equal at tangency.
    pub fn eta_line_roots(&self, c: (u32, u32), theta: T) -> Result<(Point<T>, Point<T>)> {
        if c.0 == 0 && c.1 == 0 {
            return Err(Error::InvalidParameter("direction must be nonzero".into()));
        }
        let (c1, c2) = (T::lit(c.0 as f64), T::lit(c.1 as f64));
        let norm2 = c1 * c1 + c2 * c2;
        // p(s) = p0 + s·(−c2, c1); increasing s moves up and to the left
        let p0 = (theta * c1 / norm2, theta * c2 / norm2);
        let point = |s: T| (p0.0 - s * c2, p0.1 + s * c1);
        let g = |s: T| {
            let p = point(s);
            self.kernel.log_spr(p.0, p.1)
        };
        let found = convex_min(
            &g,
            T::zero(),
            T::lit(0.25),
            T::lit(THETA_LIMIT),
            T::tol(1e-11),
        );
        let (x, v) = match found {
            Some((x, v)) if v.is_finite() => (x, v),
            _ => {
                return Err(Error::UnboundedDomain(
                    "log spr unbounded below along a line".into(),
                ))
            }
        };
        if v > T::tol(1e-10) {
            return Err(Error::OutOfDomain {
                value: theta.as_f64(),
                lower: f64::NAN,
                upper: f64::NAN,
            });
        }
        let (s_lo, s_hi) = self.kernel.roots_around(x, v, g)?;
        Ok((point(s_hi), point(s_lo)))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DirectionalExtremes<T> {
    pub min: T,
    pub max: T,
    pub argmin: Point<T>,
    /// The tangent point `R_c` where `c·θ` is maximal.
    pub argmax: Point<T>,
}

fn clamp<T: Real>(t: T, lo: T, hi: T) -> T {
    t.max(lo).min(hi)
}

/// Rays from an interior point to the level set, at equally spaced angles.
fn sample_outline<T: Real>(
    kernel: &Kernel<T>,
    g: &GammaGeometry<T>,
    n: usize,
) -> Result<Vec<Point<T>>> {
    let four = T::lit(4.0);
    let cx = (g.left.0 + g.right.0 + g.top.0 + g.bottom.0) / four;
    let cy = (g.left.1 + g.right.1 + g.top.1 + g.bottom.1) / four;
    let reach = (g.theta1_max - g.theta1_min).max(g.theta2_max - g.theta2_min) * T::lit(2.0);
    let tol = T::tol(1e-13);
    (0..n)
        .into_par_iter()
        .map(|k| {
            let phi = T::lit(2.0) * T::PI() * T::of_usize(k) / T::of_usize(n);
            let (dx, dy) = (phi.cos(), phi.sin());
            let inside = |r: T| kernel.log_spr(cx + r * dx, cy + r * dy) <= T::zero();
            if inside(reach) {
                return Err(Error::UnboundedDomain(
                    "outline ray did not leave the domain".into(),
                ));
            }
            let r = bisect_boundary(inside, T::zero(), reach, tol);
            Ok((cx + r * dx, cy + r * dy))
        })
        .collect()
}
