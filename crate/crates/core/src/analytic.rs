//! Matrix-analytic quantities: G- and R-matrices, the boundary matrices
//! `U_i`, the thresholds `θ_i*` and `θ_i†`, mean drifts and the stability
//! verdict.
//!
//! Everything is written for the first coordinate; the second coordinate is
//! the first coordinate of the swapped model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::linalg::{stationary_gth, Matrix};
use crate::model::{QbdModel, Region, Step};
use crate::optimize::bisect_boundary;
use crate::perron::perron_root;
use crate::scalar::Real;

const CR_MAX_ITERATIONS: usize = 64;
const FIXED_POINT_CAP: usize = 1_000_000;
/// Grid resolution of the `θ*` scan.
const STAR_GRID: usize = 64;
/// Drifts within this distance of zero count as zero.
const DRIFT_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    First,
    Second,
}

#[derive(Clone, Debug)]
pub struct GSolution<T> {
    pub g: Matrix<T>,
    pub iterations: usize,
    /// Entrywise max of `A− + A0 G + A+ G² − G`.
    pub residual: T,
}

/// Entrywise max residual of the G equation.
pub fn g_residual<T: Real>(am: &Matrix<T>, a0: &Matrix<T>, ap: &Matrix<T>, g: &Matrix<T>) -> T {
    let mut r = am.add(&a0.matmul(g));
    r.add_scaled(T::one(), &ap.matmul(&g.matmul(g)));
    r.max_abs_diff(g)
}

/// Polishing target and acceptance bound, relative to the largest block entry.
/// Close to criticality polishing converges linearly and may stall between the two.
const RESIDUAL_TARGET: f64 = 1e-13;
const RESIDUAL_ACCEPT: f64 = 1e-9;

fn residual_scale<T: Real>(am: &Matrix<T>, a0: &Matrix<T>, ap: &Matrix<T>) -> T {
    T::one()
        .max(am.max_abs())
        .max(a0.max_abs())
        .max(ap.max_abs())
}

/// Minimal nonnegative solution of `A− + A0 X + A+ X² = X` by cyclic
/// reduction, polished by the functional iteration `X ← (I − A0 − A+ X)⁻¹ A−`.
///
/// The odd/even reduction keeps `Â` accumulating `A+ (I − A0)⁻¹ A−`, and
/// `G = (I − Â)⁻¹ A−` once the coupling vanishes. Before each step `A−` and
/// `A+` are rescaled to comparable size, which is the substitution
/// `X → X/σ` and leaves `Â` unchanged.
pub fn solve_g<T: Real>(am: &Matrix<T>, a0: &Matrix<T>, ap: &Matrix<T>) -> Result<GSolution<T>> {
    check_square_triple(am, a0, ap)?;
    let n = a0.rows();
    let id = Matrix::identity(n);
    let scale = residual_scale(am, a0, ap);
    let (tol, accept) = (
        T::tol(RESIDUAL_TARGET) * scale,
        T::tol(RESIDUAL_ACCEPT) * scale,
    );
    let singular = || Error::NonConvergence {
        what: "G-matrix cyclic reduction",
        iterations: 0,
        residual: f64::INFINITY,
    };

    let (mut m, mut z, mut p) = (am.clone(), a0.clone(), ap.clone());
    let mut hat = a0.clone();
    let mut iterations = 0;
    while iterations < CR_MAX_ITERATIONS {
        iterations += 1;
        let (mm, pm) = (m.max_abs(), p.max_abs());
        if mm > T::zero() && pm > T::zero() {
            let sigma = (mm / pm).sqrt();
            m = m.scale(T::one() / sigma);
            p = p.scale(sigma);
        }
        let k = id.sub(&z).inverse().ok_or_else(singular)?;
        let mk = m.matmul(&k);
        let pk = p.matmul(&k);
        let t1 = mk.matmul(&p);
        let t2 = pk.matmul(&m);
        hat.add_scaled(T::one(), &t2);
        z.add_scaled(T::one(), &t1);
        z.add_scaled(T::one(), &t2);
        m = mk.matmul(&m);
        p = pk.matmul(&p);
        if t2.max_abs() <= T::epsilon() * T::one().max(hat.max_abs()) {
            break;
        }
    }
    let mut g = id.sub(&hat).lu().ok_or_else(singular)?.solve_matrix(am);
    let mut residual = g_residual(am, a0, ap, &g);
    let mut polish = 0;
    while residual > tol && polish < 100 {
        let step = id
            .sub(a0)
            .sub(&ap.matmul(&g))
            .lu()
            .ok_or_else(singular)?
            .solve_matrix(am);
        let r = g_residual(am, a0, ap, &step);
        polish += 1;
        if !(r < residual) {
            break;
        }
        g = step;
        residual = r;
    }
    if !(residual <= accept) {
        return Err(Error::NonConvergence {
            what: "G-matrix cyclic reduction",
            iterations: iterations + polish,
            residual: residual.as_f64(),
        });
    }
    Ok(GSolution {
        g,
        iterations: iterations + polish,
        residual,
    })
}

/// Minimal nonnegative solution by the monotone iteration
/// `X ← A− + A0 X + A+ X²` from `X = 0`. Slow near criticality; kept as an
/// independent reference for [`solve_g`].
pub fn solve_g_fixed_point<T: Real>(
    am: &Matrix<T>,
    a0: &Matrix<T>,
    ap: &Matrix<T>,
) -> Result<GSolution<T>> {
    check_square_triple(am, a0, ap)?;
    let tol = T::tol(RESIDUAL_TARGET) * residual_scale(am, a0, ap);
    let mut x = Matrix::zeros(a0.rows(), a0.cols());
    let mut residual = T::infinity();
    for it in 1..=FIXED_POINT_CAP {
        let mut next = am.add(&a0.matmul(&x));
        next.add_scaled(T::one(), &ap.matmul(&x.matmul(&x)));
        let step = next.max_abs_diff(&x);
        x = next;
        if !x.is_finite() {
            break;
        }
        // the step bounds the residual of the previous iterate; confirm on x
        if step <= tol {
            residual = g_residual(am, a0, ap, &x);
            if residual <= tol {
                return Ok(GSolution {
                    g: x,
                    iterations: it,
                    residual,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        what: "G-matrix fixed point",
        iterations: FIXED_POINT_CAP,
        residual: residual.as_f64(),
    })
}

/// Minimal nonnegative solution of `R = A+ + R A0 + R² A−`.
pub fn solve_r<T: Real>(
    a_up: &Matrix<T>,
    a_mid: &Matrix<T>,
    a_down: &Matrix<T>,
) -> Result<Matrix<T>> {
    Ok(
        solve_g(&a_up.transpose(), &a_mid.transpose(), &a_down.transpose())?
            .g
            .transpose(),
    )
}

fn check_square_triple<T: Real>(am: &Matrix<T>, a0: &Matrix<T>, ap: &Matrix<T>) -> Result<()> {
    let n = a0.rows();
    if [am, a0, ap].iter().any(|m| m.rows() != n || m.cols() != n) {
        return Err(Error::InvalidParameter(
            "G-equation coefficients must be square of equal size".into(),
        ));
    }
    if [am, a0, ap]
        .iter()
        .any(|m| !m.is_finite() || m.min_entry() < T::zero())
    {
        return Err(Error::InvalidParameter(
            "G-equation coefficients must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn oriented<T: Real>(model: &QbdModel<T>, axis: Axis) -> QbdModel<T> {
    match axis {
        Axis::First => model.clone(),
        Axis::Second => model.swapped(),
    }
}

/// `G_1(e^θ)`: the G-matrix of the interior kernel seen as a QBD in the
/// second coordinate, with the first coordinate's increments weighted by `e^θ`.
pub fn g_matrix<T: Real>(model: &QbdModel<T>, axis: Axis, theta: T) -> Result<GSolution<T>> {
    let m = oriented(model, axis);
    let z = theta.exp();
    let part = |i2| m.partial_over_first(Region::Interior, i2, z);
    solve_g(&part(-1)?, &part(0)?, &part(1)?)
}

/// `U_1(e^θ) = A^{x}_{*,0}(e^θ) + A^{x}_{*,1}(e^θ) G_1(e^θ)`.
pub fn compute_u<T: Real>(model: &QbdModel<T>, axis: Axis, theta: T) -> Result<Matrix<T>> {
    let g = g_matrix(model, axis, theta)?.g;
    let m = oriented(model, axis);
    let z = theta.exp();
    let mut u = m.partial_over_first(Region::XAxis, 0, z)?;
    u.add_scaled(
        T::one(),
        &m.partial_over_first(Region::XAxis, 1, z)?.matmul(&g),
    );
    Ok(u)
}

fn oriented_geometry<T: Real>(geometry: &Geometry<T>, axis: Axis) -> Geometry<T> {
    match axis {
        Axis::First => geometry.clone(),
        Axis::Second => geometry.mirrored(),
    }
}

/// `θ_i* = sup{θ ∈ [0, θ_i^max] : spr(U_i(e^θ)) < 1}` by a grid scan for
/// the last subcritical grid point followed by bisection.
pub fn theta_star<T: Real>(model: &QbdModel<T>, geometry: &Geometry<T>, axis: Axis) -> Result<T> {
    let hi = match axis {
        Axis::First => geometry.gamma.theta1_max,
        Axis::Second => geometry.gamma.theta2_max,
    };
    let spr_u = |t: T| compute_u(model, axis, t).and_then(|u| perron_root(&u));
    let below = |t: T| spr_u(t).map(|r| r < T::one());
    // U(1) is stochastic when the induced level process is recurrent, so the
    // sign is checked just to the right of 0
    if !below(hi / T::lit(4096.0))? {
        return Err(Error::InvalidModel(format!(
            "spr(U) along axis {axis:?} does not drop below 1 to the right of θ = 0; the induced chain is not positive recurrent"
        )));
    }
    let grid: Vec<T> = (0..=STAR_GRID)
        .map(|k| hi * T::of_usize(k) / T::of_usize(STAR_GRID))
        .collect();
    let mut last = 0;
    for (k, &t) in grid.iter().enumerate().skip(1) {
        if below(t)? {
            last = k;
        }
    }
    if last == STAR_GRID {
        return Ok(hi);
    }
    let mut err = None;
    let star = bisect_boundary(
        |t| {
            below(t).unwrap_or_else(|e| {
                err.get_or_insert(e);
                false
            })
        },
        grid[last],
        grid[last + 1],
        T::tol(1e-11),
    );
    match err {
        Some(e) => Err(e),
        None => Ok(star),
    }
}

/// `θ_1† = max{θ : η_2(θ) ≤ θ_2*}` (axis 1), given the other axis' `θ*`.
pub fn theta_dagger_coordinate<T: Real>(
    geometry: &Geometry<T>,
    axis: Axis,
    other_star: T,
) -> Result<T> {
    let g = oriented_geometry(geometry, axis);
    let hi = g.gamma.theta1_max;
    let ok = |t: T| g.eta2(t).map(|(lo, _)| lo <= other_star);
    if ok(hi)? {
        return Ok(hi);
    }
    // η_2 increases to the right of the bottom point, where it equals θ2_min < θ2*
    let lo = g.gamma.bottom.0.min(hi);
    let mut err = None;
    let out = bisect_boundary(
        |t| {
            ok(t).unwrap_or_else(|e| {
                err.get_or_insert(e);
                false
            })
        },
        lo,
        hi,
        T::tol(1e-11),
    );
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    PositiveRecurrent,
    Transient,
    Indeterminate,
}

/// Mean drifts of the induced Markov additive processes.
///
/// `a1` is the long-run drift in the first coordinate of the process that
/// keeps only the x-axis boundary. When its level process (the second
/// coordinate) is positive recurrent this comes from the stationary
/// distribution and `a1_stationary` is set; otherwise the level escapes, the
/// boundary is visited finitely often, and the long-run drift is `a12.0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanDrifts<T> {
    pub a1: T,
    pub a2: T,
    pub a12: (T, T),
    pub a1_stationary: bool,
    pub a2_stationary: bool,
}

impl<T: Real> MeanDrifts<T> {
    /// `a1` when it is defined through a stationary distribution.
    pub fn stationary_a1(&self) -> Option<T> {
        self.a1_stationary.then_some(self.a1)
    }

    pub fn stationary_a2(&self) -> Option<T> {
        self.a2_stationary.then_some(self.a2)
    }
}

/// Drift of the process without boundaries, from the stationary vector of
/// the background chain `Σ A^{1,2}`.
fn interior_drift<T: Real>(model: &QbdModel<T>) -> Result<(T, T)> {
    let pi = stationary_gth(&model.total(Region::Interior))
        .ok_or_else(|| Error::InvalidModel("interior background chain is reducible".into()))?;
    let mut d1 = Matrix::zeros(model.s0(), model.s0());
    let mut d2 = d1.clone();
    for step in Step::ALL {
        let b = model.block(Region::Interior, step);
        d1.add_scaled(T::lit(step.i1 as f64), b);
        d2.add_scaled(T::lit(step.i2 as f64), b);
    }
    let dot = |m: &Matrix<T>| pi.iter().zip(m.row_sums()).map(|(&a, b)| a * b).sum();
    Ok((dot(&d1), dot(&d2)))
}

/// Drift in the first coordinate of the process living on the x-axis side,
/// i.e. the QBD in the second coordinate whose level-0 blocks are the x-axis
/// blocks summed over the first coordinate.
fn boundary_drift<T: Real>(model: &QbdModel<T>) -> Result<Option<T>> {
    let n = model.s0();
    let sum_first = |region: Region, i2: i8| {
        let mut s = Matrix::zeros(n, n);
        for i1 in -1..=1 {
            s.add_scaled(T::one(), model.block(region, Step::new(i1, i2)));
        }
        s
    };
    let (down, mid, up) = (
        sum_first(Region::Interior, -1),
        sum_first(Region::Interior, 0),
        sum_first(Region::Interior, 1),
    );
    let (b0, b1) = (sum_first(Region::XAxis, 0), sum_first(Region::XAxis, 1));
    let r = match solve_r(&up, &mid, &down) {
        Ok(r) => r,
        Err(_) => return Ok(None),
    };
    if perron_root(&r)? >= T::one() - T::tol(1e-12) {
        return Ok(None);
    }
    let g = solve_g(&down, &mid, &up)?.g;
    // chain censored on levels {0, 1}
    let mut censored = Matrix::zeros(2 * n, 2 * n);
    let low_right = mid.add(&up.matmul(&g));
    for i in 0..n {
        for j in 0..n {
            censored[(i, j)] = b0[(i, j)];
            censored[(i, n + j)] = b1[(i, j)];
            censored[(n + i, j)] = down[(i, j)];
            censored[(n + i, n + j)] = low_right[(i, j)];
        }
    }
    let Some(pi) = stationary_gth(&censored) else {
        return Ok(None);
    };
    let (pi0, pi1) = pi.split_at(n);
    let tail = match Matrix::identity(n).sub(&r).inverse() {
        Some(inv) => inv.left_mul_vec(pi1),
        None => return Ok(None),
    };
    let mass: T = pi0.iter().copied().sum::<T>() + tail.iter().copied().sum::<T>();
    let mut jump_b = Matrix::zeros(n, n);
    let mut jump_i = Matrix::zeros(n, n);
    for step in Step::ALL {
        let w = T::lit(step.i1 as f64);
        jump_b.add_scaled(w, model.block(Region::XAxis, step));
        jump_i.add_scaled(w, model.block(Region::Interior, step));
    }
    let dot = |v: &[T], m: &Matrix<T>| v.iter().zip(m.row_sums()).map(|(&a, b)| a * b).sum::<T>();
    Ok(Some((dot(pi0, &jump_b) + dot(&tail, &jump_i)) / mass))
}

pub fn mean_drifts<T: Real>(model: &QbdModel<T>) -> Result<MeanDrifts<T>> {
    let a12 = interior_drift(model)?;
    let zero = T::lit(DRIFT_ZERO);
    let a1 = if a12.1 < -zero {
        boundary_drift(model)?
    } else {
        None
    };
    let a2 = if a12.0 < -zero {
        boundary_drift(&model.swapped())?
    } else {
        None
    };
    Ok(MeanDrifts {
        a1: a1.unwrap_or(a12.0),
        a2: a2.unwrap_or(a12.1),
        a12,
        a1_stationary: a1.is_some(),
        a2_stationary: a2.is_some(),
    })
}

/// Stability verdict from the mean drifts. Zero drifts and missing boundary
/// drifts give `Indeterminate`.
pub fn stability<T: Real>(d: &MeanDrifts<T>) -> Stability {
    let zero = T::lit(DRIFT_ZERO);
    let neg = |x: T| x < -zero;
    let pos = |x: T| x > zero;
    let nonneg = |x: T| x >= -zero;
    let by = |a: Option<T>| match a {
        Some(x) if neg(x) => Stability::PositiveRecurrent,
        Some(x) if pos(x) => Stability::Transient,
        _ => Stability::Indeterminate,
    };
    let (u, v) = d.a12;
    if (pos(u) && nonneg(v)) || (pos(v) && nonneg(u)) {
        return Stability::Transient;
    }
    match (neg(u), neg(v)) {
        (true, true) => match (by(d.stationary_a1()), by(d.stationary_a2())) {
            (Stability::PositiveRecurrent, Stability::PositiveRecurrent) => {
                Stability::PositiveRecurrent
            }
            (Stability::Transient, _) | (_, Stability::Transient) => Stability::Transient,
            _ => Stability::Indeterminate,
        },
        (false, true) if nonneg(u) => by(d.stationary_a1()),
        (true, false) if nonneg(v) => by(d.stationary_a2()),
        _ => Stability::Indeterminate,
    }
}

/// Coordinate-direction decay rates and the quantities they are built from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoordinateDecayProfile<T> {
    pub theta1_star: T,
    pub theta2_star: T,
    pub theta1_dagger: T,
    pub theta2_dagger: T,
    pub xi_10: T,
    pub xi_01: T,
    /// `G_1(1)` and `G_2(1)`.
    pub g1: Matrix<T>,
    pub g2: Matrix<T>,
    pub drifts: MeanDrifts<T>,
    pub stability: Stability,
}

/// Full coordinate analysis. Fails with [`Error::Unstable`] unless the
/// model is positive recurrent.
pub fn coordinate_profile<T: Real>(
    model: &QbdModel<T>,
    geometry: &Geometry<T>,
) -> Result<CoordinateDecayProfile<T>> {
    let drifts = mean_drifts(model)?;
    let verdict = stability(&drifts);
    if verdict != Stability::PositiveRecurrent {
        return Err(Error::Unstable(verdict));
    }
    let theta1_star = theta_star(model, geometry, Axis::First)?;
    let theta2_star = theta_star(model, geometry, Axis::Second)?;
    let theta1_dagger = theta_dagger_coordinate(geometry, Axis::First, theta2_star)?;
    let theta2_dagger = theta_dagger_coordinate(geometry, Axis::Second, theta1_star)?;
    Ok(CoordinateDecayProfile {
        theta1_star,
        theta2_star,
        theta1_dagger,
        theta2_dagger,
        xi_10: theta1_star.min(theta1_dagger),
        xi_01: theta2_star.min(theta2_dagger),
        g1: g_matrix(model, Axis::First, T::zero())?.g,
        g2: g_matrix(model, Axis::Second, T::zero())?.g,
        drifts,
        stability: verdict,
    })
}
