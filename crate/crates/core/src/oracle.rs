//! Brute-force stationary distribution on the window `{0..N}²` and empirical
//! decay-rate fits along rays.
//!
//! Transitions that would leave the window keep the level and take the new
//! phase, so the truncated chain stays stochastic. Computation is in `f64`
//! whatever the model's scalar type, since tail probabilities underflow
//! single precision long before the fit window.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::directional::Direction;
use crate::error::{Error, Result};
use crate::linalg::{stationary_gth, Matrix};
use crate::model::{QbdModel, Region, Step};
use crate::scalar::Real;

/// Maximum `‖πP − π‖∞` accepted from a solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    /// Exact block elimination over the first coordinate (default).
    LevelReduction,
    /// Power iteration from the uniform vector.
    PowerIteration { max_iterations: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncatedStationary {
    pub n: usize,
    pub s0: usize,
    /// Indexed by `(x1·(N+1) + x2)·s0 + j`.
    pub pi: Vec<f64>,
    pub solver_residual: f64,
}

impl TruncatedStationary {
    pub fn prob(&self, x1: usize, x2: usize, j: usize) -> f64 {
        self.pi[(x1 * (self.n + 1) + x2) * self.s0 + j]
    }

    /// Probability of level `(x1, x2)` summed over phases.
    pub fn level_prob(&self, x1: usize, x2: usize) -> f64 {
        (0..self.s0).map(|j| self.prob(x1, x2, j)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().sum()
    }

    /// CSV with header `x1,x2,j,prob`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x1", "x2", "j", "prob"])?;
        for x1 in 0..=self.n {
            for x2 in 0..=self.n {
                for j in 0..self.s0 {
                    w.serialize((x1, x2, j, self.prob(x1, x2, j)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Stationary distribution of the truncated chain.
pub fn solve_truncated<T: Real>(model: &QbdModel<T>, n: usize) -> Result<TruncatedStationary> {
    solve_truncated_with(model, n, Solver::LevelReduction)
}

pub fn solve_truncated_with<T: Real>(
    model: &QbdModel<T>,
    n: usize,
    solver: Solver,
) -> Result<TruncatedStationary> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!(
            "truncation level must be at least 10, got {n}"
        )));
    }
    model.ensure_valid()?;
    let model: QbdModel<f64> = model.cast();
    let pi = match solver {
        Solver::LevelReduction => level_reduction(&model, n)?,
        Solver::PowerIteration { max_iterations } => power_iteration(&model, n, max_iterations)?,
    };
    let next = apply(&model, n, &pi);
    let residual = next
        .iter()
        .zip(&pi)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::NonConvergence {
            what: "truncated stationary solve",
            iterations: 0,
            residual,
        });
    }
    Ok(TruncatedStationary {
        n,
        s0: model.s0(),
        pi,
        solver_residual: residual,
    })
}

/// Destination level of a step from `(x1, x2)`, redirected to the current
/// level when it leaves the window.
fn destination(n: usize, x1: usize, x2: usize, step: Step) -> (usize, usize) {
    let y1 = x1 as i64 + step.i1 as i64;
    let y2 = x2 as i64 + step.i2 as i64;
    if y1 > n as i64 || y2 > n as i64 {
        (x1, x2)
    } else {
        (y1 as usize, y2 as usize)
    }
}

fn nonzero_steps(
    model: &QbdModel<f64>,
    region: Region,
) -> impl Iterator<Item = (Step, &Matrix<f64>)> {
    Step::ALL
        .into_iter()
        .filter(move |&s| region.admits(s))
        .map(move |s| (s, model.block(region, s)))
        .filter(|(_, b)| !b.is_zero())
}

/// `π ↦ πP` for the truncated chain.
fn apply(model: &QbdModel<f64>, n: usize, pi: &[f64]) -> Vec<f64> {
    let s0 = model.s0();
    let idx = |x1: usize, x2: usize| (x1 * (n + 1) + x2) * s0;
    let mut out = vec![0.0; pi.len()];
    for x1 in 0..=n {
        for x2 in 0..=n {
            let src = &pi[idx(x1, x2)..idx(x1, x2) + s0];
            for (step, b) in nonzero_steps(model, Region::of_level(x1, x2)) {
                let (y1, y2) = destination(n, x1, x2, step);
                let dst = idx(y1, y2);
                for (i, &p) in src.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (k, &v) in b.row(i).iter().enumerate() {
                        out[dst + k] += p * v;
                    }
                }
            }
        }
    }
    out
}

/// Blocks of level `x1` towards levels `x1 − 1`, `x1`, `x1 + 1`; phases `(x2, j)`.
fn level_blocks(model: &QbdModel<f64>, n: usize, x1: usize) -> [Matrix<f64>; 3] {
    let s0 = model.s0();
    let m = (n + 1) * s0;
    let mut out = [
        Matrix::zeros(m, m),
        Matrix::zeros(m, m),
        Matrix::zeros(m, m),
    ];
    for x2 in 0..=n {
        for (step, b) in nonzero_steps(model, Region::of_level(x1, x2)) {
            let (y1, y2) = destination(n, x1, x2, step);
            let target = &mut out[(y1 as i64 - x1 as i64 + 1) as usize];
            for i in 0..s0 {
                for k in 0..s0 {
                    target[(x2 * s0 + i, y2 * s0 + k)] += b[(i, k)];
                }
            }
        }
    }
    out
}

/// Linear level reduction: `S_N = L_N`, `R_n = U_n (I − S_{n+1})⁻¹`,
/// `S_n = L_n + R_n D_{n+1}`, then `π_0 S_0 = π_0` and `π_{n+1} = π_n R_n`.
fn level_reduction(model: &QbdModel<f64>, n: usize) -> Result<Vec<f64>> {
    let m = (n + 1) * model.s0();
    let id = Matrix::identity(m);
    let mut rates: Vec<Matrix<f64>> = Vec::with_capacity(n);
    let [_, mut s, _] = level_blocks(model, n, n);
    let mut down_next = level_blocks(model, n, n)[0].clone();
    for x1 in (0..n).rev() {
        let [down, same, up] = level_blocks(model, n, x1);
        let lu =
            id.sub(&s).transpose().lu().ok_or_else(|| {
                Error::Oracle(format!("singular censored block at level {}", x1 + 1))
            })?;
        let r = lu.solve_matrix(&up.transpose()).transpose();
        s = same.add(&r.matmul(&down_next));
        rates.push(r);
        down_next = down;
    }
    rates.reverse();
    let mut level = stationary_gth(&s)
        .ok_or_else(|| Error::Oracle("censored level-0 chain is reducible".into()))?;
    let mut pi = Vec::with_capacity(m * (n + 1));
    pi.extend_from_slice(&level);
    for r in &rates {
        level = r.left_mul_vec(&level);
        pi.extend_from_slice(&level);
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|p| (p / total).max(0.0)).collect())
}

fn power_iteration(model: &QbdModel<f64>, n: usize, max_iterations: usize) -> Result<Vec<f64>> {
    let len = (n + 1) * (n + 1) * model.s0();
    let mut pi = vec![1.0 / len as f64; len];
    let mut change = f64::INFINITY;
    for it in 0..max_iterations {
        let mut next = apply(model, n, &pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= total);
        change = next
            .iter()
            .zip(&pi)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        pi = next;
        if change <= RESIDUAL_TOLERANCE * 1e-2 && it > 0 {
            return Ok(pi);
        }
    }
    Err(Error::NonConvergence {
        what: "truncated power iteration",
        iterations: max_iterations,
        residual: change,
    })
}

/// Least-squares fit of `log π(k·c)` against `k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeFit {
    pub c: Direction,
    /// Phase fitted; `None` for the sum over phases.
    pub phase: Option<usize>,
    pub k_lo: usize,
    pub k_hi: usize,
    /// Estimate of `−ξ_c`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Larger of the regression standard error and half the gap between the
    /// slopes of the two half windows.
    pub std_error: f64,
    pub ols_std_error: f64,
    pub half_slopes: (f64, f64),
    /// Quadratic coefficient of `log π` in `k` over the window.
    pub curvature: f64,
    /// `2·curvature·k_mid²`: the exponent `p` of a `k^{-p}` correction that
    /// would produce this curvature.
    pub p_eff: f64,
    /// Slope of every phase over the same window.
    pub phase_slopes: Vec<f64>,
}

impl SlopeFit {
    pub fn decay_rate(&self) -> f64 {
        -self.slope
    }

    /// Largest deviation of a phase slope from the fitted slope.
    pub fn phase_spread(&self) -> f64 {
        self.phase_slopes
            .iter()
            .fold(0.0f64, |m, s| m.max((s - self.slope).abs()))
    }

    /// Every phase decays at the fitted rate within two standard errors.
    pub fn phases_agree(&self) -> bool {
        self.phase_spread() <= 2.0 * self.std_error
    }
}

/// Default window `[N/(4 max c), N/(2 max c)]`.
pub fn default_window(n: usize, c: Direction) -> (usize, usize) {
    let mc = c.c1.max(c.c2) as usize;
    (n / (4 * mc), n / (2 * mc))
}

/// Fits `log π(k·c, j)` (or the phase sum when `phase` is `None`) over
/// `k ∈ [k_lo, k_hi]`.
pub fn fit_decay(
    ts: &TruncatedStationary,
    c: Direction,
    phase: Option<usize>,
    window: Option<(usize, usize)>,
) -> Result<SlopeFit> {
    let (k_lo, k_hi) = window.unwrap_or_else(|| default_window(ts.n, c));
    let mc = c.c1.max(c.c2) as usize;
    if k_hi < k_lo + 3 {
        return Err(Error::InvalidParameter(format!(
            "fit window [{k_lo}, {k_hi}] needs at least four points"
        )));
    }
    if k_hi * mc + 2 > ts.n {
        return Err(Error::InvalidParameter(format!(
            "fit window reaches level {} within 2 of the truncation level {}",
            k_hi * mc,
            ts.n
        )));
    }
    if phase.is_some_and(|j| j >= ts.s0) {
        return Err(Error::InvalidParameter(format!(
            "phase out of range (s0 = {})",
            ts.s0
        )));
    }
    let series = |j: Option<usize>| -> Result<Vec<(f64, f64)>> {
        (k_lo..=k_hi)
            .map(|k| {
                let (x1, x2) = (k * c.c1 as usize, k * c.c2 as usize);
                let p = match j {
                    Some(j) => ts.prob(x1, x2, j),
                    None => ts.level_prob(x1, x2),
                };
                if p > 0.0 {
                    Ok((k as f64, p.ln()))
                } else {
                    Err(Error::Oracle(format!(
                        "zero probability at level ({x1}, {x2})"
                    )))
                }
            })
            .collect()
    };
    let data = series(phase)?;
    let line = ols(&data);
    let mid = (k_lo + k_hi) / 2;
    let split = mid - k_lo;
    let (first, second) = (ols(&data[..=split]).slope, ols(&data[split..]).slope);
    let curvature = quadratic_coefficient(&data, mid as f64)?;
    let phase_slopes = (0..ts.s0)
        .map(|j| series(Some(j)).map(|d| ols(&d).slope))
        .collect::<Result<Vec<_>>>()?;
    Ok(SlopeFit {
        c,
        phase,
        k_lo,
        k_hi,
        slope: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        std_error: line.std_error.max((first - second).abs() / 2.0),
        ols_std_error: line.std_error,
        half_slopes: (first, second),
        curvature,
        p_eff: 2.0 * curvature * (mid as f64).powi(2),
        phase_slopes,
    })
}

struct Line {
    slope: f64,
    intercept: f64,
    r2: f64,
    std_error: f64,
}

fn ols(data: &[(f64, f64)]) -> Line {
    let n = data.len() as f64;
    let mx = data.iter().map(|p| p.0).sum::<f64>() / n;
    let my = data.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = data.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = data
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let std_error = if data.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Line {
        slope,
        intercept,
        r2,
        std_error,
    }
}

/// `q` of the least-squares fit `y ≈ a + b u + q u²`, `u = x − center`.
fn quadratic_coefficient(data: &[(f64, f64)], center: f64) -> Result<f64> {
    let mut normal = Matrix::<f64>::zeros(3, 3);
    let mut rhs = [0.0; 3];
    for &(x, y) in data {
        let u = x - center;
        let basis = [1.0, u, u * u];
        for i in 0..3 {
            rhs[i] += basis[i] * y;
            for j in 0..3 {
                normal[(i, j)] += basis[i] * basis[j];
            }
        }
    }
    let lu = normal
        .lu()
        .ok_or_else(|| Error::Oracle("degenerate quadratic fit".into()))?;
    Ok(lu.solve(&rhs)[2])
}
