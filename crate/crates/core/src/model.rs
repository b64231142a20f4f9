//! Two-dimensional QBD process definitions.
//!
//! A model holds one `s0 × s0` block per (region, step) pair. Steps live in
//! `{-1,0,1}²`; blocks for steps that would leave the quadrant are zero.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Part of the quadrant a level `(x1, x2)` belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `x1 = x2 = 0`
    Origin,
    /// `x1 > 0, x2 = 0`
    XAxis,
    /// `x1 = 0, x2 > 0`
    YAxis,
    /// `x1 > 0, x2 > 0`
    Interior,
}

impl Region {
    pub const ALL: [Region; 4] = [
        Region::Origin,
        Region::XAxis,
        Region::YAxis,
        Region::Interior,
    ];

    pub fn of_level(x1: usize, x2: usize) -> Self {
        Self::from_positive(x1 > 0, x2 > 0)
    }

    pub fn from_positive(first: bool, second: bool) -> Self {
        match (first, second) {
            (false, false) => Region::Origin,
            (true, false) => Region::XAxis,
            (false, true) => Region::YAxis,
            (true, true) => Region::Interior,
        }
    }

    /// Whether coordinate 1 is strictly positive in this region.
    pub fn first_positive(self) -> bool {
        matches!(self, Region::XAxis | Region::Interior)
    }

    pub fn second_positive(self) -> bool {
        matches!(self, Region::YAxis | Region::Interior)
    }

    pub fn json_key(self) -> &'static str {
        match self {
            Region::Origin => "origin",
            Region::XAxis => "x_boundary",
            Region::YAxis => "y_boundary",
            Region::Interior => "interior",
        }
    }

    pub fn from_json_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.json_key() == key)
    }

    /// Region seen from the model with coordinates exchanged.
    pub fn swapped(self) -> Self {
        match self {
            Region::XAxis => Region::YAxis,
            Region::YAxis => Region::XAxis,
            other => other,
        }
    }

    /// A step may be nonzero only if it cannot push a zero coordinate negative.
    pub fn admits(self, step: Step) -> bool {
        (self.first_positive() || step.i1 >= 0) && (self.second_positive() || step.i2 >= 0)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.json_key())
    }
}

/// A level increment `(i1, i2)` with both components in `{-1, 0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub i1: i8,
    pub i2: i8,
}

impl Step {
    pub const ALL: [Step; 9] = [
        Step::new(-1, -1),
        Step::new(-1, 0),
        Step::new(-1, 1),
        Step::new(0, -1),
        Step::new(0, 0),
        Step::new(0, 1),
        Step::new(1, -1),
        Step::new(1, 0),
        Step::new(1, 1),
    ];

    pub const fn new(i1: i8, i2: i8) -> Self {
        Self { i1, i2 }
    }

    pub fn swapped(self) -> Self {
        Self::new(self.i2, self.i1)
    }

    fn index(self) -> usize {
        ((self.i1 + 1) * 3 + (self.i2 + 1)) as usize
    }

    fn parse(key: &str) -> Option<Self> {
        let (a, b) = key.split_once(',')?;
        let i1: i8 = a.trim().parse().ok()?;
        let i2: i8 = b.trim().parse().ok()?;
        ((-1..=1).contains(&i1) && (-1..=1).contains(&i2)).then(|| Self::new(i1, i2))
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.i1, self.i2)
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonFinite,
    EntryOutOfRange,
    RowSum,
    ImpossibleStep,
    Reducible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub region: Region,
    pub step: Option<Step>,
    pub row: Option<usize>,
    /// Offending value or residual magnitude.
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} in {}", self.kind, self.region)?;
        if let Some(s) = self.step {
            write!(f, " step ({s})")?;
        }
        if let Some(r) = self.row {
            write!(f, " row {r}")?;
        }
        write!(f, ": {:e}", self.magnitude)
    }
}

/// Aggregation size `(b1, b2)` for the block state process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockVector {
    pub b1: usize,
    pub b2: usize,
}

impl BlockVector {
    pub fn new(b1: usize, b2: usize) -> Result<Self> {
        if b1 == 0 || b2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "block sizes must be positive, got ({b1}, {b2})"
            )));
        }
        Ok(Self { b1, b2 })
    }
}

/// Discrete-time 2d-QBD process.
#[derive(Clone, Debug, PartialEq)]
pub struct QbdModel<T> {
    s0: usize,
    // indexed by region.index() * 9 + step.index()
    blocks: Vec<Matrix<T>>,
}

impl<T: Real> QbdModel<T> {
    /// All-zero model with `s0` phases; fill it with [`set_block`](Self::set_block).
    pub fn zeros(s0: usize) -> Self {
        assert!(s0 > 0, "phase count must be positive");
        Self {
            s0,
            blocks: vec![Matrix::zeros(s0, s0); 36],
        }
    }

    pub fn s0(&self) -> usize {
        self.s0
    }

    pub fn block(&self, region: Region, step: Step) -> &Matrix<T> {
        &self.blocks[region.index() * 9 + step.index()]
    }

    pub fn block_mut(&mut self, region: Region, step: Step) -> &mut Matrix<T> {
        &mut self.blocks[region.index() * 9 + step.index()]
    }

    pub fn set_block(&mut self, region: Region, step: Step, m: Matrix<T>) -> Result<()> {
        if m.rows() != self.s0 || m.cols() != self.s0 {
            return Err(Error::InvalidModel(format!(
                "block {region} ({step}) is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                self.s0,
                self.s0
            )));
        }
        *self.block_mut(region, step) = m;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> QbdModel<U> {
        QbdModel {
            s0: self.s0,
            blocks: self.blocks.iter().map(Matrix::cast).collect(),
        }
    }

    /// Sum of all blocks of a region (stochastic for a valid model).
    pub fn total(&self, region: Region) -> Matrix<T> {
        let mut sum = Matrix::zeros(self.s0, self.s0);
        for step in Step::ALL {
            sum.add_scaled(T::one(), self.block(region, step));
        }
        sum
    }

    /// Every violated invariant; empty for a valid model.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let tol = T::tol(1e-12);
        for region in Region::ALL {
            for step in Step::ALL {
                let b = self.block(region, step);
                for i in 0..self.s0 {
                    for j in 0..self.s0 {
                        let v = b[(i, j)];
                        let kind = if !v.is_finite() {
                            ViolationKind::NonFinite
                        } else if v < T::zero() || v > T::one() + tol {
                            ViolationKind::EntryOutOfRange
                        } else {
                            continue;
                        };
                        out.push(Violation {
                            kind,
                            region,
                            step: Some(step),
                            row: Some(i),
                            magnitude: v.as_f64(),
                        });
                    }
                }
                if !region.admits(step) && !b.is_zero() {
                    out.push(Violation {
                        kind: ViolationKind::ImpossibleStep,
                        region,
                        step: Some(step),
                        row: None,
                        magnitude: b.max_abs().as_f64(),
                    });
                }
            }
            for (i, s) in self.total(region).row_sums().into_iter().enumerate() {
                let r = (s - T::one()).abs();
                if !(r <= tol) {
                    out.push(Violation {
                        kind: ViolationKind::RowSum,
                        region,
                        step: None,
                        row: Some(i),
                        magnitude: (s - T::one()).as_f64(),
                    });
                }
            }
        }
        let unreached = unreachable_count(&self.total(Region::Interior));
        if unreached > 0 {
            out.push(Violation {
                kind: ViolationKind::Reducible,
                region: Region::Interior,
                step: None,
                row: None,
                magnitude: unreached as f64,
            });
        }
        out
    }

    /// `Ok` when [`validate`](Self::validate) is empty, else the first violation.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidModel(v.to_string())),
        }
    }

    /// `Σ z1^{i1} z2^{i2} A^α_{i1,i2}` over the admissible steps of `region`.
    pub fn generating(&self, region: Region, z1: T, z2: T) -> Result<Matrix<T>> {
        check_positive(z1)?;
        check_positive(z2)?;
        Ok(self.generating_unchecked(region, z1, z2))
    }

    pub(crate) fn generating_unchecked(&self, region: Region, z1: T, z2: T) -> Matrix<T> {
        let mut sum = Matrix::zeros(self.s0, self.s0);
        for step in Step::ALL {
            let b = self.block(region, step);
            if region.admits(step) && !b.is_zero() {
                sum.add_scaled(z1.powi(step.i1 as i32) * z2.powi(step.i2 as i32), b);
            }
        }
        sum
    }

    /// `A^α_{*,i2}(z1) = Σ_{i1} z1^{i1} A^α_{i1,i2}`.
    pub fn partial_over_first(&self, region: Region, i2: i8, z1: T) -> Result<Matrix<T>> {
        check_positive(z1)?;
        let mut sum = Matrix::zeros(self.s0, self.s0);
        for i1 in -1..=1 {
            let step = Step::new(i1, i2);
            if region.admits(step) {
                sum.add_scaled(z1.powi(i1 as i32), self.block(region, step));
            }
        }
        Ok(sum)
    }

    /// `A^α_{i1,*}(z2) = Σ_{i2} z2^{i2} A^α_{i1,i2}`.
    pub fn partial_over_second(&self, region: Region, i1: i8, z2: T) -> Result<Matrix<T>> {
        self.swapped().partial_over_first(region.swapped(), i1, z2)
    }

    /// The same process with the two coordinates exchanged.
    pub fn swapped(&self) -> Self {
        let mut out = Self::zeros(self.s0);
        for region in Region::ALL {
            for step in Step::ALL {
                *out.block_mut(region.swapped(), step.swapped()) = self.block(region, step).clone();
            }
        }
        out
    }

    /// Block state process: each `b1 × b2` cell of levels becomes one level
    /// and the offset inside the cell joins the phase.
    ///
    /// Phase `(m1, m2, j)` has index `(m1·b2 + m2)·s0 + j`. A cell on a
    /// boundary of the derived process uses the original boundary blocks only
    /// for source offsets whose original coordinate is zero.
    pub fn block_process(&self, b: BlockVector) -> Self {
        let (b1, b2, s0) = (b.b1, b.b2, self.s0);
        let n = b1 * b2 * s0;
        let mut out = Self::zeros(n);
        for region in Region::ALL {
            for m1 in 0..b1 {
                for m2 in 0..b2 {
                    let source = Region::from_positive(
                        region.first_positive() || m1 > 0,
                        region.second_positive() || m2 > 0,
                    );
                    let row0 = (m1 * b2 + m2) * s0;
                    for step in Step::ALL {
                        if !source.admits(step) {
                            continue;
                        }
                        let a = self.block(source, step);
                        if a.is_zero() {
                            continue;
                        }
                        let (q1, r1) = div_floor(m1 as i64 + step.i1 as i64, b1 as i64);
                        let (q2, r2) = div_floor(m2 as i64 + step.i2 as i64, b2 as i64);
                        let col0 = (r1 as usize * b2 + r2 as usize) * s0;
                        let target = out.block_mut(region, Step::new(q1 as i8, q2 as i8));
                        for j in 0..s0 {
                            for k in 0..s0 {
                                target[(row0 + j, col0 + k)] += a[(j, k)];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_file(&self) -> ModelFile {
        let mut blocks = BTreeMap::new();
        for region in Region::ALL {
            let mut steps = BTreeMap::new();
            for step in Step::ALL {
                let m = self.block(region, step);
                if !m.is_zero() {
                    steps.insert(step.to_string(), m.cast::<f64>().to_rows());
                }
            }
            blocks.insert(region.json_key().to_string(), steps);
        }
        ModelFile {
            s0: self.s0,
            blocks,
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.s0 == 0 {
            return Err(Error::InvalidModel("s0 must be positive".into()));
        }
        let mut model = Self::zeros(file.s0);
        for (rkey, steps) in &file.blocks {
            let region = Region::from_json_key(rkey)
                .ok_or_else(|| Error::InvalidModel(format!("unknown region key {rkey:?}")))?;
            for (skey, rows) in steps {
                let step = Step::parse(skey).ok_or_else(|| {
                    Error::InvalidModel(format!("bad step key {skey:?} in {rkey}"))
                })?;
                let m = Matrix::from_rows(rows).ok_or_else(|| {
                    Error::InvalidModel(format!("ragged matrix at {rkey} ({skey})"))
                })?;
                model.set_block(region, step, m.cast())?;
            }
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model schema:
/// `{"s0": n, "blocks": {"interior": {"i1,i2": [[...]]}, "x_boundary": .., "y_boundary": .., "origin": ..}}`.
/// Missing regions and steps are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub s0: usize,
    #[serde(default)]
    pub blocks: BTreeMap<String, BTreeMap<String, Vec<Vec<f64>>>>,
}

fn check_positive<T: Real>(z: T) -> Result<()> {
    if z > T::zero() && z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "generating-function argument must be positive, got {z}"
        )))
    }
}

fn div_floor(a: i64, b: i64) -> (i64, i64) {
    let q = a.div_euclid(b);
    (q, a - q * b)
}

/// Number of states not reachable from every state (0 means irreducible).
fn unreachable_count<T: Real>(m: &Matrix<T>) -> usize {
    let n = m.rows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { m[(i, j)] } else { m[(j, i)] };
                if w > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let (f, b) = (reach(true), reach(false));
    f.iter().zip(&b).filter(|(x, y)| !(**x && **y)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent lazy walks in each coordinate, single phase.
    fn walk(p1: f64, q1: f64, p2: f64, q2: f64) -> QbdModel<f64> {
        let mut m = QbdModel::zeros(1);
        for region in Region::ALL {
            let (u1, d1) = if region.first_positive() {
                (p1, q1)
            } else {
                (p1, 0.0)
            };
            let (u2, d2) = if region.second_positive() {
                (p2, q2)
            } else {
                (p2, 0.0)
            };
            for step in Step::ALL {
                let f = |i: i8, u: f64, d: f64| match i {
                    1 => u,
                    -1 => d,
                    _ => 1.0 - u - d,
                };
                let v = f(step.i1, u1, d1) * f(step.i2, u2, d2);
                m.set_block(region, step, Matrix::from_rows(&[vec![v]]).unwrap())
                    .unwrap();
            }
        }
        m
    }

    #[test]
    fn product_walk_is_valid() {
        assert!(walk(0.2, 0.3, 0.1, 0.4).validate().is_empty());
    }

    #[test]
    fn short_row_is_reported_once() {
        let mut m = walk(0.2, 0.3, 0.1, 0.4);
        m.block_mut(Region::Interior, Step::new(0, 0))[(0, 0)] -= 0.1;
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::RowSum);
        assert!((v[0].magnitude + 0.1).abs() < 1e-12);
    }

    #[test]
    fn impossible_step_is_reported() {
        let mut m = walk(0.2, 0.3, 0.1, 0.4);
        m.block_mut(Region::XAxis, Step::new(0, 0))[(0, 0)] -= 0.05;
        m.block_mut(Region::XAxis, Step::new(0, -1))[(0, 0)] = 0.05;
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ImpossibleStep);
        assert_eq!(v[0].step, Some(Step::new(0, -1)));
    }

    #[test]
    fn scalar_generating_function() {
        let m = walk(0.2, 0.3, 0.1, 0.4);
        let (z1, z2) = (1.7, 0.6);
        let g = m.generating(Region::Interior, z1, z2).unwrap()[(0, 0)];
        let expect = (0.2 * z1 + 0.3 / z1 + 0.5) * (0.1 * z2 + 0.4 / z2 + 0.5);
        assert!((g - expect).abs() < 1e-14);
        assert!(m.generating(Region::Interior, 0.0, 1.0).is_err());
    }

    #[test]
    fn partial_sums_add_up() {
        let m = walk(0.2, 0.3, 0.1, 0.4);
        let z = 1.3;
        let by_first: f64 = (-1..=1)
            .map(|i2| m.partial_over_first(Region::Interior, i2, z).unwrap()[(0, 0)])
            .sum();
        let by_second: f64 = (-1..=1)
            .map(|i1| m.partial_over_second(Region::Interior, i1, z).unwrap()[(0, 0)])
            .sum();
        assert!((by_first - m.generating(Region::Interior, z, 1.0).unwrap()[(0, 0)]).abs() < 1e-14);
        assert!(
            (by_second - m.generating(Region::Interior, 1.0, z).unwrap()[(0, 0)]).abs() < 1e-14
        );
    }

    #[test]
    fn swap_is_an_involution() {
        let m = walk(0.2, 0.3, 0.1, 0.4);
        assert_eq!(m.swapped().swapped(), m);
        assert_eq!(m.swapped(), walk(0.1, 0.4, 0.2, 0.3));
    }

    #[test]
    fn unit_block_process_is_identity() {
        let m = walk(0.2, 0.3, 0.1, 0.4);
        assert_eq!(m.block_process(BlockVector::new(1, 1).unwrap()), m);
    }

    #[test]
    fn block_process_stays_valid() {
        let m = walk(0.2, 0.3, 0.1, 0.4);
        let b = m.block_process(BlockVector::new(2, 3).unwrap());
        assert_eq!(b.s0(), 6);
        assert!(b.validate().is_empty(), "{:?}", b.validate());
    }

    #[test]
    fn json_round_trip() {
        let m = walk(0.2, 0.3, 0.1, 0.4);
        let back = QbdModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        assert!(QbdModel::<f64>::from_json(r#"{"s0":1,"blocks":{},"extra":0}"#).is_err());
        assert!(QbdModel::<f64>::from_json(r#"{"s0":1,"blocks":{"inside":{}}}"#).is_err());
        assert!(
            QbdModel::<f64>::from_json(r#"{"s0":1,"blocks":{"interior":{"2,0":[[1]]}}}"#).is_err()
        );
    }
}
