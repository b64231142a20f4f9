//! Decay rates along an arbitrary direction `c ∈ ℕ²`.
//!
//! Two independent routes are provided: root finding on the lines
//! `c·θ = const` ([`DecayAnalysis::xi_c`]) and the closed-form case split on
//! the relative position of `Q1 = (θ1*, η̄_2(θ1*))` and `Q2 = (η̄_1(θ2*), θ2*)`
//! ([`DecayAnalysis::xi_c_geometric`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{coordinate_profile, CoordinateDecayProfile};
use crate::error::{Error, Result};
use crate::geometry::{DirectionalExtremes, Geometry, Point};
use crate::model::QbdModel;
use crate::optimize::bisect_boundary;
use crate::scalar::Real;

/// Gap below `θ_c^max` that separates the two decay regimes.
const REGIME_GAP: f64 = 1e-7;
/// Finite-difference step for boundary slopes.
const SLOPE_STEP: f64 = 1e-5;
/// `θ*` this close to `θ^max` has a vertical tangent.
const VERTICAL_GAP: f64 = 1e-7;
const DEGENERACY_GAP: f64 = 1e-9;

/// Nonzero direction `(c1, c2)` with nonnegative integer components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub c1: u32,
    pub c2: u32,
}

impl Direction {
    pub fn new(c1: u32, c2: u32) -> Result<Self> {
        if c1 == 0 && c2 == 0 {
            return Err(Error::InvalidParameter(
                "direction (0,0) is not allowed".into(),
            ));
        }
        Ok(Self { c1, c2 })
    }

    pub fn pair(self) -> (u32, u32) {
        (self.c1, self.c2)
    }

    pub fn norm(self) -> f64 {
        (self.c1 as f64).hypot(self.c2 as f64)
    }

    pub fn is_coordinate(self) -> bool {
        self.c1 == 0 || self.c2 == 0
    }

    pub fn scaled(self, m: u32) -> Self {
        Self {
            c1: self.c1 * m,
            c2: self.c2 * m,
        }
    }

    fn dot<T: Real>(self, p: Point<T>) -> T {
        T::lit(self.c1 as f64) * p.0 + T::lit(self.c2 as f64) * p.1
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.c1, self.c2)
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("direction must look like `2,1`, got {s:?}"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        Self::new(
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeClass {
    Type1,
    Type2,
    Type3,
    Type4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `ξ_c = θ_c^max`
    Unconstrained,
    /// `ξ_c < θ_c^max`; the tail is purely geometric.
    BoundaryDriven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingConstraint {
    None,
    Q1,
    Q2,
}

/// Relative position of `Q1` and `Q2` on the boundary of `Γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeClassification<T> {
    pub type_class: TypeClass,
    pub q1: Point<T>,
    pub q2: Point<T>,
    /// `η̄'_2(θ1*)`; `None` for a vertical tangent.
    pub slope_q1: Option<T>,
    /// `η̄'_1(θ2*)`; `None` for a vertical tangent.
    pub slope_q2: Option<T>,
    /// A defining inequality held with equality up to rounding.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionalDecayReport<T> {
    pub c: Direction,
    pub theta_c_min: T,
    pub theta_c_max: T,
    /// Tangent point where `c·θ` attains `θ_c^max`.
    pub r_c: Point<T>,
    pub theta_dagger_c1: T,
    pub theta_dagger_c2: T,
    pub xi_c: T,
    pub xi_c_normalized: T,
    pub type_class: TypeClass,
    pub regime: Regime,
    pub binding_constraint: BindingConstraint,
}

/// Result of the closed-form route.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricDecay<T> {
    pub xi_c: T,
    /// The slope test was undefined and the root-finding value was used.
    pub fallback: bool,
}

/// A validated, positive recurrent model with its geometry and coordinate
/// profile, ready for directional queries. Immutable and shareable.
#[derive(Clone, Debug)]
pub struct DecayAnalysis<T> {
    pub model: QbdModel<T>,
    pub geometry: Geometry<T>,
    pub profile: CoordinateDecayProfile<T>,
    pub classification: TypeClassification<T>,
}

impl<T: Real> DecayAnalysis<T> {
    pub fn new(model: QbdModel<T>) -> Result<Self> {
        Self::with_samples(model, crate::geometry::DEFAULT_SAMPLES)
    }

    pub fn with_samples(model: QbdModel<T>, samples: usize) -> Result<Self> {
        model.ensure_valid()?;
        let geometry = Geometry::with_samples(&model, samples)?;
        let profile = coordinate_profile(&model, &geometry)?;
        let classification = classify(&geometry, profile.theta1_star, profile.theta2_star)?;
        Ok(Self {
            model,
            geometry,
            profile,
            classification,
        })
    }

    pub fn directional_extremes(&self, c: Direction) -> Result<DirectionalExtremes<T>> {
        self.geometry.directional_extremes(c.pair())
    }

    /// `θ†_{c,1} = max{θ : η^L_{c,1}(θ) ≤ θ1*}` (`which = 1`) or
    /// `θ†_{c,2} = max{θ : η^R_{c,2}(θ) ≤ θ2*}` (`which = 2`).
    ///
    /// Coordinate directions use the coordinate thresholds: for `c = (m, 0)`
    /// these are `m θ1*` and `m θ1†`, for `c = (0, m)` `m θ2†` and `m θ2*`.
    pub fn theta_dagger_directional(&self, c: Direction, which: u8) -> Result<T> {
        if !(which == 1 || which == 2) {
            return Err(Error::InvalidParameter(format!(
                "constraint index must be 1 or 2, got {which}"
            )));
        }
        let p = &self.profile;
        if c.c2 == 0 {
            let m = T::lit(c.c1 as f64);
            return Ok(m * if which == 1 {
                p.theta1_star
            } else {
                p.theta1_dagger
            });
        }
        if c.c1 == 0 {
            let m = T::lit(c.c2 as f64);
            return Ok(m * if which == 1 {
                p.theta2_dagger
            } else {
                p.theta2_star
            });
        }
        let ext = self.directional_extremes(c)?;
        let g = &self.geometry.gamma;
        let (start, star) = match which {
            1 => (c.dot(g.left), p.theta1_star),
            _ => (c.dot(g.bottom), p.theta2_star),
        };
        // the constraint is slack when the tangent point already satisfies it
        let at_tangent = if which == 1 {
            ext.argmax.0
        } else {
            ext.argmax.1
        };
        if at_tangent <= star {
            return Ok(ext.max);
        }
        let mut err = None;
        let ok = |theta: T| match self.geometry.eta_line_roots(c.pair(), theta) {
            Ok((l, r)) => {
                if which == 1 {
                    l.0 <= star
                } else {
                    r.1 <= star
                }
            }
            Err(e) => {
                err.get_or_insert(e);
                false
            }
        };
        let out = bisect_boundary(ok, start.min(ext.max), ext.max, T::tol(1e-11));
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// `ξ_c = min(θ†_{c,1}, θ†_{c,2})` with its regime.
    pub fn xi_c(&self, c: Direction) -> Result<DirectionalDecayReport<T>> {
        let ext = self.directional_extremes(c)?;
        let d1 = self.theta_dagger_directional(c, 1)?;
        let d2 = self.theta_dagger_directional(c, 2)?;
        let xi = d1.min(d2);
        let boundary_driven = xi < ext.max - T::lit(REGIME_GAP);
        let binding = match (boundary_driven, d1 <= d2) {
            (false, _) => BindingConstraint::None,
            (true, true) => BindingConstraint::Q1,
            (true, false) => BindingConstraint::Q2,
        };
        Ok(DirectionalDecayReport {
            c,
            theta_c_min: ext.min,
            theta_c_max: ext.max,
            r_c: ext.argmax,
            theta_dagger_c1: d1,
            theta_dagger_c2: d2,
            xi_c: xi,
            xi_c_normalized: xi / T::lit(c.norm()),
            type_class: self.classification.type_class,
            regime: if boundary_driven {
                Regime::BoundaryDriven
            } else {
                Regime::Unconstrained
            },
            binding_constraint: binding,
        })
    }

    /// The closed-form route: the case split on the type and the boundary
    /// slopes at `Q1`, `Q2`.
    pub fn xi_c_geometric(&self, c: Direction) -> Result<GeometricDecay<T>> {
        let t = &self.classification;
        let (c1, c2) = (T::lit(c.c1 as f64), T::lit(c.c2 as f64));
        let at_q1 = c.dot(t.q1);
        let at_q2 = c.dot(t.q2);
        // −c1/c2 and −c2/c1, with −∞ for a zero denominator
        let ratio = |a: T, b: T| {
            if b == T::zero() {
                T::neg_infinity()
            } else {
                -a / b
            }
        };
        let vertical = |s: Option<T>| s.unwrap_or(T::neg_infinity());
        let xi = match t.type_class {
            TypeClass::Type1 => {
                let (s1, s2) = (vertical(t.slope_q1), vertical(t.slope_q2));
                if s1.is_nan() || s2.is_nan() {
                    return Ok(GeometricDecay {
                        xi_c: self.xi_c(c)?.xi_c,
                        fallback: true,
                    });
                }
                if ratio(c1, c2) <= s1 {
                    at_q1
                } else if ratio(c2, c1) <= s2 {
                    at_q2
                } else {
                    self.directional_extremes(c)?.max
                }
            }
            TypeClass::Type2 => {
                let chord = (t.q2.1 - t.q1.1) / (t.q2.0 - t.q1.0);
                if ratio(c1, c2) <= chord {
                    at_q1
                } else {
                    at_q2
                }
            }
            TypeClass::Type3 => at_q2,
            TypeClass::Type4 => at_q1,
        };
        Ok(GeometricDecay {
            xi_c: xi,
            fallback: false,
        })
    }
}

/// Type of the model from `θ1*`, `θ2*`.
pub fn classify<T: Real>(
    geometry: &Geometry<T>,
    theta1_star: T,
    theta2_star: T,
) -> Result<TypeClassification<T>> {
    let g = &geometry.gamma;
    let upper2 = geometry.eta2(theta1_star)?.1;
    let upper1 = geometry.eta1(theta2_star)?.1;
    let q1 = (theta1_star, upper2);
    let q2 = (upper1, theta2_star);
    let right_of = theta1_star >= upper1;
    let below = upper2 <= theta2_star;
    let type_class = match (right_of, below) {
        (true, true) => TypeClass::Type1,
        (false, false) => TypeClass::Type2,
        (true, false) => TypeClass::Type3,
        (false, true) => TypeClass::Type4,
    };
    let gap = T::lit(DEGENERACY_GAP);
    let degenerate = (theta1_star - upper1).abs() <= gap || (upper2 - theta2_star).abs() <= gap;
    let slope_q1 = upper_slope(geometry, theta1_star, g.theta1_min, g.theta1_max)?;
    let mirror = geometry.mirrored();
    let slope_q2 = upper_slope(&mirror, theta2_star, g.theta2_min, g.theta2_max)?;
    Ok(TypeClassification {
        type_class,
        q1,
        q2,
        slope_q1,
        slope_q2,
        degenerate,
    })
}

/// Derivative of `η̄_2` at `x` by Richardson-extrapolated differences,
/// one-sided when `x` is within a step of the range ends; `None` when the
/// tangent at `x` is vertical.
pub fn upper_slope<T: Real>(geometry: &Geometry<T>, x: T, lo: T, hi: T) -> Result<Option<T>> {
    if hi - x <= T::lit(VERTICAL_GAP) || x - lo <= T::lit(VERTICAL_GAP) {
        return Ok(None);
    }
    let f = |t: T| geometry.eta2(t).map(|(_, up)| up);
    let h = T::lit(SLOPE_STEP);
    let two = T::lit(2.0);
    let estimate = |h: T| -> Result<T> {
        if x + h <= hi && x - h >= lo {
            Ok((f(x + h)? - f(x - h)?) / (two * h))
        } else if x + h > hi {
            Ok((f(x)? - f(x - h)?) / h)
        } else {
            Ok((f(x + h)? - f(x)?) / h)
        }
    };
    let (d_full, d_half) = (estimate(h)?, estimate(h / two)?);
    let central = x + h <= hi && x - h >= lo;
    // central error is O(h²), one-sided O(h)
    let slope = if central {
        (T::lit(4.0) * d_half - d_full) / T::lit(3.0)
    } else {
        two * d_half - d_full
    };
    Ok(Some(slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_directions() {
        assert_eq!(
            "2,1".parse::<Direction>().unwrap(),
            Direction { c1: 2, c2: 1 }
        );
        assert_eq!(
            " 0 , 3".parse::<Direction>().unwrap(),
            Direction { c1: 0, c2: 3 }
        );
        assert!("0,0".parse::<Direction>().is_err());
        assert!("1".parse::<Direction>().is_err());
        assert!("-1,2".parse::<Direction>().is_err());
    }

    #[test]
    fn norm_and_scaling() {
        let c = Direction::new(1, 2).unwrap();
        assert!((c.norm() - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.scaled(3), Direction::new(3, 6).unwrap());
    }
}
