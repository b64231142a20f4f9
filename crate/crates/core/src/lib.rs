//! Asymptotic decay rates of the stationary tail of a discrete-time
//! two-dimensional quasi-birth-and-death process along a direction
//! `c ∈ ℕ²`.
//!
//! The pipeline is [`QbdModel`] → [`Geometry`] (level set of
//! `spr A(e^θ1, e^θ2) = 1`) → [`CoordinateDecayProfile`] (G-matrices and
//! coordinate thresholds) → [`DecayAnalysis::xi_c`]. The [`oracle`] module
//! checks the result against a truncated stationary solve.
//!
//! Everything numeric is generic over [`Real`]; the aliases below fix `f64`.

// `!(x <= tol)` is used deliberately so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod directional;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod perron;
pub mod polling;
pub mod scalar;

pub use analytic::{CoordinateDecayProfile, MeanDrifts, Stability};
pub use directional::{
    BindingConstraint, DecayAnalysis, Direction, DirectionalDecayReport, Regime, TypeClass,
    TypeClassification,
};
pub use error::{Error, Result};
pub use geometry::{GammaGeometry, Geometry};
pub use linalg::Matrix;
pub use model::{BlockVector, QbdModel, Region, Step};
pub use oracle::{fit_decay, solve_truncated, SlopeFit, TruncatedStationary};
pub use polling::{build_limited_service, LimitedServiceParams};
pub use scalar::Real;

pub type Model = QbdModel<f64>;
pub type Analysis = DecayAnalysis<f64>;
pub type Report = DirectionalDecayReport<f64>;
pub type Profile = CoordinateDecayProfile<f64>;
pub type Gamma = GammaGeometry<f64>;
pub type Mat = Matrix<f64>;
