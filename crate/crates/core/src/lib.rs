//! Conditional Orlicz norms and conditional convex risk measures on finite filtered
//! probability spaces.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar to `f64`.
//!
//! ```
//! use orlicz_risk::risk::robust_representation;
//! use orlicz_risk::{
//!     luxemburg_norm, ConditionalRisk, DualOptions, Entropic, NormOptions, ProbSpace, Rv,
//!     SubAlgebra, Young,
//! };
//!
//! # fn main() -> orlicz_risk::Result<()> {
//! let space = ProbSpace::new(vec![0.3, 0.2, 0.25, 0.25])?;
//! let f = SubAlgebra::new(4, vec![vec![0, 1], vec![2, 3]])?;
//! let x = Rv::new(vec![2.5, 0.5, 0.0, -1.0])?;
//!
//! // Conditional Luxemburg norm under φ(t) = t², constant on each atom.
//! let norm = luxemburg_norm(&space, &x, &f, &Young::power(2.0)?, &NormOptions::default())?;
//! assert!((norm.per_atom[2] - 0.5f64.sqrt()).abs() < 1e-9);
//!
//! // Entropic risk and its dual certificate y = -dQ/dP.
//! let rho = Entropic::new(1.0)?;
//! let risk = rho.evaluate(&space, &x, &f)?;
//! let cert = robust_representation(&rho, &space, &x, &f, &DualOptions::default())?;
//! assert!(cert.max_gap() <= 1e-9);
//! assert_eq!(cert.risk, risk);
//! # Ok(())
//! # }
//! ```

// `!(a <= b)` is used on purpose: NaN must fail these tests.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod orlicz;
pub mod prob_space;
pub mod risk;
pub mod scalar;
pub mod solvers;
pub mod young;

pub use error::{Error, Result};
pub use orlicz::{
    amemiya_norm, luxemburg_norm, pairing, pairing_operator_norm, recover_density, CondNorm,
    NormMethod, NormOptions,
};
pub use prob_space::{Filtration, FiniteProbSpace, RandomVar, SubAlgebra};
pub use risk::{
    ConditionalRisk, CustomRisk, DualCertificate, DualHint, DualOptions, DynamicRiskMeasure,
    Entropic, LinearRisk, RiskTag, WorstCase,
};
pub use scalar::Scalar;
pub use young::{YoungFamily, YoungFn};

pub type ProbSpace = FiniteProbSpace<f64>;
pub type Rv = RandomVar<f64>;
pub type Young = YoungFn<f64>;
pub type Norm = CondNorm<f64>;
pub type Certificate = DualCertificate<f64>;
pub type Dynamic = DynamicRiskMeasure<f64>;
