//! Tail asymptotics for dependent products of random variables, with an
//! application to finite-time ruin probabilities in a discrete-time risk
//! model with dependent insurance and financial risks.
//!
//! The crate is organized around five pieces:
//!
//! * [`distributions`] - parametric laws with exact tails, quantiles and
//!   sampling (the loss law F, the discount law G, probe laws V);
//! * [`dependence`] - bivariate dependence structures (independent, FGM,
//!   Sarmanov) with their h-functions, conditional laws, joint samplers
//!   and validity checks;
//! * [`product_tail`] - exact, quadrature and Monte Carlo evaluation of
//!   the tail of the dependent product XY and of iterated discounted
//!   products;
//! * [`ruin`] - Monte Carlo estimation of the finite-time ruin
//!   probability and its single-big-jump tail-sum approximation;
//! * [`diagnostics`] - numerical probes of long-tail / subexponential
//!   class membership and of the tail-domination condition. These report
//!   evidence, not proof: class membership is asymptotic, and a finite
//!   computation can only certify trends.

pub mod dependence;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod product_tail;
pub mod quad;
pub mod ruin;
pub mod stream;

pub use dependence::{DependenceModel, KernelForm, KernelSpec, ValidityReport};
pub use distributions::{DistributionSpec, Family};
pub use error::{Error, Result};
pub use product_tail::{McEstimate, TailCurve, TailMethod, TailValue};
pub use ruin::{RiskModelSpec, RuinEstimate};
