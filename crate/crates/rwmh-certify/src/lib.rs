//! Convergence-rate certificates for random walk Metropolis-Hastings.
//!
//! This crate computes explicit drift and minorization constants for RWMH
//! chains on `R^p`, turns them into upper bounds on the geometric rate of
//! convergence, computes several lower bounds on the same rate, and ships a
//! small-instance discretization oracle that checks every reported bound
//! against the numerically exact rate of a gridded version of the chain.
//!
//! The main pieces:
//!
//! * [`target`] — target densities bundled with the certificates the bound
//!   pipeline consumes (envelope, superexponential decay rate, curvature),
//!   combinators for products and mixtures, and numeric assumption checkers.
//! * [`proposal`] — symmetric, strictly radially decreasing proposals
//!   (isotropic Gaussian, radial Laplace) with box probabilities and tail
//!   radii.
//! * [`geometry`] — the cone-condition constants `R_alpha`, `lambda_tilde`,
//!   `eps`, `delta`.
//! * [`drift`] — the full certificate `PV <= lambda_tilde V + b`,
//!   `P(x,.) >= eta_tilde nu(.)`, plus Monte Carlo and quadrature verifiers.
//! * [`rates`] — the Rosenthal-style upper bound optimizer and the lower
//!   bounds (acceptance, bounded proposal, mode, spectral).
//! * [`glm`] — exponential-family and GLM posteriors with per-model
//!   constants; logistic and Poisson presets.
//! * [`sampler`] — the RWMH kernel itself, reproducible chains, MC
//!   estimators.
//! * [`oracle`] — row-stochastic discretization on a grid, stationary vector,
//!   SLEM, TV decay, and the sandwich check `lower <= SLEM <= upper`.
//! * [`cli`] — the batch front end (`verify`, `bounds`, `lower`, `sample`,
//!   `oracle`, `report`).
//!
//! Everything that can span hundreds of orders of magnitude (`b`,
//! `eta_tilde`, Hastings ratios) is computed in log space; reports carry both
//! the log value and the materialized value when it is representable.
//!
//! ```
//! use rwmh_certify::geometry::ConeParams;
//! use rwmh_certify::proposal::RadialProposal;
//! use rwmh_certify::target::TargetBundle;
//! use rwmh_certify::drift::drift_certificate;
//!
//! let bundle = TargetBundle::standard_normal(1).unwrap();
//! let prop = RadialProposal::gaussian(1, 1.0).unwrap();
//! let params = ConeParams::for_curvature(bundle.curvature().eta).unwrap();
//! let cert = drift_certificate(&bundle, &prop, &params).unwrap();
//! assert!(cert.lambda_tilde > 0.0 && cert.lambda_tilde < 1.0);
//! ```

pub mod cli;
pub mod config;
pub mod drift;
pub mod error;
pub mod geometry;
pub mod glm;
pub mod numeric;
pub mod oracle;
pub mod proposal;
pub mod rates;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod target;

pub use error::{Error, Result};
