//! Strategic network formation with opportunity transfers.
//!
//! Individuals receive exogenous opportunities, pass surplus ones to
//! contacts, and pay a per-edge cost. The crate computes expected
//! utilities, checks pairwise equilibria, and evaluates welfare, price of
//! anarchy and inequality.

pub mod closed_form;
pub mod construct;
pub mod equilibrium;
pub mod error;
pub mod interventions;
pub mod model;
pub mod sweep;
pub mod transfer_sim;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{base_distribution, ExogenousDistribution, ModelParams, Network, Pmf, TransferModel, UtilityVector, TOL};
