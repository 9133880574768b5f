//! Defending public data against attribute inference.
//!
//! The defense runs in two phases. For each possible attribute value it first
//! searches for a small (L0) perturbation of the user's public vector that
//! makes the defender's classifier predict that value. It then picks one of
//! those perturbations at random, with probabilities that minimize the KL
//! divergence to a target distribution under an expected-cost budget.
//!
//! Alongside the defense the crate carries the classifiers used by both
//! sides, baseline defenses, a small game-theoretic linear program, and an
//! experiment harness that writes CSV sweeps.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod classify;
pub mod cli;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod eval;
pub mod evade;
pub mod gametheory;
pub mod mechanism;
pub mod seed;

pub use error::{Error, Result};
