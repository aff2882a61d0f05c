//! Independent oracles and fixtures for testing orient-core.
//!
//! The oracles in `dense`, `exact` and `pipeline` never call into the
//! orient-core numerical code: they recompute every quantity with dense
//! matrices and explicit loops. `harness` drives end-to-end runs on
//! planted corpora.

pub mod dense;
pub mod exact;
pub mod fixtures;
pub mod harness;
pub mod pipeline;
