//! Desk-scale toolkit for an LLM-assisted optical network control layer.
//!
//! The crate is organised bottom-up:
//!
//! - [`netmodel`]: topology, spectrum grid and service demand data model.
//! - [`qot`]: closed-form GN-model quality-of-transmission engine.
//! - [`netops`]: routing, first-fit spectrum assignment, network findings and
//!   launch-power optimisation.
//! - [`alarms`]: alarm windowing, compression, correlation and prioritisation.
//! - [`rag`]: chunking, deterministic embedding and exact vector retrieval.
//! - [`agent`]: the five-step orchestrator with pluggable LLM backends,
//!   tool registry, approval gate and transcript.
//! - [`evalharness`]: scenario generation, scoring and the condition matrix.
//! - [`gateway`]: sessions, HTTP/SSE service and persistence.

pub mod agent;
pub mod alarms;
pub mod digest;
pub mod evalharness;
pub mod fixtures;
pub mod gateway;
pub mod netmodel;
pub mod netops;
pub mod qot;
pub mod rag;

/// Converts a power in dBm to watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a power in watts to dBm.
pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Linear ratio to dB.
pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dB to linear ratio.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
