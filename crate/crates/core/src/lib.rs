//! Desk-scale digital twin of a research vehicle.
//!
//! The crate is split by subsystem:
//!
//! - [`dynamics`]: nonlinear single-track model with Magic Formula lateral
//!   tires, a fixed-step RK4 integrator and steady-state circular driving tests.
//! - [`sensors`]: geometric sensor rig, field-of-view predicates, BEV coverage
//!   maps and blind-spot analysis.
//! - [`ptp`]: cascaded PTP clock simulation (grandmaster, boundary clock,
//!   transparent clock, ordinary clocks).
//! - [`net`]: discrete-event switched network simulation with credit-based
//!   shaping and stream-reservation budget checks.
//! - [`store`]: relational ride recording store with tagging and integrity checks.
//! - [`scenario`]: scenario configuration, driving-mode limits, the end-to-end
//!   runner and report rendering used by the `edgar-twin` binary.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod fmt;
pub mod net;
pub mod ptp;
pub mod scenario;
pub mod sensors;
pub mod store;
