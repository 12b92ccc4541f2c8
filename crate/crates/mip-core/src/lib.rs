//! Dynamics, contact-force estimation and control for a thruster-assisted
//! mobile inverted pendulum on an incline.
//!
//! The robot is a two-body planar machine: a driven wheel rolling on a
//! slope and a pendulum body pinned to the axle, with a body-fixed
//! thruster that can press the wheel into the ground and assist steep
//! climbs. The crate provides
//!
//! * the reduced rolling model ([`dynamics`]): closed-form mass matrix,
//!   bias terms and input map for the no-slip robot;
//! * an analytical ground-reaction estimator ([`contact`]) with wheel-load
//!   and friction-cone feasibility values;
//! * an independent compliant-ground simulator ([`truth`]) that permits
//!   slip and lift-off, for validating the no-slip assumptions;
//! * a nonlinear predictive controller ([`mpc`]) that keeps those
//!   feasibility values negative over a short horizon, solved by
//!   sequential quadratic programming over a dense dual active-set QP;
//! * a PID baseline and the PID-to-predictive handover ([`control`]).
//!
//! The crate is `no_std` (with `alloc`) so the numerics can run on an
//! embedded target; file IO, scenario parsing and logging live in the
//! companion `mip-sim` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod contact;
pub mod control;
pub mod dynamics;
pub mod math;
pub mod mpc;
pub mod truth;
