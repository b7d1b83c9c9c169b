//! Simulation and design calculations for a quadrotor that perches with
//! pneumatically stiffened arms.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod config;
pub mod flight;
pub mod format;
pub mod mission;
pub mod pneumatics;
pub mod roots;
