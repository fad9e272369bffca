//! Radio-frequency imaging from multipath channel parameters.
//!
//! A small image-method ray tracer ([`pathgen`]) produces per-path
//! angle/delay/gain tuples, [`channel`] turns them into MIMO impulse
//! responses, [`erp`] maps each path to an equivalent reflection point, and
//! [`cloud`] fuses the points over TX/RX placements and scores them with the
//! Chamfer distance.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cloud;
pub mod erp;
pub mod formats;
pub mod geom;
pub mod pathgen;
