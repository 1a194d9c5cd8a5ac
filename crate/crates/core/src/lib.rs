// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod phy;
pub mod rng;
pub mod time;
pub mod schedule;
pub mod node;
pub mod mac;
pub mod engine;
pub mod analysis;
