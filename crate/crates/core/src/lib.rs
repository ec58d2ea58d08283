#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod solver;
pub mod spectral;
