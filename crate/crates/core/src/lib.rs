#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod system;
pub mod lyapunov;
pub mod report;
pub mod constructions;
pub mod certify;
pub mod examples;
pub mod cli;
