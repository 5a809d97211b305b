//! Quasi-static evolution of a two-layer laminate with gradient damage in each
//! layer and a cohesive interface between them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod cli;
pub mod cohesive;
pub mod config;
pub mod discretization;
pub mod error;
pub mod evolution;
pub mod io;
pub mod materials;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
