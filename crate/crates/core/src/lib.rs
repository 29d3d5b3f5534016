//! Successive convex approximation solvers.
//!
//! The crate builds without `std` (it needs `alloc`). The `std` feature adds
//! `std::error::Error` impls; `parallel` runs FLEXA and SONATA block solves on a
//! rayon pool while keeping results identical for every worker count.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod base;
pub mod error;
pub mod exec;
pub mod flexa;
pub mod linalg;
pub mod mm;
pub mod network;
pub mod penalties;
pub mod problems;
pub mod sonata;

pub use error::{Error, Result};
