//! Two-qubit state algebra, tomography and entanglement-based key-rate
//! analysis.

#![allow(clippy::needless_range_loop)]

pub mod counts;
pub mod linalg;
pub mod qkd;
pub mod quantum;
pub mod rng;
pub mod tomography;
