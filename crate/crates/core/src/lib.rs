//! Runge–Kutta-structured recurrent networks, their stability certificates,
//! architecture reductions, the QUNN construction and clock Hamiltonians.

pub mod adapters;
pub mod arnn;
pub mod clockham;
pub mod error;
pub mod numerics;
pub mod odernn;
pub mod qunn;
pub mod stability;
pub mod training;

pub use error::{Error, Result};
