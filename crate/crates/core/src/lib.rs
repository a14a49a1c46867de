//! Gauss–Newton with approximated tensors (GNAT) model reduction for the
//! parameterized 1D inviscid Burgers equation.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod pod;
pub mod sampling;
pub mod snapshots;
pub mod solvers;

pub use error::{GnatError, Result};
