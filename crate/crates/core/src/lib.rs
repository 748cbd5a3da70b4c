//! Numerical laboratory for small-perturbation regularity of fully nonlinear
//! parabolic equations F(D²u) − u_t = 0.

pub mod barrier;
pub mod config;
pub mod constants;
pub mod contact;
pub mod decay;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod gridfn;
pub mod iqa;
pub mod linalg;
pub mod operators;
pub mod report;
pub mod solver;
pub mod suites;

pub use error::{Error, Result};
