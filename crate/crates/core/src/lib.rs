//! Null space constants γ(ℓp, A, k) of small sensing matrices.
//!
//! The crate computes γ exactly where closed forms or enumeration allow it,
//! certified lower bounds elsewhere, and the recovery quantities built on top
//! of it: spark, the recoverable sparsity staircase k*_p, reconstruction
//! exponents p*_k, and failure witnesses for ℓp minimization.

pub mod combinatorics;
pub mod derived;
pub mod error;
pub mod linalg;
pub mod matgen;
pub mod nsc;
pub mod recovery;
pub mod rng;
pub mod spark;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{NullSpaceBasis, SensingMatrix};
pub use nsc::{
    nsc_estimate, theta, top_k_support, Certificate, EstimatorConfig, Method, NscContext,
    NscEstimate, NscQuery, PathChoice, Status, SupportSet,
};
pub use spark::{compute_spark, SparkResult};
