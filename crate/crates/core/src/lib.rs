//! Fundamental solutions of degenerate kinetic Fokker-Planck (Langevin) equations and of their
//! stochastic counterparts with multiplicative transport noise.
//!
//! The deterministic operator is `K = 1/2 a d_vv + b d_v - <Y, grad> - d_t` on `(t, x, v)`.
//! Its fundamental solution is built by a truncated parametrix series around the Gaussian kernel
//! of the linearised operator. The stochastic equation
//! `d u = (1/2 a d_vv u) dt + sigma d_v u dW` along `d_t + v d_x` is reduced to a Kolmogorov
//! equation with random coefficients by the Ito-Wentzell transform and then solved the same way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod flow_engine;
pub mod gaussian_kernels;
pub mod geometry;
pub mod linalg;
pub mod parametrix_solver;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod spde_assembler;
pub mod verification;

pub use error::{Error, Result};
