//! Path-dependent stochastic Volterra equations and their Markovian memory processes.
//!
//! A Volterra process `X_t = ξ⁰ + ∫ K(t-s) b(s, (K̃⋆X)_s) ds + ∫ K(t-s) σ(s, (K̃⋆X)_s) dW_s`
//! whose kernel `K` admits a ρ-pseudo-inverse co-kernel `K̃` (`K⋆K̃ = e^{-ρt}`) is driven by
//! the memory process `ξ_t = e^{ρt}(K̃⋆X)_t`, which solves an ordinary Markovian SDE with an
//! extra deterministic "memory burst" term. This crate provides
//!
//! * [`kernels`]: the Gamma kernel family, co-kernels, Laplace transforms and product quadrature,
//! * [`fracops`]: discrete Riemann–Liouville integrals and derivatives,
//! * [`sde`]: the Euler scheme of the memory process,
//! * [`volterra`]: Euler schemes of `X` and the two-way transform `X ↔ ξ`,
//! * [`roughvol`]: a rough-volatility model built on top of the above,
//! * [`mc`]: coupled Monte Carlo strong-error estimation, rate fits and timing benchmarks,
//! * [`cli`]: the experiment runner behind the `memvol` binary.

pub mod cli;
pub mod error;
pub mod fracops;
pub mod grid;
pub mod kernels;
pub mod mc;
pub mod noise;
pub mod roughvol;
pub mod sde;
pub mod special;
pub mod volterra;

pub use error::{Error, Result};
pub use grid::{PathGrid, SamplePath};
