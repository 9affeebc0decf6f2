//! Numerical toolkit for two-dimensional massless Dirac operators in
//! radially symmetric electric and magnetic fields.
//!
//! The operator decomposes into half-line channel Hamiltonians
//! `h_j = −iσ₂∂_r + σ₁(A − m_j/r) + V` with `m_j = j + 1/2`. This crate
//! discretizes each channel, extracts windowed spectra, checks eigenvalue
//! count and exponential decay bounds, and evolves wave packets to measure
//! transport moments.

pub mod dynamics;
pub mod error;
pub mod fields;
pub mod interp;
pub mod operators;
pub mod quadrature;
pub mod spectral;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
