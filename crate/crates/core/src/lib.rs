//! Spectral solver and estimate diagnostics for the complex Monge-Ampère
//! equation `(ω + i∂∂̄φ)^n = e^{F+b} ω^n` on flat complex tori carrying a
//! prescribed Hermitian metric.

pub mod app;
pub mod calculus;
pub mod diagnostics;
pub mod error;
pub mod fieldfile;
pub mod forms;
pub mod gauduchon;
pub mod grid;
pub mod hermitian;
pub mod krylov;
pub mod scenario;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
