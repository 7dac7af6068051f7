//! Numerical model of heralded Schrödinger-cat-state generation from a
//! broadband CW squeezed light source.
//!
//! The crate is organized around five stages:
//! - [`fock`]: truncated Fock-space states, channels, and Wigner functions
//! - [`herald`]: pump → squeezing → tap → click-detection physics model
//! - [`tracegen`]: synthetic homodyne trace records
//! - [`modeest`]: temporal-mode recovery by principal component analysis
//! - [`tomo`]: iterative maximum-likelihood density-matrix reconstruction

pub mod error;
pub mod fock;
pub mod herald;
pub mod linalg;
pub mod modeest;
pub mod tomo;
pub mod tracegen;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, PureState, TwoModeState, WignerGrid, WignerGridSpec};
pub use herald::{ExperimentConfig, HeraldOutcome, ModeFunction};
pub use tracegen::{HomodyneTrace, QuadratureDataset};
