//! Cross-platform verification of continuous-variable quantum states from
//! finite-shot Wigner-function data.
//!
//! The crate is organised as a pipeline:
//!
//! * [`fock`] simulates states, noise channels and Kerr dynamics on a
//!   truncated Fock space and provides Wigner and fidelity oracles.
//! * [`measure`] turns states into partially-sampled displaced-parity data
//!   images and assembles labelled datasets.
//! * [`embednet`] is the convolutional embedding network and its
//!   triplet-loss training loop.
//! * [`verify`] calibrates the acceptance threshold and runs pairwise
//!   verification, rejection curves and t-SNE projections.
//! * [`harness`] drives the end-to-end experiments.

pub mod error;
pub mod fock;
pub mod measure;
pub mod embednet;
pub mod verify;
pub mod harness;

pub use error::{Error, Result};
