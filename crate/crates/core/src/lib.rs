//! Permutation-matrix space-time codes for MIMO visible-light communication.
//!
//! The crate covers the whole link: [`codebook`] maps messages to binary code matrices with
//! uniform row and column weight (so every LED is on for the same fraction of each block and the
//! same number of LEDs is lit in every slot), [`channel`] draws Lambertian line-of-sight gain
//! matrices for a moving receiver, [`detection`] recovers messages with ML, ZF or MMSE detection,
//! [`analysis`] evaluates the union bound and mutual information, and [`sim`] runs reproducible
//! SNR sweeps on top of all of it.
//!
//! ```
//! use vlcmimo::codebook::{CodebookSpec, Method};
//! let spec = CodebookSpec::new(4, 2, Method::Fill)?;
//! let x = spec.encode(11)?;
//! assert_eq!(spec.decode(&x)?, 11);
//! # Ok::<(), vlcmimo::Error>(())
//! ```

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod codebook;
pub mod detection;
mod error;
mod exec;
pub mod fixtures;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
