//! Simulation of bi-static OFDM sensing of a passive target in a room, with
//! an energy-detector baseline and a small CNN detector.

pub mod channel;
pub mod detectors;
pub mod error;
pub mod features;
pub mod geometry;
pub mod harness;
pub mod numerology;
pub mod oracle;
pub mod selftest;

pub use error::{Error, Result};
