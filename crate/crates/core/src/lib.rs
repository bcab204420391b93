//! Asymptotic-field model of squeezed light generation in lossy microring
//! resonators, with pulsed and continuous-wave pumping.
//!
//! Pipeline: [`device`] calibrates the ring, [`coupler`] solves the point
//! coupler, [`basis`] builds asymptotic-in/out and local modes, [`nonlinear`]
//! assembles the segment overlaps, [`pump`] and [`squeeze`] propagate the
//! classical pump and the signal/idler transfer matrix, and [`observables`]
//! turns the transfer matrix into moments. [`oracles`] holds independent
//! reference models used by the tests.

pub mod basis;
pub mod config;
pub mod coupler;
pub mod device;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod nonlinear;
pub mod observables;
pub mod oracles;
pub mod pump;
pub mod runner;
pub mod simulation;
pub mod squeeze;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
