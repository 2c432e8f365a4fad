//! Ratio shift keying (RSK) and concentration shift keying (CSK) for mobile
//! molecular communication with ligand receptors.
//!
//! The crate covers receptor binding statistics, ratio and concentration
//! estimators, Fisher-information capacity, mobile channel statistics,
//! constellation design with ML detection, and a Monte Carlo link simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod information;
pub mod kinetics;
pub mod mobility;
pub mod modem;
pub mod optimize;
pub mod params;
pub mod quadrature;
pub mod simulator;

pub use error::{Error, Result};
