//! Constructive computation of minimal-L-infinity fractional harmonics:
//! given exterior data outside an open set Omega, find the function that
//! agrees with the data there and minimizes the sup norm of its fractional
//! Laplacian, by solving weighted L^p relaxations along an increasing
//! p-schedule and extracting the limit together with its dual certificate.

// Validation guards are written `!(x > 0.0)` throughout so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dual;
pub mod error;
pub mod fraclap;
pub mod grid;
pub mod io;
pub mod presets;
pub mod profiles;
pub mod report;
pub mod solver;
pub mod util;
pub mod verify;

pub use error::{Error, Result};
