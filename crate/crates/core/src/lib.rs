//! Stiffness modeling and calibration of heavy serial robots with a spring
//! gravity compensator on joint 2.
//!
//! - [`model`]: 6R chain with virtual joint springs, kinematics and derivatives.
//! - [`compensator`]: spring compensator geometry, torque and equivalent stiffness.
//! - [`stiffness`]: loaded equilibrium, Cartesian stiffness, deflection prediction.
//! - [`geometry`]: compensator geometry identification from tracker data.
//! - [`elasto`]: joint and compensator elastostatic identification.
//! - [`doe`]: calibration plan evaluation and optimization.
//! - [`sim`]: synthetic measurement generator.

pub mod compensator;
pub mod config;
pub mod doe;
pub mod elasto;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod stiffness;

pub use error::{Error, Result};
