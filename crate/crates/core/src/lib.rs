#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod gait;
pub mod model;
pub mod optimizer;

pub use error::{Error, Result};
pub use nalgebra;
