//! Blender detection for coindex-one heterodimensional cycles of
//! saddle-focus and double-focus type.

pub mod arithmetic;
pub mod blender_certifier;
pub mod cycle_model;
pub mod error;
pub mod return_map;
pub mod rng;
pub mod simple_dynamics;
pub mod unfolding;

pub use error::{Error, Result};
