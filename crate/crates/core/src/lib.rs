//! Model-free control: ultra-local models, intelligent controllers, their
//! classic counterparts, benchmark plants and a deterministic closed-loop
//! simulator.

pub mod controllers;
pub mod correspondence;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod plants;
pub mod signals;
pub mod simulation;

pub use error::{Error, Result};
