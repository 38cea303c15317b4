pub mod calibrate;
pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod glm;
pub mod grid;
pub mod numeric;
pub mod rng;
pub mod series;
pub mod simulate;

pub use error::{Error, ErrorKind, Result};
