pub mod config;
pub mod cordes;
pub mod dynamics;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod stability;

pub use error::{Error, Result};
