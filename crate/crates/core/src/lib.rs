pub mod dp;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod lmcts;
pub mod market;
pub mod ntz;
pub mod cli;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
