pub mod error;
pub mod experiment;
pub mod graph;
pub mod models;
pub mod mvrd;
pub mod ndmath;
pub mod providers;

pub use error::{Error, Result};
