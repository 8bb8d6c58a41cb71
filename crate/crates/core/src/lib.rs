pub mod container;
pub mod error;
pub mod evaluator;
pub mod explain;
pub mod graph_store;
pub mod model;
pub mod numerics;
pub mod split_bench;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
