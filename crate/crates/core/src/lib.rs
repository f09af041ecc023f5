pub mod annulus;
pub mod config;
pub mod connectivity;
pub mod error;
pub mod experiments;
pub mod gamma;
pub mod hull;
pub mod hull_property;
pub mod minimax;
pub mod monge_ampere;
pub mod numerics;
pub mod pohozaev;
pub mod report;

pub use error::{Error, Result};
