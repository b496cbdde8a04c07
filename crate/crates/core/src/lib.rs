//! Model-free forecasting of chaotic dynamical systems.

pub mod bench;
pub mod dynsys;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod readout;
pub mod series;

pub use error::{Error, Result};
pub use series::TimeSeries;
