pub mod bench;
pub mod cli;
pub mod disagg;
pub mod error;
pub mod estimate;
pub mod forest;
pub mod geometry;
pub mod io;
pub mod load;
pub mod metrics;
pub mod mixture;
pub mod nnls;
pub mod pv;
pub mod scenario;
pub mod seed;
pub mod timeseries;

pub use error::{Error, Result};
