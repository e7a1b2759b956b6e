//! Design, certification and simulation of observer-based sampled-data
//! switching laws for switched systems under dwell-time constraints.

pub mod certify;
pub mod config;
pub mod dwell;
pub mod error;
pub mod lmi;
pub mod matnum;
pub mod observer;
pub mod pipeline;
pub mod plant;
pub mod plot;
pub mod sim;

pub use error::{Error, Result};
