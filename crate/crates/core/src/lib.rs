//! Readout-error models, calibration and mitigation for qubit registers,
//! including bit-flip averaging.

pub mod bench;
pub mod bitstring;
pub mod calibration;
pub mod counts;
pub mod error;
pub mod example;
pub mod io;
pub mod metrics;
pub mod mitigation;
pub mod model;
pub mod sim;
pub mod wht;

pub use bitstring::BitString;
pub use counts::CountsTable;
pub use error::{Error, Result};
pub use model::{GroupedModel, Model, ResponseMatrix, SyndromeDistribution, TpnModel};
