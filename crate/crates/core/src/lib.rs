pub mod circuits;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod head;
pub mod io;
pub mod numerics;
pub mod optim;
pub mod par;
pub mod quantum;
pub mod snn;

pub use error::{Error, Result};
