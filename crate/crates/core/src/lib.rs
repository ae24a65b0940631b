pub mod certify;
pub mod cli;
pub mod dpovm;
pub mod error;
pub mod process;
pub mod protocol_sim;
pub mod sdp;
pub mod tensor_core;

pub use error::{Error, Result};
