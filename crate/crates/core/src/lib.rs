pub mod attack;
pub mod bounds;
pub mod encoder;
pub mod error;
pub mod lp;
pub mod milp;
pub mod network;
pub mod verify;

pub use error::{Error, Result};
