pub mod error;
pub mod fixtures;
pub mod lme;
pub mod moment;
mod parse;
pub mod poly;
pub mod sdp;
pub mod vip;

pub use error::{Error, Result};
