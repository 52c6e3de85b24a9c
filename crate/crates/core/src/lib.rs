//! RIS-transmitted channel training: pilot design, estimation and bounds.

pub mod cascaded;
pub mod channel;
pub mod crlb;
pub mod cxlinalg;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod gd;
pub mod pdd;
pub mod pilotfile;

pub use error::{Error, Result};
