//! Limited-view CT restoration toolkit.

pub mod error;
pub mod gradsuite;
pub mod io;
pub mod limited_view;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod phantom;
pub mod pipeline;
pub mod tomo;
pub mod tv;

pub use error::{Error, Result};
