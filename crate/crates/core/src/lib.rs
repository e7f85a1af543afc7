//! Models and statistics for quantum frequency conversion links.
//!
//! * [`conversion`]: sin² conversion law, saturation power, Boyd–Kleinman
//!   focusing factor, phase-matching bandwidth and depletion fits.
//! * [`cavity`]: monolithic pump-enhancement cavity figures and mode.
//! * [`link`]: noise-spectral-density accounting and fiber-link SNR.
//! * [`verification`]: g², Franson visibility, chained Bell inequalities
//!   and a Poisson count simulator.
//! * [`config`], [`report`], [`cli`]: the batch front end.

pub mod cavity;
pub mod cli;
pub mod config;
pub mod constants;
pub mod conversion;
pub mod error;
pub mod link;
pub mod numeric;
pub mod report;
pub mod verification;

pub use error::{Error, Result};
