//! Linearized four-compartment HIV transmission model.
//!
//! Undiagnosed people with HIV move through acute (`a`), chronic (`u`) and
//! AIDS (`s`) stages until they are diagnosed (`d`). The crate calibrates the
//! stage parameters from jurisdiction-level surveillance aggregates, computes
//! reproduction numbers from the next-generation matrix, and evaluates HIV
//! self-testing policies over a ten-year horizon.
//!
//! Time is measured in months throughout. Rates taken from annual
//! surveillance data are converted at the boundary (see [`units`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod ngm;
pub mod par;
pub mod scenario;
pub mod stats;
pub mod units;

pub use error::{Error, ErrorKind, Result};
