//! Entity-aware LSTM (EA-LSTM) rainfall-runoff modelling with exact analytic
//! gradients, and a gradient-based sensitivity pipeline that ranks static
//! catchment features by their influence on simulated streamflow during
//! low-flow and high-flow periods.
//!
//! The crate is organised bottom-up:
//!
//! * [`numcore`] dense kernels, activations and the seeded PRNG,
//! * [`ealstm`] the cell, sequence forward pass and hand-written adjoint,
//! * [`dataio`] basin records, CSV ingestion, standardization and the
//!   synthetic catchment generator,
//! * [`training`] windowing, loss, Adam and NSE evaluation,
//! * [`sensitivity`] flow percentiles, daily static gradients, aggregation,
//!   normalization and ranking,
//! * [`checkpoint`] the on-disk model container,
//! * [`cli`] the `hydrosense` command implementations.

pub mod checkpoint;
pub mod cli;
pub mod dataio;
pub mod ealstm;
mod error;
pub mod numcore;
pub mod sensitivity;
pub mod training;

pub use error::{Error, Result};

/// Inclusive calendar-day range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DateRange {
    pub start: chrono::NaiveDate,
    pub end: chrono::NaiveDate,
}

impl DateRange {
    pub fn new(start: chrono::NaiveDate, end: chrono::NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Contract(format!(
                "date range end {end} precedes start {start}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: chrono::NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}
