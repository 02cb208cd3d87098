//! Clock models, entanglement-assisted synchronization and coincidence logic.

pub mod clock;
pub mod coincidence;
pub mod xcorr;

use thiserror::Error;

pub use clock::{ClockModel, ClockTrajectory};
pub use coincidence::{
    channel_times, classify_threefolds, find_coincidences, gate_on_feedforward, match_fourfolds, CoincidenceEvent,
    CoincidenceKind, Fourfold, ThreefoldReport,
};
pub use xcorr::{cross_correlate, sync_track, EpochSync, OffsetTrack, SyncEstimate, SyncParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("empty time-tag stream")]
    EmptyStream,
    #[error("time-tag stream is not time-ordered")]
    Unordered,
    #[error("invalid sync parameters: {0}")]
    BadParams(String),
    #[error("no significant correlation peak (significance {significance:.2})")]
    NoPeak { significance: f64 },
    #[error("{consecutive} consecutive sync failures ending at epoch {epoch}")]
    TooManyFailures { epoch: usize, consecutive: usize },
}

pub(crate) fn is_sorted(xs: &[i64]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}
