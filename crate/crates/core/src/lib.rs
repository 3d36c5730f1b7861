//! Coding over the two-user binary erasure broadcast channel with delayed
//! state feedback, private messages for each receiver and a common message
//! for both.

pub mod channel;
pub mod gf2;
pub mod montecarlo;
pub mod region;
pub mod scheme;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Gf2(#[from] gf2::Gf2Error),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Region(#[from] region::RegionError),
    #[error(transparent)]
    Scheme(#[from] scheme::SchemeError),
    #[error("trial {trial}: {source}")]
    TrialFailed { trial: usize, source: scheme::SchemeError },
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
}
