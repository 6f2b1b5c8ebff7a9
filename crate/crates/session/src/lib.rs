//! Orchestration around the benchmark engine and the simulator: repeated
//! tracker evaluation over a dataset, fixed-tick closed-loop episodes with a
//! scripted or remote operator, run and episode persistence, the operator
//! channel and the `reefloop` command line.

pub mod benchmark;
pub mod channel;
pub mod episode;
pub mod export;
pub mod store;
pub mod trackers;

use std::path::PathBuf;

use thiserror::Error;

pub use benchmark::{run_benchmark, BenchmarkConfig, BenchmarkOutcome};
pub use episode::{
    run_episode, EpisodeConfig, EpisodeLog, EpisodeOutcome, Operator, OperatorCommand, ScriptedOperator,
};
pub use store::{EpisodeStore, RunStore};
pub use trackers::TrackerSpec;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("episode tick rate {0} Hz is below 9 Hz")]
    TickRate(f64),
    #[error("sequence {0} has no image frames; only the oracle tracker can run on it")]
    NoFrames(String),
    #[error("unknown tracker '{0}' (expected ncc, ncc-scale, mosse, mosse-scale, oracle or bridge:<endpoint>)")]
    UnknownTracker(String),
    #[error("no record '{0}'")]
    UnknownId(String),
    #[error("record {0} already exists; completed records are never overwritten")]
    AlreadyExists(PathBuf),
    #[error("{0}")]
    Corrupt(String),
    #[error(transparent)]
    Dataset(#[from] reefloop_core::dataset::DatasetError),
    #[error(transparent)]
    Metrics(#[from] reefloop_core::metrics::MetricsError),
    #[error(transparent)]
    Tracker(#[from] reefloop_core::tracker::TrackerError),
    #[error(transparent)]
    Bridge(#[from] reefloop_core::bridge::BridgeError),
    #[error(transparent)]
    Sim(#[from] reefloop_sim::SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> SessionError {
    let path = path.into();
    move |source| SessionError::Io { path, source }
}
