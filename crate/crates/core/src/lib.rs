//! Tracking slowly varying parameters of chaotic systems from partial state
//! observations with a trained echo state network.
//!
//! The numeric modules are generic over [`scalar::Real`]; the run pipeline,
//! sweeps and tuning work in `f64`.

pub mod dynamics;
pub mod error;
pub mod scalar;
pub mod seed;
pub mod waveforms;
pub mod format;
pub mod linalg;
pub mod observation;
pub mod reservoir;
pub mod pipeline;
pub mod hyperopt;
pub mod harness;

pub use error::{Error, Result};
pub use pipeline::{RunConfig, TrackingResult};

pub type SystemSpec = dynamics::SystemSpec<f64>;
pub type StateVector = dynamics::StateVector<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type WaveformSpec = waveforms::WaveformSpec<f64>;
pub type ObservationSpec = observation::ObservationSpec<f64>;
pub type ObservationSeries = observation::ObservationSeries<f64>;
pub type ReservoirHyperparams = reservoir::ReservoirHyperparams<f64>;
pub type Tracker = reservoir::TrainedTracker<f64>;

/// Single-precision variants of the numeric types.
pub type Trajectory32 = dynamics::Trajectory<f32>;
pub type Tracker32 = reservoir::TrainedTracker<f32>;
