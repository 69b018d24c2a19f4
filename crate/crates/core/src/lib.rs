//! Short-term power-load forecasting with a hybrid BiGRU-LSTM network.
//!
//! The crate covers the whole modelling path: timestamped multi-channel
//! frames, hourly downsampling, test-time feature imputation, the three
//! normalization schemes with persisted inverse transforms, a from-scratch
//! recurrent network trained by backpropagation through time, recursive
//! day-ahead prediction and the multi-criteria metric suite.

pub mod error;
pub mod forecast;
pub mod frame;
pub mod metrics;
pub mod network;
pub mod persist;
pub mod preprocess;
pub mod synth;
pub mod training;

pub use error::CoreError;
pub use frame::{FeatureSpec, TimeSeriesFrame, WindowSample};
pub use network::{ForwardMode, NetworkWeights};
pub use preprocess::{ImputationModel, ScalerMethod, ScalerParams};
pub use training::{TrainConfig, TrainState};
