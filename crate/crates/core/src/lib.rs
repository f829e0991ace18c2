//! Context-based physical-layer authentication for a moving underwater
//! acoustic transmitter.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`mobility`]: Gauss-Markov traces for the legitimate source and the
//!   impersonating attacker.
//! * [`channel`]: image-method multipath arrivals over a flat waveguide,
//!   sub-band frequency responses and SNR-calibrated noise.
//! * [`scm`]: normalized spatial covariance matrices and their real-folded,
//!   standardized form.
//! * [`estimators`]: the position-estimator seam (Gaussian oracle or file).
//! * [`kalman`] and [`rnn`]: one-step-ahead position predictors.
//! * [`auth`]: squared-error metric, threshold test and DET curves.
//! * [`harness`]: scenario configuration, Monte-Carlo orchestration,
//!   summary statistics and file formats.

pub mod auth;
pub mod channel;
mod csvio;
pub mod error;
pub mod estimators;
pub mod geom;
pub mod harness;
pub mod kalman;
pub mod mobility;
pub mod numfmt;
pub mod predict;
pub mod rng;
pub mod rnn;
pub mod scm;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use geom::Vec2;
