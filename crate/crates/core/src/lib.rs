//! Keystroke inference from hand-tracking telemetry.
//!
//! The crate covers the whole chain: a seeded typing simulator, camera
//! transforms between telemetry surfaces, keystroke detection, finger
//! identification, key recognition with an HMM over touchpoint clusters,
//! defenses that degrade the telemetry, and text metrics. [`pipeline`] ties
//! the stages together with on-disk artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod defense;
pub mod detection;
pub mod error;
pub mod fingerid;
pub mod formats;
pub mod keyboard;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod recognition;
pub mod rng;
pub mod sim;
pub mod transforms;

pub use error::{Error, Result};
pub use model::*;
