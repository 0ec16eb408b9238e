//! Hybrid offline-online design of an RIS-aided UAV downlink under Rician
//! fading.
//!
//! Offline, with statistical channel knowledge only, the crate alternates
//! stochastic phase optimization ([`ssca`]), sample-average scheduling
//! ([`scheduling`]) and successive convex trajectory design ([`trajectory`]).
//! Online, each slot's realized channels drive argmax scheduling and MRT
//! beamforming ([`rate`]). [`pipeline`] runs the design against benchmark
//! schemes with paired Monte-Carlo evaluation and [`output`] writes the
//! artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod output;
mod par;
pub mod pipeline;
pub mod rate;
pub mod scheduling;
pub mod ssca;
pub mod trajectory;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
