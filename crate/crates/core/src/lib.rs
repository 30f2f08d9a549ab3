//! Hidden input Markov model (HIMM) for energy-harvesting cognitive radio.
//!
//! The primary user's channel state `C_t` (idle/busy) is a Markov chain driven
//! by its harvested energy level `E_t`, itself a hidden Markov chain. A
//! secondary user observes its own harvested energy `U_t` (a noisy copy of
//! `E_t`) and the slot energy statistic `Y_t` of the channel. This crate
//! provides:
//!
//! * [`model`]: the parameter set, its invariants, physical derivations and file format;
//! * [`simgen`]: seeded generation of hidden trajectories and observations;
//! * [`filter`]: recursive posterior of `(C_t, E_t)` and joint MAP sensing (2-D and 1-D);
//! * [`em`]: scaled forward/backward statistics and EM parameter learning;
//! * [`eval`]: ROC, matched false-alarm comparison, tracking and mutual-information metrics.

pub mod em;
pub mod error;
pub mod eval;
pub mod filter;
pub mod model;
pub mod seed;
pub mod simgen;
pub mod table;

pub use error::{HimmError, Result};
pub use model::{HimmParams, ModelShape, PhysicalConfig, BUSY, CHANNEL_STATES, IDLE};
