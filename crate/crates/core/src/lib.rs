//! Data preparation and evaluation toolkit for natural language inference
//! over entity tables.
//!
//! The crate turns infobox-style tables and hypotheses into premise text,
//! cloze training instances with their objectives, knowledge probes, and
//! adversarial perturbation sets, and computes the reports over predictions
//! produced elsewhere.

pub mod annotate;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod io;
pub mod label;
pub mod metrics;
pub mod perturb;
pub mod pet;
pub mod premise_repr;
pub mod probe;
pub mod rng;
pub mod stem;
pub mod text;

pub use error::{ForgeError, Result};
pub use label::Label;
