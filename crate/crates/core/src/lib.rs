//! Staged human-AI playwriting engine.
//!
//! A script grows through five stages (logline, characters, plots, scenes,
//! dialogues). Functional agents draft structured elements for a stage,
//! tutors coach through chat, and the user confirms each stage before the
//! next one can be generated.

pub mod agents;
pub mod analytics;
pub mod api;
pub mod cli;
pub mod clock;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod store;

pub use error::{Error, Result};
