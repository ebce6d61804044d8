//! Preference-aware precision planning for mixed-precision federated
//! learning on voice-assistant devices.
//!
//! Users describe their setting and priorities in a short interview; the
//! server turns that into a profile, scores every quantization level for the
//! client and packs clients into per-level aggregation slots each round.

pub mod accuracy;
pub mod domain;
pub mod error;
pub mod fixtures;
pub mod planner;
pub mod profiling;
pub mod satisfaction;
pub mod sim;
pub mod store;

pub use error::{Error, Result, ValidationError};
