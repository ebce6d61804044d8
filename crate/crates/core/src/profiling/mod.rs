//! Interviewing users and turning what they say into client profiles.

pub mod extract;
pub mod infer;
pub mod llm;
pub mod profile;
pub mod script;

pub use extract::{
    ExtractionSource, Extraction, ExtractorDefaults, FactorExtractor, RuleExtractor,
};
pub use infer::infer_factors;
pub use llm::{llm_complete, ChatMessage, LlmClient, LlmClientConfig, LlmError};
pub use profile::{build_profile, BuiltProfile, ProfileSettings};
pub use script::{InterviewSession, Role, Scenario, SessionState, Slot, Turn};
