//! Judgment collection for the eleven-task collider battery.
//!
//! Three ways to fill a [`collider_core::data::Dataset`]:
//!
//! * [`sweep::run_sweep`] asks a live chat-completion endpoint, with
//!   bounded concurrency, retries, and a raw JSONL transcript;
//! * [`synthetic::simulate_agent`] samples a known collider model plus
//!   response noise, for recovery studies and pipeline smoke tests;
//! * [`testing::StubServer`] stands in for the endpoint so the whole wire
//!   path is testable offline.
//!
//! Prompt construction lives in [`template`], judgment extraction in
//! [`parse`].

pub mod parse;
pub mod sweep;
pub mod synthetic;
pub mod template;
pub mod testing;

pub use parse::{parse_response, ParseError, ParseMethod, Parsed};
pub use sweep::{
    run_sweep, EndpointConfig, FailureKind, RequestFailure, RequestOutcome, SweepError,
    SweepOutcome, TranscriptEntry,
};
pub use synthetic::{simulate_agent, SyntheticAgent, SyntheticError};
pub use template::{PromptTemplate, TemplateError};
