//! Core library of the ontology-based SMS controller.
//!
//! The pipeline mirrors how a message travels through the controller:
//!
//! 1. [`message`] — the SMS transport unit and phone-address handling.
//! 2. [`taxonomy`] — a self-contained lexical taxonomy (a WordNet stand-in)
//!    with path, depth, lowest-super-ordinate, synonym and hypernym queries.
//! 3. [`preprocess`] — sender prefiltering, tokenization, stop-word removal,
//!    homogeneous-word normalization and duplicate elimination.
//! 4. [`ontology`] — the persistent spam-concept knowledge base.
//! 5. [`engine`] — sense disambiguation, concept-set generation, O/S/H
//!    matching, collective scoring, classification, enhancement and feedback.
//! 6. [`chat`] — the SMS-carried group-chat wire protocol and session state.
//! 7. [`rules`] — auto-reply profiles, scheduled events, birthday sync and
//!    the auto-message report.
//!
//! Everything here is transport-agnostic and deterministic; the companion
//! simulator crate supplies virtual devices and a message bus.

pub mod chat;
pub mod engine;
pub mod message;
pub mod ontology;
pub mod preprocess;
pub mod rules;
pub mod taxonomy;

pub use engine::{Classification, Classifier, EngineConfig, Verdict};
pub use message::{MessageKind, SmsMessage, MAX_SMS_BYTES};
pub use ontology::SpamOntology;
pub use taxonomy::TaxonomyGraph;
