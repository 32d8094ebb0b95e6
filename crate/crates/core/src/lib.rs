//! Core of the interactive translation evaluation platform: text handling,
//! the edit model, alignment, lexical templates, translation backends,
//! simulated users, the dialogue engine, metrics and corpus I/O.

pub mod alignment;
pub mod backends;
pub mod corpus;
pub mod edit;
pub mod metrics;
pub mod seed;
pub mod session;
pub mod simulator;
pub mod template;
pub mod text;
