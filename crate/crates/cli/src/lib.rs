//! Harness around `maxharm-core`: seeded corpora, inequality experiments
//! with CSV/JSON reports, and the acceptance suite behind the `maxharm`
//! binary.

pub mod config;
pub mod corpus;
pub mod experiment;
pub mod pins;
pub mod verify;
