//! Adaptive fine-tuning control and multi-seed experiment statistics.
//!
//! The [`schedule`] state machine drives learning-rate warm-up, constant
//! training and validation-triggered cool-down. [`toytrainer`] provides a
//! small sequence tagger to exercise it, [`nermetrics`] scores predictions
//! with strict entity-level f1, and [`stats`] and [`runner`] turn seeded
//! runs into summary tables.

pub mod corpus;
pub mod nermetrics;
pub mod schedule;
pub mod stats;
pub mod toytrainer;
pub mod runner;
