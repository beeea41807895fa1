//! IBench: a deterministic evaluation harness for the identity
//! customization pipeline in `editid-core`.
//!
//! A run takes a TOML config describing datasets, prompt sets, the feature
//! branch, and the integration settings; pairs every image with every
//! prompt; generates with-ID and without-ID images per case from the same
//! seed; scores the enabled metrics; and persists canonical-JSON artifacts
//! whose bytes are stable across reruns and machines. Sweeps repeat the run
//! over layer-selection or fusion variants and render comparison tables
//! plus consistency-vs-editability tradeoff curves.

pub mod canonical;
pub mod config;
pub mod data;
pub mod fixtures;
pub mod pipeline;
pub mod report;
pub mod runner;
pub mod suite;
pub mod sweep;
