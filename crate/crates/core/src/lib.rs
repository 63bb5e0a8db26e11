//! Core library for a skill registry: skill packages, creation, curation,
//! evaluation, the relation graph, search, the on-disk store and the
//! discovery/activation/execution lifecycle.

pub mod creation;
pub mod curation;
pub mod evaluation;
pub mod graph;
pub mod judge;
pub mod lifecycle;
pub mod provider;
pub mod repository;
pub mod search;
pub mod skill;
pub mod store;
pub mod text;
