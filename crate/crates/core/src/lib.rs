//! Synthetic text-to-SQL dataset generation and execution-match evaluation.
pub mod bench;
pub mod compare;
pub mod datagen;
pub mod llm;
pub mod model;
mod par;
pub mod runner;
