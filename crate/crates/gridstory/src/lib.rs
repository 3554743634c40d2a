//! Dataset builder and evaluation harness on top of [`gridstory_core`].
//!
//! The core crate owns the abstract pipeline (walks, facts, templates,
//! solving); this crate owns everything that touches the outside world:
//!
//! * [`dataset`] — expands a build config into the four dataset variants
//!   (clean/noisy × ordered/shuffled), persists them as JSONL shards with a
//!   manifest, and re-verifies them on the way back in.
//! * [`eval`] — constructs chat prompts from shipped assets, talks to a
//!   chat-completions endpoint (or a mock), extracts and scores answers, and
//!   writes result tables.
//!
//! The binary target wires both up behind `generate` / `verify` / `eval`
//! subcommands.

pub mod dataset;
pub mod eval;
