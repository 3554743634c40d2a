//! Core engine for generating, rendering, parsing and solving spatial-reasoning
//! stories anchored to a 2-D integer grid.
//!
//! A story instance is built in stages, each of which lives in its own module:
//!
//! 1. [`story`] draws a self-avoiding walk on the grid and turns it into a
//!    skeleton of relational facts plus a query about the walk's endpoints,
//!    optionally adding distractor facts and permuting the narration order;
//! 2. [`naming`] assigns entity names (symbolic tokens, anglophone first
//!    names, city names, or generated nonce words);
//! 3. [`lingo`] renders the facts into natural-language sentences drawn from a
//!    swappable template pack;
//! 4. [`parser`] inverts that rendering, recovering the relational program
//!    from the sentences, and can emit it as ASP facts;
//! 5. [`solver`] propagates grid coordinates over the parsed facts and answers
//!    the query (or reports underspecification / contradiction).
//!
//! Rendering followed by parsing and solving reproduces the constructed answer
//! exactly, which is what makes every generated instance machine-checkable.
//!
//! The crate is `no_std`-compatible (it needs only `alloc`); everything that
//! touches files, processes or the network lives in the companion `gridstory`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod direction;
pub mod lingo;
pub mod naming;
pub mod parser;
pub mod rng;
pub mod solver;
pub mod story;

pub use direction::{direction_of, invert, normalize, offset_of, Direction, Offset, Position};
