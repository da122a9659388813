//! Document-level event argument extraction with curriculum-staged prompts.
//!
//! The crate covers everything up to and after the generation model: reading
//! annotations and sentence graphs ([`dataset`], [`amr`]), building staged training
//! instances ([`staging`], [`prompts`]), three-stage pipeline decoding over any
//! [`decoder::Generator`], and exact-match scoring ([`eval`]).

pub mod amr;
pub mod config;
pub mod dataset;
pub mod decoder;
pub mod eval;
pub mod pipeline;
pub mod prompts;
pub mod staging;
