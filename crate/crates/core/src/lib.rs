//! Political-leaning classification of news articles with Wikipedia and
//! debate-topic knowledge infusion, plus domain-disjoint evaluation.

pub mod backbone;
pub mod config;
pub mod corpus;
pub mod debates;
pub mod encoder;
pub mod error;
pub mod fusion;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod report;
pub mod skipgram;
pub mod split;
pub mod synth;
pub mod text;
pub mod topics;
pub mod train;
pub mod wiki;

pub use error::{Error, Result};
