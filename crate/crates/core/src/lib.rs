//! Forwards/backwards orientation of utterances in two-party conversations.
//!
//! An agent phrasing is forwards-oriented when the replies it receives are
//! more predictable than the utterances it follows, and backwards-oriented
//! in the opposite case. The pipeline embeds client utterances with a
//! truncated SVD of their tf-idf matrix, groups them around each agent
//! phrasing, and compares the spread of replies with the spread of
//! predecessors.

pub mod analysis;
pub mod baselines;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod model;
pub mod orientation;
pub mod phrasing;
pub mod stats;
pub mod synth;
pub mod vectorize;

pub use config::RunConfig;
pub use corpus::{Conversation, Corpus, Role, Utterance};
pub use error::{Error, Result};
pub use orientation::{fit_orientation, score_corpus, score_utterance, OrientationModel};
