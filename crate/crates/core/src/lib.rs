//! Tokenization-free text representations from character ngrams.
//!
//! The pipeline: normalize a raw corpus ([`corpus`]), cut it into random
//! segments several times over ([`segmenter`]), train skip-gram embeddings
//! on the segments ([`trainer`]), mine string operations that preserve
//! embedding geometry ([`transducer`]), and build span or position
//! representations from the embeddings ([`represent`]). [`eval`] holds the
//! denoising and entity-typing harnesses.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod represent;
pub mod seed;
pub mod segmenter;
pub mod synth;
pub mod trainer;
pub mod transducer;

pub use corpus::{Alphabet, Corpus, Permutation, WhitespaceMode, DEFAULT_MARKER};
pub use error::{Error, Result};
pub use eval::{DenoiseConfig, EvalReport, TypingDataset, TypingModel};
pub use represent::{ContextRepr, PositionEmbedding, ReprKind, SpanVector};
pub use segmenter::{CountMode, SegmentSource, SegmentStream, SegmentationConfig};
pub use trainer::{NgramEmbeddings, TrainConfig, Vocab};
pub use transducer::{Rule, RuleKey, RuleKind, RuleSet};
