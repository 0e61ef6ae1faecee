//! Skipgram with negative sampling over segment streams.
//!
//! Units are whole segments: the model never sees characters, only the
//! opaque segment strings produced by the segmenter (or by an external
//! tokenizer when comparing against symbolic baselines).

mod embeddings;
mod io;
mod sgns;
mod vocab;

pub use embeddings::NgramEmbeddings;
pub use io::{load_embeddings, read_embeddings, save_embeddings, write_embeddings};
pub use sgns::{init_vectors, train_sgns, train_with_vocab, TrainConfig};
pub use vocab::{build_vocab, Vocab};
