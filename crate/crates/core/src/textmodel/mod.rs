//! Bag-of-n-grams classifier and subword embedding training.

mod matrix;
mod model_io;
mod supervised;
mod table;
mod unsupervised;
mod vectors;
mod vocab;

pub use matrix::Matrix;
pub use model_io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use supervised::{
    attach_pretrained, softmax_loss_gradients, train_supervised, train_supervised_with_labels, Loss,
    SupervisedModel, TrainConfig, WordVectors,
};
pub use table::EmbeddingTable;
pub use unsupervised::{train_unsupervised, EmbeddingConfig, EmbeddingModel};
pub use vectors::{load_vectors, save_vectors};
pub use vocab::{build_vocab, fnv1a64, VocabConfig, Vocabulary};
pub(crate) use vocab::{count_words, rank_words};
