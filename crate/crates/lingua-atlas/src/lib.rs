//! Measure language similarity from raw speech.
//!
//! The pipeline: a synthetic (or user-supplied) multilingual corpus is
//! featurized into 80-bin log-mel spectrograms, a small LSTM classifier is
//! trained to identify the language of an utterance, and the classifier's
//! first fully connected layer yields a 64-dimensional embedding per
//! language. The embeddings are then evaluated against geographic distance,
//! language-family trees, outlier structure, and neighbor-selection quality
//! for zero-shot voice transfer.
//!
//! Modules follow the pipeline stages:
//!
//! - [`corpus`]: language metadata, manifests, WAV I/O, synthetic corpus
//!   generation, train/test splitting.
//! - [`dsp`]: STFT, log-mel spectrograms, mel cepstra, and mel-cepstral
//!   distortion with DTW alignment.
//! - [`model`]: the LSTM → max-pool → FC classifier with from-scratch
//!   backprop and Adam training.
//! - [`embed`]: per-language embedding extraction and exact nearest-neighbor
//!   queries over distance matrices.
//! - [`geodesy`]: great-circle distances and the global/local embedding-vs-
//!   geography correlation metric.
//! - [`familytree`]: classification-string parsing, family forests, and the
//!   tree-based k-neighbor metric.
//! - [`similarity`]: outlier analysis, bag-of-phonemes vectors, neighbor
//!   selection, and the zero-shot MCD harness.

pub mod corpus;
pub mod dsp;
pub mod embed;
pub mod familytree;
pub mod geodesy;
pub mod model;
pub mod similarity;

pub use corpus::{CorpusManifest, LanguageId, LanguageRecord, Split, TreeSource, Utterance};
pub use dsp::{MelCepstrum, MelConfig, MelSpectrogram};
pub use embed::{DistanceKind, DistanceMatrix, EmbeddingTable};
pub use familytree::{FamilyForest, ForestStats, TreeMetricReport};
pub use geodesy::CorrelationReport;
pub use model::{ClassifierConfig, ClassifierState};
pub use similarity::{OutlierReport, PhonemeVector};
