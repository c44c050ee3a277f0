//! From touch points to text: clustering, HMM decoding, consistency filters,
//! backspace handling, the refiner seam and spell correction.

pub mod backspace;
pub mod filter;
pub mod hmm;
pub mod kmeans;
pub mod ngram;
pub mod refiner;
pub mod spell;

pub use backspace::{find_backspace_cluster, resolve_backspaces, BackspaceParams};
pub use filter::{consistency_filter, FilterOutcome};
pub use hmm::{
    build_transition_matrix, learn_emissions, unigram_distribution, viterbi_decode, viterbi_path, BaumWelchParams,
    HmmParams, Matrix,
};
pub use kmeans::{cluster_touchpoints, kmeans, ClusterParams, TouchpointMap};
pub use ngram::{polish_labels, CharNgram, PolishParams};
pub use refiner::{train_refiner, CentroidRefiner, Mixup, Refiner, RefinerDataset, RefinerOptions, RefinerSample};
pub use spell::{spell_correct, Lexicon, WordBigram};
