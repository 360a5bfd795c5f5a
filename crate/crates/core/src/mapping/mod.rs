//! Two-channel concept mapping: embedding cosine and normalized edit
//! distance, thresholded and merged into candidates.

pub mod embed;
pub mod ensemble;
pub mod inventory;
pub mod levenshtein;
pub mod sweep;

pub use embed::{cosine, EmbedError, Embedder, EmbeddingStore, TrigramEmbedder, Vectors};
pub use ensemble::{
    ensemble_from, ensemble_map, lexical_top1, read_candidates, semantic_top1, top1_all, write_candidates, Channel, LemmaTop1, MappingCandidate,
    MappingError, ThresholdConfig,
};
pub use inventory::{match_key, Concept, ConceptInventory, InventoryError};
pub use levenshtein::{fuzzy_similarity, levenshtein};
pub use sweep::{elbow, threshold_sweep, unit_grid, Sweep, SweepError};
