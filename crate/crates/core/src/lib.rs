//! Curation of a colloquial-to-canonical symptom lexicon from social media
//! text: ingestion, extraction, normalization, ensemble concept mapping,
//! annotation rounds and frequency analytics.

pub mod analytics;
pub mod annotation;
pub mod corpus;
pub mod config;
pub mod curation;
pub mod extract;
pub mod mapping;
pub mod normalize;
pub mod pipeline;
pub mod text;
pub mod util;
