//! Macro-nutrient estimation for free-form food titles.
//!
//! Food names from USDA FoodData Central are normalized and embedded once
//! ([`usda`], [`store`]). A title is embedded the same way, its nearest foods
//! are retrieved by exact cosine search ([`index`]) and their nutrients per
//! 100 g are aggregated ([`estimator`]). [`tuning`] grid-searches the
//! retrieval parameters against labeled recipes and [`corpus`] turns Reddit
//! food-post dumps into weekly activity and nutrient series.

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod corpus;
pub mod estimator;
pub mod index;
pub mod nutrients;
pub mod store;
pub mod tuning;
pub mod usda;

pub use estimator::{
    aggregate, Aggregation, EmbeddingProvider, EstimateError, Estimator, EstimatorConfig,
    NutrientEstimate, Outcome, PrecomputedEmbeddings, ProcessProvider,
};
pub use index::{build_index, Index, NeighborHit};
pub use nutrients::{Nutrient, NutrientVector, Source};
pub use store::{
    cosine_similarity, read_store, unit_normalize, write_store, EmbeddingRecord, EmbeddingStore,
};
pub use usda::{build_food_db, normalize_query_title, normalize_usda_name, FoodDb, FoodRecord};
