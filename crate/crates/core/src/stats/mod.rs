//! Statistics over the liked-sequence windows and the tag genome.

mod cooccurrence;
mod mf;
mod popularity;
mod ranking;
mod store;
mod tags;

pub use cooccurrence::{pmi2_from_counts, CooccurrenceTable, PairCount};
pub use mf::{
    cosine, mf_pair_decision, train_mf, MfConfig, MfModel, Objective, Pick, Sample, TrainingSet,
};
pub use popularity::{PopularityConfig, PopularityIndex};
pub use ranking::{top_related, Neighbor, PmiRanking};
pub use store::{StatsConfig, StatsStore, StoreInputs};
pub use tags::{TagIndex, TAG_RELEVANCE_ABOVE};
