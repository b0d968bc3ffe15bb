//! Scenario sampling, rendering, pair labelling and the on-disk dataset
//! container.

mod config;
mod generate;
mod labels;
mod scenario;
mod sources;
mod store;

pub use config::GenerationConfig;
pub use generate::{generate_dataset, generate_room};
pub use labels::{class_to_tdoa, enumerate_pairs, tdoa_to_class, LabeledPair};
pub use scenario::{
    add_scenario_noise, render_scenario, render_scenario_clean, sample_scenario, RoomRecording, ScenarioSpec,
};
pub use sources::{SourceInfo, SourcePool, SyntheticKind};
pub use store::{
    blob_size_bytes, hash_bytes, read_dataset, DatasetReader, DatasetStats, DatasetWriter, Manifest, RoomEntry,
    SCHEMA_VERSION,
};
