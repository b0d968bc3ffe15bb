use std::path::Path;

use rayon::prelude::*;

use super::{
    render_scenario, sample_scenario, DatasetWriter, GenerationConfig, Manifest, RoomRecording, SourceInfo, SourcePool,
};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream};

/// Samples and renders room `index` of the dataset defined by
/// `(config, master_seed)`. Independent of any other room.
pub fn generate_room(
    config: &GenerationConfig,
    master_seed: u64,
    index: usize,
    pool: &SourcePool,
) -> Result<(RoomRecording, SourceInfo)> {
    let seed = derive_seed(master_seed, stream::ROOM, index as u64);
    let spec = sample_scenario(seed, config)?;
    let (audio, info) = pool.draw(seed, config.source_len(), config.sample_rate_hz)?;
    let rec = render_scenario(&spec, &audio).map_err(|e| match e {
        Error::Generation { .. } => e,
        other => Error::Generation {
            seed,
            message: other.to_string(),
        },
    })?;
    Ok((rec, info))
}

/// Generates `config.rooms` rooms into `dir`. Rooms are rendered in
/// parallel in small batches and appended in index order.
/// `progress(done, total)` is called after each batch.
pub fn generate_dataset(
    config: &GenerationConfig,
    master_seed: u64,
    pool: &SourcePool,
    dir: &Path,
    progress: impl Fn(usize, usize),
) -> Result<Manifest> {
    if config.rooms == 0 {
        return Err(Error::invalid("dataset needs at least one room"));
    }
    let mut writer = DatasetWriter::create(dir, config, master_seed)?;
    let batch = (rayon::current_num_threads() * 2).max(2);
    let mut start = 0;
    while start < config.rooms {
        let end = (start + batch).min(config.rooms);
        let rooms: Vec<_> = (start..end)
            .into_par_iter()
            .map(|i| generate_room(config, master_seed, i, pool))
            .collect::<Result<_>>()?;
        for (rec, info) in rooms {
            writer.append(&rec, info)?;
        }
        progress(end, config.rooms);
        start = end;
    }
    writer.finish()
}
