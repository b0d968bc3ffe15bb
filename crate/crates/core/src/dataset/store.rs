//! On-disk container: `manifest.json` plus one `rooms/<index>.pcm` blob per
//! room holding every clip as little-endian 16-bit PCM, clip after clip.
//! Each clip is stored as `round(x / scale * 32767)` with its own `scale`
//! (the clip's peak magnitude) recorded in the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use super::{enumerate_pairs, GenerationConfig, LabeledPair, RoomRecording, ScenarioSpec, SourceInfo};
use crate::acoustics::Vec3;
use crate::dsp::AudioClip;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const ROOMS_DIR: &str = "rooms";
const FULL_SCALE: f64 = 32767.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub config_hash: String,
    pub config: GenerationConfig,
    pub stats: DatasetStats,
    pub rooms: Vec<RoomEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetStats {
    pub rooms: usize,
    pub moving_rooms: usize,
    pub pairs_total: usize,
    pub pairs_out_of_range: usize,
    pub out_of_range_rate: f64,
}

/// Labels of one room in pair order `(0,1), (0,2), ..., (M-2,M-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairLabels {
    pub tdoa_s: Vec<f64>,
    /// `null` marks an out-of-range pair.
    pub class_id: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomEntry {
    pub index: usize,
    /// Path of the blob relative to the dataset directory.
    pub blob: String,
    pub sha256: String,
    pub samples_per_clip: usize,
    pub sample_rate_hz: u32,
    pub scales: Vec<f64>,
    pub source: SourceInfo,
    pub source_midpoint: Vec3,
    pub scenario: ScenarioSpec,
    pub labels: PairLabels,
}

impl RoomEntry {
    pub fn num_clips(&self) -> usize {
        self.scales.len()
    }

    pub fn pairs(&self) -> Vec<LabeledPair> {
        let m = self.num_clips();
        let mut out = Vec::with_capacity(self.labels.tdoa_s.len());
        let mut k = 0;
        for i in 0..m {
            for j in i + 1..m {
                out.push(LabeledPair {
                    i,
                    j,
                    tdoa_s: self.labels.tdoa_s[k],
                    class_id: self.labels.class_id[k],
                });
                k += 1;
            }
        }
        out
    }

    fn blob_len(&self) -> u64 {
        (self.num_clips() * self.samples_per_clip * 2) as u64
    }
}

/// Bytes of PCM for a dataset of the given shape.
pub fn blob_size_bytes(rooms: usize, mics: usize, samples: usize) -> u64 {
    (rooms * mics * samples * 2) as u64
}

/// Hex SHA-256.
pub fn hash_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn encode_clip(clip: &AudioClip, out: &mut Vec<u8>) -> f64 {
    let peak = clip.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { peak } else { 1.0 };
    for v in &clip.samples {
        let q = (v / scale * FULL_SCALE).round().clamp(-FULL_SCALE, FULL_SCALE) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    scale
}

/// Appends rooms one at a time and writes the manifest on [`finish`].
///
/// [`finish`]: DatasetWriter::finish
pub struct DatasetWriter {
    dir: PathBuf,
    master_seed: u64,
    config: GenerationConfig,
    rooms: Vec<RoomEntry>,
}

impl DatasetWriter {
    /// Creates `dir` (and `dir/rooms`). Stale blobs from an earlier run are
    /// removed.
    pub fn create(dir: &Path, config: &GenerationConfig, master_seed: u64) -> Result<Self> {
        let rooms = dir.join(ROOMS_DIR);
        fs::create_dir_all(&rooms).map_err(|e| Error::io(format!("creating {}", rooms.display()), e))?;
        let listing = fs::read_dir(&rooms).map_err(|e| Error::io(format!("reading {}", rooms.display()), e))?;
        for entry in listing.flatten() {
            let p = entry.path();
            if p.extension().is_some_and(|e| e == "pcm") {
                fs::remove_file(&p).map_err(|e| Error::io(format!("removing {}", p.display()), e))?;
            }
        }
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(|e| Error::io(format!("removing {}", manifest.display()), e))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            master_seed,
            config: config.clone(),
            rooms: Vec::new(),
        })
    }

    pub fn rooms_written(&self) -> usize {
        self.rooms.len()
    }

    pub fn append(&mut self, rec: &RoomRecording, source: SourceInfo) -> Result<&RoomEntry> {
        let first = rec
            .clips
            .first()
            .ok_or_else(|| Error::invalid("recording has no clips"))?;
        let samples = first.len();
        if rec
            .clips
            .iter()
            .any(|c| c.len() != samples || c.sample_rate_hz != first.sample_rate_hz)
        {
            return Err(Error::invalid("clips of one room must share length and rate"));
        }
        let index = self.rooms.len();
        let blob = format!("{ROOMS_DIR}/{index:06}.pcm");
        let mut bytes = Vec::with_capacity(rec.clips.len() * samples * 2);
        let scales = rec.clips.iter().map(|c| encode_clip(c, &mut bytes)).collect();
        let path = self.dir.join(&blob);
        fs::write(&path, &bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;

        let pairs = enumerate_pairs(rec, self.config.num_classes);
        self.rooms.push(RoomEntry {
            index,
            blob,
            sha256: hash_bytes(&bytes),
            samples_per_clip: samples,
            sample_rate_hz: first.sample_rate_hz,
            scales,
            source,
            source_midpoint: rec.source_midpoint,
            scenario: rec.spec.clone(),
            labels: PairLabels {
                tdoa_s: pairs.iter().map(|p| p.tdoa_s).collect(),
                class_id: pairs.iter().map(|p| p.class_id).collect(),
            },
        });
        Ok(self.rooms.last().expect("just pushed"))
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<Manifest> {
        let mut stats = DatasetStats {
            rooms: self.rooms.len(),
            ..DatasetStats::default()
        };
        for room in &self.rooms {
            stats.moving_rooms += usize::from(room.scenario.source_path.is_moving());
            stats.pairs_total += room.labels.class_id.len();
            stats.pairs_out_of_range += room.labels.class_id.iter().filter(|c| c.is_none()).count();
        }
        if stats.pairs_total > 0 {
            stats.out_of_range_rate = stats.pairs_out_of_range as f64 / stats.pairs_total as f64;
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            master_seed: self.master_seed,
            config_hash: self.config.hash(),
            config: self.config,
            stats,
            rooms: self.rooms,
        };
        let bytes = serde_json::to_vec(&manifest).map_err(|e| Error::Json {
            context: "serialising manifest".into(),
            source: e,
        })?;
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        let dst = self.dir.join(MANIFEST_FILE);
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        f.write_all(&bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
        fs::rename(&tmp, &dst).map_err(|e| Error::io(format!("renaming to {}", dst.display()), e))?;
        Ok(manifest)
    }
}

/// Read-only view of a dataset directory. Rooms are decoded on demand.
#[derive(Debug, Clone)]
pub struct DatasetReader {
    dir: PathBuf,
    manifest: Manifest,
    manifest_hash: String,
}

/// Opens a dataset for streaming reads.
pub fn read_dataset(dir: &Path) -> Result<DatasetReader> {
    DatasetReader::open(dir)
}

impl DatasetReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let json_err = |e| Error::Json {
            context: format!("parsing {}", path.display()),
            source: e,
        };
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(json_err)?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("{} has no schema_version", path.display()),
            })?;
        if found != SCHEMA_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found.min(u32::MAX as u64) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(value).map_err(json_err)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            manifest_hash: hash_bytes(&bytes),
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// SHA-256 of the manifest file bytes.
    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.manifest.rooms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.rooms.is_empty()
    }

    /// Loads and verifies one room.
    pub fn read_room(&self, index: usize) -> Result<RoomRecording> {
        let entry = self
            .manifest
            .rooms
            .get(index)
            .ok_or_else(|| Error::invalid(format!("room {index} not in dataset of {}", self.len())))?;
        let path = self.dir.join(&entry.blob);
        let bytes = fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if (bytes.len() as u64) < entry.blob_len() {
            return Err(Error::TruncatedBlob {
                path: path.clone(),
                expected: entry.blob_len(),
                found: bytes.len() as u64,
            });
        }
        if hash_bytes(&bytes) != entry.sha256 || bytes.len() as u64 != entry.blob_len() {
            return Err(Error::ChecksumMismatch { path: path.clone() });
        }
        let n = entry.samples_per_clip;
        let clips = entry
            .scales
            .iter()
            .enumerate()
            .map(|(c, &scale)| {
                let raw = &bytes[c * n * 2..(c + 1) * n * 2];
                let samples = raw
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / FULL_SCALE * scale)
                    .collect();
                AudioClip::new(samples, entry.sample_rate_hz)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RoomRecording {
            spec: entry.scenario.clone(),
            clips,
            source_midpoint: entry.source_midpoint,
        })
    }

    /// Streams rooms in index order.
    pub fn rooms(&self) -> impl Iterator<Item = Result<RoomRecording>> + '_ {
        (0..self.len()).map(|i| self.read_room(i))
    }
}
